"""Studentized statistic tests: worked rows, conventions, the level map."""

import csv
import math

import numpy as np
import pytest
import scipy.stats as st

from exceedlab import studentize as stu


def _direct_t(row):
    # Independent arithmetic oracle for one row.
    row = np.asarray(row, dtype=float)
    n = row.size
    mean = row.sum() / n
    s2 = (row * row).sum() / n - mean * mean
    return math.sqrt(n) * mean / math.sqrt(s2)


def test_symmetric_row_is_zero():
    rows = stu.studentize_panel(np.array([[1.0, -1.0, 1.0, -1.0]]))
    assert rows.t[0] == 0.0
    assert rows.scale[0] == 1.0


def test_worked_row():
    row = [1.0, 1.0, 1.0, -1.0]
    rows = stu.studentize_panel(np.array([row]))
    assert rows.mean[0] == 0.5
    assert rows.scale[0] == pytest.approx(math.sqrt(0.75), rel=1e-15)
    assert rows.t[0] == pytest.approx(1.154700, abs=1e-6)
    assert rows.t[0] == pytest.approx(_direct_t(row), rel=1e-15)


def test_zero_row_convention():
    rows = stu.studentize_panel(np.zeros((1, 4)))
    assert rows.degenerate[0]
    assert rows.t[0] == 1.0
    assert rows.r[0] == pytest.approx(1.0 / math.sqrt(1.25), rel=1e-15)


def test_constant_row_convention():
    rows = stu.studentize_panel(np.array([[2.0] * 4, [-3.0] * 4]))
    assert rows.degenerate.all()
    assert rows.t[0] == math.inf and rows.t[1] == -math.inf
    assert rows.r[0] == 2.0 and rows.r[1] == -2.0
    assert (rows.scale == 0.0).all()


def test_row_view_and_iteration():
    data = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    rows = stu.studentize_panel(data)
    assert len(rows) == 2
    first = rows[0]
    assert first.index == 1 and not first.degenerate
    assert [r.index for r in rows] == [1, 2]


def test_rejects_single_column():
    with pytest.raises(ValueError):
        stu.studentize_panel(np.ones((3, 1)))


def test_scale_invariance():
    rng = np.random.default_rng(7)
    data = rng.standard_normal((100, 8))
    base = stu.studentize_panel(data)
    # powers of two rescale exactly in floating point
    doubled = stu.studentize_panel(data * 4.0)
    assert np.array_equal(base.t, doubled.t)
    # general positive factors agree to rounding
    scaled = stu.studentize_panel(data * 1.7)
    assert np.allclose(base.t, scaled.t, rtol=1e-12)
    flipped = stu.studentize_panel(-data)
    assert np.array_equal(base.t, -flipped.t)


def test_t_r_event_equivalence_exact():
    # The T and R exceedance events coincide exactly on simulated rows.
    rng = np.random.default_rng(11)
    n = 10
    data = rng.standard_normal((120_000, n))
    rows = stu.studentize_panel(data)
    for t in (0.5, 1.0, 1.8, 2.5, 3.5):
        r_level = stu.t_level_to_r_level(t, n)
        assert np.array_equal(rows.t > t, rows.r > r_level)


def test_level_map_values_and_limits():
    assert stu.t_level_to_r_level(2.0, 4) == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert stu.t_level_to_r_level(1e-9, 4) == pytest.approx(1e-9, rel=1e-6)
    assert stu.t_level_to_r_level(3.0, 10**12) == pytest.approx(3.0, rel=1e-9)
    with pytest.raises(ValueError):
        stu.t_level_to_r_level(0.0, 4)


def test_level_spec_carrier():
    level = stu.LevelSpec(t=2.0, n=4)
    assert level.r == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert level.r < min(level.t, math.sqrt(level.n))
    back = stu.LevelSpec.from_r_level(level.r, 4)
    assert back.t == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(ValueError):
        stu.LevelSpec(t=-1.0, n=4)


def test_level_map_monotone_bijection():
    n = 25
    ts = np.geomspace(1e-6, 50.0, 200)
    rs = np.array([stu.t_level_to_r_level(float(t), n) for t in ts])
    assert np.all(np.diff(rs) > 0)
    for t, r in zip(ts, rs):
        assert abs(stu.r_level_to_t_level(float(r), n) - t) < 1e-12 * max(1.0, t)
    with pytest.raises(ValueError):
        stu.r_level_to_t_level(5.0, 25)  # at sqrt(n) the map blows up


def test_null_distribution_matches_student_t():
    # For iid normal rows the exact-scale statistic follows Student t(n-1):
    # T uses the divisor-n scale, so T * sqrt((n-1)/n) is classical t.
    rng = np.random.default_rng(2024)
    n = 10
    reps = 100_000
    rows = stu.studentize_panel(rng.standard_normal((reps, n)))
    classical = rows.t * math.sqrt((n - 1.0) / n)
    stat, _ = st.kstest(classical, st.t(n - 1).cdf)
    assert stat < 1.63 / math.sqrt(reps)


def test_weighted_all_ones_is_bitwise_identical():
    rng = np.random.default_rng(3)
    data = rng.standard_normal((200, 9))
    plain = stu.studentize_panel(data)
    weighted = stu.weighted_studentize(data, np.ones_like(data))
    assert np.array_equal(plain.t, weighted.t)
    assert np.array_equal(plain.r, weighted.r)
    assert np.array_equal(plain.scale, weighted.scale)


def test_weighted_constant_weights_match_scaled_row():
    row = np.array([[1.0, 1.0, 1.0, -1.0]])
    weighted = stu.weighted_studentize(row, np.full((1, 4), 2.0))
    oracle = _direct_t([2.0, 2.0, 2.0, -2.0])
    assert weighted.t[0] == pytest.approx(oracle, rel=1e-15)
    assert weighted.t[0] == pytest.approx(1.154700, abs=1e-6)


def test_weight_constraint_rejections():
    data = np.ones((3, 6))
    small = np.full((3, 6), 0.05)  # every |w| below the c2 floor
    with pytest.raises(ValueError, match="C2"):
        stu.weighted_studentize(data, small)
    big = np.ones((3, 6))
    big[1, 2] = 50.0
    with pytest.raises(ValueError, match="rows \\[2\\]"):
        stu.weighted_studentize(data, big)
    with pytest.raises(ValueError):
        stu.weighted_studentize(data, np.ones((2, 6)))


def test_custom_constraint_constants():
    data = np.ones((1, 4))
    w = np.full((1, 4), 0.05)
    loose = stu.WeightConstraints(c1=1.0, c2=0.01, c3=0.5)
    rows = stu.weighted_studentize(data, w, constraints=loose)
    assert rows.degenerate[0]  # constant weighted row
    with pytest.raises(ValueError):
        stu.WeightConstraints(c1=-1.0)


def test_per_row_sizes():
    data = np.array([
        [1.0, 2.0, 3.0, 4.0],
        [5.0, 6.0, 7.0, 999.0],  # the 999 must be ignored (size 3)
    ])
    rows = stu.studentize_panel(data, sizes=[4, 3])
    oracle = _direct_t([5.0, 6.0, 7.0])
    assert rows.t[1] == pytest.approx(oracle, rel=1e-13)
    assert rows.sizes.tolist() == [4, 3]
    with pytest.raises(ValueError, match="rows \\[2\\]"):
        stu.studentize_panel(data, sizes=[4, 1])
    with pytest.raises(ValueError):
        stu.studentize_panel(data, sizes=[4, 5])


def test_centered_ratio_matches_r_under_null():
    rng = np.random.default_rng(5)
    data = rng.standard_normal((50, 6))
    rows = stu.studentize_panel(data)
    centered = stu.centered_ratio(data)
    assert np.allclose(centered, rows.r, rtol=1e-14)
    # with a known offset the normalizer recenters
    d = np.full(50, 0.7)
    shifted = data + 0.7
    got = stu.centered_ratio(shifted, offsets=d)
    want = shifted.sum(axis=1) / np.sqrt(((shifted - 0.7) ** 2).sum(axis=1))
    assert np.allclose(got, want, rtol=1e-14)


def test_row_stats_csv(tmp_path):
    data = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    rows = stu.studentize_panel(data)
    path = tmp_path / "rows.csv"
    stu.write_row_stats_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# schema:")
    reader = csv.DictReader(lines[1:])
    parsed = list(reader)
    assert parsed[0]["i"] == "1"
    assert float(parsed[0]["T"]) == pytest.approx(rows.t[0])
    assert parsed[1]["degenerate"] == "1"
