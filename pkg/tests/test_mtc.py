"""Bin thresholds/counts, BH, step-down FWER, realized error rates."""

import math

import numpy as np
import pytest
import scipy.stats as st

from exceedlab import mtc
from exceedlab import panelgen as pg
from exceedlab import studentize as stu
from exceedlab.numerics import any_exceedence_prob, student_t_quantile


def test_bin_thresholds_small_case():
    bins = mtc.bin_thresholds(100, 1.0, 3, mtc.StudentTMarginal(99))
    assert bins.thresholds[0] == pytest.approx(student_t_quantile(0.99, 99), rel=1e-12)
    assert bins.thresholds[0] == pytest.approx(2.3646, abs=1e-4)
    assert np.all(np.diff(bins.thresholds) < 0)
    assert bins.bin_probability() == pytest.approx(0.01)


def test_bin_thresholds_deep_case():
    bins = mtc.bin_thresholds(10**6, 1.0, 2, mtc.StudentTMarginal(99))
    assert bins.thresholds[0] == pytest.approx(5.052, abs=1e-3)


def test_bin_thresholds_guard():
    with pytest.raises(ValueError):
        mtc.bin_thresholds(10, 1.0, 10, mtc.StudentTMarginal(99))


def test_bin_threshold_validity_flags():
    # with gamma context, thresholds below the admissible floor are flagged
    bins = mtc.bin_thresholds(
        10**5, 1.0, 4, mtc.StudentTMarginal(99), gamma=1.225, eta=0.0
    )
    assert bins.t_floor is not None
    assert bins.valid.tolist() == (bins.thresholds >= bins.t_floor).tolist()
    assert bins.valid[0]
    assert not bins.valid[-1]


def test_bin_counts_trivials():
    bins = mtc.bin_thresholds(50, 1.0, 3, mtc.StudentTMarginal(9))
    low = np.zeros(50)
    counts = mtc.bin_counts(low, bins)
    assert counts.counts.tolist() == [0, 0, 0]
    assert counts.remainder == 50
    one = np.zeros(50)
    one[7] = bins.thresholds[0] + 1.0
    counts = mtc.bin_counts(one, bins)
    assert counts.counts.tolist() == [1, 0, 0]
    assert counts.total == 50


def test_bin_counts_boundaries_and_conservation():
    bins = mtc.bin_thresholds(6, 1.0, 2, mtc.StudentTMarginal(9))
    t1, t2 = bins.thresholds
    values = np.array([t1, t2, t1 + 1.0, math.inf, -math.inf, 0.0])
    counts = mtc.bin_counts(values, bins)
    # exactly-at-threshold values fall in the lower bin (half-open intervals)
    assert counts.counts.tolist() == [2, 1]
    assert counts.counts.sum() + counts.remainder == 6
    rng = np.random.default_rng(4)
    for _ in range(25):
        values = rng.standard_normal(6) * 3
        counts = mtc.bin_counts(values, bins)
        assert counts.counts.sum() + counts.remainder == 6


def test_bin_counts_multinomial_chi_square():
    # independent panels: (Q_1..Q_k, remainder) is multinomial; chi-square
    # GOF against the exact per-bin probabilities at the 1% level
    p, n, k, reps = 50, 50, 3, 10_000
    exact = mtc.StudentizedNormalMarginal(n)
    bins = mtc.bin_thresholds(p, 1.0, k, exact)
    rng = np.random.default_rng(314)
    totals = np.zeros(k + 1)
    for _ in range(reps):
        rows = stu.studentize_panel(rng.standard_normal((p, n)))
        counts = mtc.bin_counts(rows.t, bins)
        totals[:k] += counts.counts
        totals[k] += counts.remainder
    cell_p = np.array([1.0 / p] * k + [1.0 - k / p])
    expected = reps * p * cell_p
    chi2 = float(((totals - expected) ** 2 / expected).sum())
    assert chi2 < st.chi2(k).ppf(0.99)


def test_bh_worked_example():
    report = mtc.bh_fdr(np.array([0.001, 0.02, 0.03, 0.9]), 0.05)
    assert report.rejected.tolist() == [1, 2, 3]
    assert report.kind == "bh"


def test_bh_trivials():
    assert mtc.bh_fdr(np.ones(5), 0.05).rejected.size == 0
    assert mtc.bh_fdr(np.array([0.03]), 0.05).rejected.tolist() == [1]
    assert mtc.bh_fdr(np.array([0.08]), 0.05).rejected.size == 0


def test_bh_monotone_in_q():
    rng = np.random.default_rng(6)
    for _ in range(20):
        pv = rng.random(60) ** 2
        small = set(mtc.bh_fdr(pv, 0.02).rejected.tolist())
        large = set(mtc.bh_fdr(pv, 0.2).rejected.tolist())
        assert small <= large


def test_bh_input_validation():
    with pytest.raises(ValueError):
        mtc.bh_fdr(np.array([0.5, 1.5]), 0.05)
    with pytest.raises(ValueError):
        mtc.bh_fdr(np.array([0.5]), 0.0)


def test_joint_exceedance_product():
    assert mtc.joint_exceedance_prob(0.01, 2) == pytest.approx(1e-4, rel=1e-12)
    assert mtc.joint_exceedance_prob(0.3, 1) == 0.3


def test_stepdown_single_extreme():
    # one extreme statistic, the rest tiny: exactly one rejection whenever
    # the level covers its marginal p-value
    values = np.array([9.0, -2.0, -1.5, -3.0])
    marginal = mtc.StudentTMarginal(9)
    p_extreme = float(marginal.sf(9.0))
    for a in (0.05, 0.2, 0.5):
        report = mtc.stepdown_fwer(values, a, marginal=marginal)
        if a >= p_extreme:
            assert report.rejected.tolist() == [1]
        else:
            assert report.rejected.size == 0


def test_stepdown_dominates_bonferroni():
    rng = np.random.default_rng(8)
    marginal = mtc.StudentTMarginal(19)
    for _ in range(20):
        pv = rng.random(40) ** 3
        a = 0.1
        stepdown = set(mtc.stepdown_fwer(pv, a).rejected.tolist())
        bonferroni = {i + 1 for i, v in enumerate(pv) if v <= a / pv.size}
        assert bonferroni <= stepdown


def test_stepdown_critical_values_are_independence_products():
    # stage-k critical value solves 1 - (1 - u)^(m-k+1) = a
    m, a = 7, 0.1
    pv = np.full(m, 0.5)
    pv[0] = 1e-9
    report = mtc.stepdown_fwer(pv, a)
    u1 = 1.0 - (1.0 - a) ** (1.0 / m)
    assert report.rejected.tolist() == [1]
    pv[0] = u1 * 1.0000001
    assert mtc.stepdown_fwer(pv, a).rejected.size == 0


def test_stepdown_rejects_unknown_joint_model():
    with pytest.raises(ValueError):
        mtc.stepdown_fwer(np.array([0.5]), 0.05, joint_model="copula")


def test_degenerate_statistics_flow_through():
    values = np.array([math.inf, -math.inf, 1.0])
    pv = mtc.one_sided_p_values(values, mtc.StudentTMarginal(9))
    assert pv[0] == 0.0 and pv[1] == 1.0
    assert 0.0 < pv[2] < 1.0
    report = mtc.bh_fdr(pv, 0.05)
    assert 1 in report.rejected.tolist()


def test_single_threshold_and_truth_annotation():
    values = np.array([3.0, 0.5, 4.0, -1.0])
    report = mtc.single_threshold(values, 2.0, nonnull=[3], gamma=1.225)
    assert report.rejected.tolist() == [1, 3]
    assert report.false_rejections == 1
    assert report.fdp == 0.5
    assert report.phi_nominal is not None


def test_realized_error_rates_never_rejecting():
    reports = [
        mtc.single_threshold(np.zeros(5), 10.0, nonnull=[]) for _ in range(20)
    ]
    summary = mtc.realized_error_rates(reports)
    assert summary.fwer == 0.0 and summary.fdr == 0.0
    assert summary.mean_rejections == 0.0


def test_realized_error_rates_requires_truth():
    report = mtc.single_threshold(np.array([5.0]), 1.0)
    with pytest.raises(ValueError, match="truth"):
        mtc.realized_error_rates([report])


def test_single_threshold_fwer_matches_binomial_reference():
    # all-null iid normal panels: FWER of the single-threshold rule equals
    # the analytic any-exceedance probability at the exact marginal level
    p, n, reps = 200, 50, 3000
    marginal = mtc.StudentizedNormalMarginal(n)
    t = marginal.upper_quantile(0.0005)
    rng = np.random.default_rng(2718)
    reports = []
    for _ in range(reps):
        rows = stu.studentize_panel(rng.standard_normal((p, n)))
        reports.append(mtc.single_threshold(rows.t, t, nonnull=[]))
    summary = mtc.realized_error_rates(reports)
    want = any_exceedence_prob(p, 0.0005)
    lo, hi = summary.fwer_wilson
    assert lo <= want <= hi


def test_stepdown_fwer_on_dependent_null_panels():
    # dependent all-null panels at levels above the admissible floor keep
    # the realized FWER within the nominal level plus noise
    spec = pg.PanelSpec(
        p=300, n=100, model=pg.DependenceModel.gaussian_kdep((0.1, 0.05)),
        law=pg.InnovationLaw.normal(), seed=55,
    )
    marginal = mtc.StudentTMarginal(spec.n - 1)
    a = 0.05
    reps = 1500
    hits = 0
    for rep in range(reps):
        rows = stu.studentize_panel(pg.generate(spec.with_replicate(rep)))
        report = mtc.stepdown_fwer(rows.t, a, marginal=marginal, nonnull=[])
        hits += 1 if report.false_rejections > 0 else 0
    fwer = hits / reps
    se = math.sqrt(a * (1 - a) / reps)
    assert fwer <= a + 4.0 * se


def test_empirical_marginal():
    samples = np.linspace(-3, 3, 10_001)
    marginal = mtc.EmpiricalMarginal.from_samples(samples)
    assert marginal.sf(0.0) == pytest.approx(0.5, abs=1e-3)
    q = marginal.upper_quantile(0.1)
    assert marginal.sf(q - 1e-9) == pytest.approx(0.1, abs=1e-3)


def test_studentized_normal_marginal_is_exact():
    # against direct simulation: the sf of the divisor-n statistic
    n = 20
    marginal = mtc.StudentizedNormalMarginal(n)
    rng = np.random.default_rng(777)
    rows = stu.studentize_panel(rng.standard_normal((200_000, n)))
    for x in (1.0, 2.0, 2.8):
        emp = float((rows.t > x).mean())
        se = math.sqrt(emp * (1 - emp) / 200_000)
        assert abs(float(marginal.sf(x)) - emp) < 4.0 * se
    q = marginal.upper_quantile(0.01)
    assert float(marginal.sf(q)) == pytest.approx(0.01, rel=1e-9)


def test_decision_report_serialization():
    report = mtc.bh_fdr(np.array([0.001, 0.9]), 0.05, nonnull=[1])
    payload = report.to_json_dict()
    assert payload["rejected"] == [1]
    assert payload["false_rejections"] == 0
    assert payload["schema_version"].startswith("exceedlab.")
