"""Special function and calibration calculus tests.

Reference values come from independent oracles computed in the tests:
mpmath for the normal distribution, bisection against our own CDFs for
quantiles, closed forms (Cauchy, orthant probability, products of tails)
and scipy as a cross-library check.
"""

import math

import mpmath
import numpy as np
import pytest
import scipy.stats as st
from scipy.integrate import quad

from exceedlab import numerics as nm


def test_normal_cdf_center_and_symmetry():
    assert nm.normal_cdf(0.0) == 0.5
    for x in (0.3, 1.7, 4.2):
        assert nm.normal_cdf(-x) == pytest.approx(1.0 - nm.normal_cdf(x), abs=1e-15)


def test_normal_cdf_against_mpmath():
    for x in np.linspace(-8.0, 8.0, 81):
        want = float(mpmath.ncdf(float(x)))
        assert abs(nm.normal_cdf(float(x)) - want) < 1e-12


def test_normal_cdf_975_point():
    assert nm.normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)


def test_normal_quantile_tail_point_vs_bisection_oracle():
    # Bisection oracle on our own cdf, independent of the Newton path.
    u = 1.0 - 1e-6
    lo, hi = 0.0, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if nm.normal_cdf(mid) < u:
            lo = mid
        else:
            hi = mid
    oracle = 0.5 * (lo + hi)
    got = nm.normal_quantile(u)
    assert got == pytest.approx(oracle, abs=1e-9)
    assert got == pytest.approx(4.753424, abs=1e-4)


def test_normal_quantile_edges_and_roundtrip():
    assert nm.normal_quantile(0.0) == -math.inf
    assert nm.normal_quantile(1.0) == math.inf
    with pytest.raises(ValueError):
        nm.normal_quantile(-0.1)
    grid = np.concatenate([np.geomspace(1e-8, 0.5, 30), 1 - np.geomspace(1e-8, 0.4, 30)])
    for u in grid:
        x = nm.normal_quantile(float(u))
        assert abs(nm.normal_cdf(x) - u) < 1e-9


def test_student_t_cdf_center():
    for df in (1, 2, 10, 99, 1000):
        assert nm.student_t_cdf(0.0, df) == 0.5


def test_student_t_cdf_cauchy_closed_form():
    for x in np.linspace(-30, 30, 121):
        want = 0.5 + math.atan(float(x)) / math.pi
        assert abs(nm.student_t_cdf(float(x), 1) - want) < 1e-12


def test_student_t_dual_paths_agree():
    xs = np.linspace(-9.0, 9.0, 2001)
    for df in (1, 2, 10, 99, 1000):
        gap = nm.student_t_dual_gap(xs, df)
        assert float(np.max(gap)) < 1e-10


def test_student_t_cdf_against_scipy():
    xs = np.linspace(-9.0, 9.0, 501)
    for df in (1, 3, 25, 99, 400):
        assert np.max(np.abs(nm.student_t_cdf(xs, df) - st.t.cdf(xs, df))) < 1e-11


def test_student_t_quantile_paper_level():
    got = nm.student_t_quantile(1.0 - 1e-6, 99)
    assert got == pytest.approx(5.052, abs=1e-3)


def test_student_t_quantile_roundtrip():
    grid = np.concatenate([np.geomspace(1e-8, 0.5, 20), 1 - np.geomspace(1e-8, 0.4, 20)])
    for df in (1, 2, 10, 99, 1000):
        for u in grid:
            x = nm.student_t_quantile(float(u), df)
            assert abs(nm.student_t_cdf(x, df) - u) < 1e-9


def test_student_t_rejects_bad_df_and_levels():
    with pytest.raises(ValueError):
        nm.student_t_cdf(1.0, 0.5)
    with pytest.raises(ValueError):
        nm.student_t_quantile(0.0, 10)
    with pytest.raises(ValueError):
        nm.student_t_quantile(1.0, 10)


def test_student_t_converges_to_normal():
    xs = np.linspace(-8.0, 8.0, 401)
    gap = np.abs(nm.student_t_cdf(xs, 1e6) - np.array([nm.normal_cdf(float(x)) for x in xs]))
    assert float(gap.max()) < 1e-5


def test_student_t_sf_deep_tail():
    # sf computed tail-first: no 1 - cdf cancellation even at 1e-60 levels
    assert nm.student_t_sf(40.0, 99) == pytest.approx(float(st.t.sf(40.0, 99)), rel=1e-10)


def test_bivariate_tail_quadrant():
    assert nm.bivariate_normal_tail(0.0, 0.0) == pytest.approx(0.25, abs=1e-14)


def test_bivariate_tail_orthant_closed_form():
    for rho in (-0.95, -0.5, -0.1, 0.2, 0.6, 0.9, 0.999):
        want = 0.25 + math.asin(rho) / (2.0 * math.pi)
        assert abs(nm.bivariate_normal_tail(0.0, rho) - want) < 1e-12


def test_bivariate_tail_independent_product():
    want = nm.normal_sf(2.0) ** 2
    assert nm.bivariate_normal_tail(2.0, 0.0) == pytest.approx(want, abs=1e-14)


def test_bivariate_tail_against_quadrature_oracle():
    # Independent double-integral oracle over the conditional tail.
    def oracle(s, rho):
        rr = math.sqrt(1.0 - rho * rho)

        def integrand(z):
            return nm.normal_pdf(z) * nm.normal_sf((s - rho * z) / rr)

        val, _ = quad(integrand, s, math.inf, epsabs=1e-14, limit=300)
        return val

    for s, rho in ((1.0, 0.3), (2.5, 0.5), (3.0, -0.4), (0.5, 0.85)):
        assert nm.bivariate_normal_tail(s, rho) == pytest.approx(
            oracle(s, rho), abs=1e-12
        )


def test_bivariate_tail_monotone_in_rho_and_guards():
    values = [nm.bivariate_normal_tail(1.5, r) for r in np.linspace(-0.9, 0.9, 19)]
    assert all(b > a for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        nm.bivariate_normal_tail(1.0, 1.0)
    with pytest.raises(ValueError):
        nm.bivariate_normal_tail(-0.5, 0.0)


def test_dependence_summary_worked_values():
    s = nm.dependence_summary(0.1)
    assert s.alpha == 0.225
    assert s.gamma == 1.225
    s0 = nm.dependence_summary(0.0)
    assert s0.alpha == 0.25 and s0.gamma == 1.25


def test_dependence_summary_limit_and_rejection():
    s = nm.dependence_summary(1.0 - 1e-12)
    assert 0.0 < s.alpha < 1e-12
    assert 1.0 < s.gamma < 1.0 + 1e-12
    with pytest.raises(ValueError):
        nm.dependence_summary(1.0)
    with pytest.raises(ValueError):
        nm.dependence_summary(-0.2)


def test_threshold_regime_arithmetic():
    t = nm.threshold_regime(10**6, 0.0, 1.225)
    assert t.t_min == pytest.approx(math.sqrt(2.0 * math.log(1e6) / 1.225), rel=1e-14)
    # gamma = 1 reduces to the classical extreme level
    t1 = nm.threshold_regime(10**6, 0.0, 1.0)
    assert t1.t_min == pytest.approx(math.sqrt(2.0 * math.log(1e6)), rel=1e-14)


def test_threshold_regime_eta_solves_worked_level():
    base = nm.threshold_regime(10**6, 0.0, 1.225).t_min
    eta = 5.052 / base - 1.0
    assert eta == pytest.approx(0.064, abs=1e-3)
    assert nm.threshold_regime(10**6, eta, 1.225).t_min == pytest.approx(5.052, abs=1e-12)


def test_threshold_regime_monotonicity_and_refinement():
    assert nm.threshold_regime(10**7, 0.0, 1.2).t_min > nm.threshold_regime(10**6, 0.0, 1.2).t_min
    assert nm.threshold_regime(10**6, 0.1, 1.2).t_min > nm.threshold_regime(10**6, 0.0, 1.2).t_min
    assert nm.threshold_regime(10**6, 0.0, 1.25).t_min < nm.threshold_regime(10**6, 0.0, 1.2).t_min
    ma = nm.threshold_regime(10**6, 0.0, 1.225, variant="moving-average", loglog_coeff=3.0)
    want = math.sqrt(2.0 * (math.log(1e6) + 3.0 * math.log(math.log(1e6))) / 1.225)
    assert ma.t_refined == pytest.approx(want, rel=1e-14)
    with pytest.raises(ValueError):
        nm.threshold_regime(1, 0.0, 1.2)
    with pytest.raises(ValueError):
        nm.threshold_regime(100, 0.0, 0.9)


def test_phi_bound_worked_value():
    b = nm.phi_bound(5.052, 10**5, 1.225)
    first = math.exp(-0.25 * 5.052**2)
    second = 10**5 * math.exp(-0.5 * 1.225 * 5.052**2)
    assert first == pytest.approx(0.00169, abs=2e-5)
    assert second == pytest.approx(0.0163, abs=1e-4)
    assert b.phi_nominal == first + second
    assert b.phi_nominal == pytest.approx(0.0180, abs=2e-4)
    ratio = b.phi_nominal / 0.09516
    assert 0.17 < ratio < 0.21


def test_phi_bound_monotonicity():
    ts = np.linspace(2.0, 9.0, 15)
    vals = [nm.phi_bound(float(t), 10**5, 1.225).phi_nominal for t in ts]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    ps = [10**3, 10**4, 10**5, 10**6]
    vals = [nm.phi_bound(5.0, p, 1.225).phi_nominal for p in ps]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    gs = [1.0, 1.1, 1.2, 1.25]
    vals = [nm.phi_bound(5.0, 10**5, g).phi_nominal for g in gs]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert nm.phi_bound(40.0, 10**6, 1.225).phi_nominal < 1e-80


def test_any_exceedence_prob_worked_values():
    assert nm.any_exceedence_prob(10**4, 1e-6) == pytest.approx(0.00995, abs=5e-6)
    assert nm.any_exceedence_prob(10**5, 1e-6) == pytest.approx(0.09516, abs=5e-6)
    assert nm.any_exceedence_prob(10**6, 1e-6) == pytest.approx(0.63212, abs=5e-6)


def test_any_exceedence_prob_edges_and_stability():
    assert nm.any_exceedence_prob(10, 0.0) == 0.0
    assert nm.any_exceedence_prob(10, 1.0) == 1.0
    # tiny q at large p keeps full precision through log1p/expm1:
    # high-precision oracle for 1 - (1 - 1e-12)^(1e9)
    with mpmath.workdps(50):
        want = float(1 - (1 - mpmath.mpf("1e-12")) ** (10**9))
    assert nm.any_exceedence_prob(10**9, 1e-12) == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        nm.any_exceedence_prob(0, 0.5)
    with pytest.raises(ValueError):
        nm.any_exceedence_prob(10, 1.5)


def test_phi_over_any_exceedence_vanishes_along_matched_levels():
    # Along levels t with 1 - Phi(t) = 1/p the relative error shrinks to zero.
    gamma = 1.225
    ratios = []
    for k in range(3, 10):
        p = 10**k
        t = nm.normal_quantile(1.0 - 1.0 / p)
        phi = nm.phi_bound(t, p, gamma).phi_nominal
        ratios.append(phi / nm.any_exceedence_prob(p, 1.0 / p))
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] < 0.1 * ratios[0]


def test_betainc_methods_reject_bad_input():
    with pytest.raises(ValueError):
        nm.betainc_reg(0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        nm.betainc_reg(1.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        nm.betainc_reg(1.0, 1.0, 0.5, method="magic")


def test_nan_propagates():
    assert math.isnan(nm.betainc_reg(2.0, 3.0, math.nan))
    assert math.isnan(nm.student_t_cdf(math.nan, 10))
