import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kleingrowth.asymptotics import (
    REGIME_CANDIDATES,
    AsymptoticModel,
    beta_index,
    classify_regime,
    convolution_check,
    fit_series,
    gamma_product,
    return_sequence_model,
    wandering_rate_model,
)
from kleingrowth.errors import BeardonBoundError, InsufficientDataError, UsageError
from oracles import convolution_ratio_direct, mp_return_sequence

# (r_max, delta) grid with delta > r_max / 2 + 0.05
GRID = [(r, round(r / 2 + 0.05 * k, 10)) for r in (1, 2) for k in range(1, 30)]


def test_beta_examples():
    assert beta_index(1.0, 1) == 0.0
    assert beta_index(0.8, 1) == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(BeardonBoundError, match="0.5"):
        beta_index(0.4, 1)
    with pytest.raises(BeardonBoundError):
        beta_index(0.5, 1)
    with pytest.raises(UsageError):
        beta_index(1.0, 0)


def test_wandering_rate_examples():
    assert wandering_rate_model(0.8, 1, 100) == pytest.approx(100**0.4, rel=1e-14)
    assert wandering_rate_model(0.8, 1, 100) == pytest.approx(6.3096, abs=1e-4)
    assert wandering_rate_model(1.0, 1, math.e**2) == pytest.approx(2.0, rel=1e-15)
    for n in (2, 17, 1e6):
        assert wandering_rate_model(1.2, 1, n) == 1.0
    with pytest.raises(UsageError):
        wandering_rate_model(1.2, 1, 1)


def test_return_sequence_examples():
    for n in (2, 10, 1000):
        assert return_sequence_model(1.2, 1, n) == n
    assert return_sequence_model(1.0, 1, 1000) == pytest.approx(1000 / math.log(1000), rel=1e-14)
    assert return_sequence_model(1.0, 1, 1000) == pytest.approx(144.76, abs=0.01)
    assert return_sequence_model(0.8, 1, 1000) == pytest.approx(79.59, abs=0.01)
    assert return_sequence_model(0.8, 1, 1000) == pytest.approx(float(mp_return_sequence(0.8, 1, 1000)), rel=1e-13)


def test_gamma_product_against_mpmath():
    for beta in np.linspace(0.0, 0.999, 200):
        ref = mpmath.gamma(1 + beta) * mpmath.gamma(2 - beta)
        assert gamma_product(float(beta)) == pytest.approx(float(ref), rel=1e-13)
    assert gamma_product(0.4) == pytest.approx(0.88726 * 0.89352, rel=1e-4)


def test_classify_examples():
    b = classify_regime(1.0, 1)
    assert b.regime == "boundary" and b.boundary_flag and b.predicted_family == "n_over_log"
    p = classify_regime(0.8, 1)
    assert p.regime == "polynomial" and p.predicted_exponent == pytest.approx(0.6, abs=1e-15)
    assert not p.boundary_flag
    q = classify_regime(1.4, 2)
    assert q.regime == "polynomial" and q.predicted_exponent == pytest.approx(0.8, abs=1e-15)
    assert classify_regime(1.3, 1).regime == "linear"
    with pytest.raises(BeardonBoundError):
        classify_regime(0.4, 1)


def test_boundary_tolerance_reports_adjacent_families():
    near = classify_regime(0.995, 1)
    assert near.boundary_flag and near.regime == "boundary"
    assert "n_over_log" in near.candidate_families and len(near.candidate_families) > 1
    exact = classify_regime(0.995, 1, epsilon=0.0)
    assert exact.regime == "polynomial" and not exact.boundary_flag


def test_regime_exponent_limit():
    # the polynomial exponent 2 delta - r_max tends to 1 at the boundary
    for r in (1, 2):
        for eps in (1e-3, 1e-6, 1e-9):
            rep = classify_regime((r + 1) / 2 - eps, r, epsilon=0.0)
            assert rep.regime == "polynomial"
            assert abs(rep.predicted_exponent - 1) <= 2 * eps + 1e-15


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 2), st.floats(0.001, 2.0))
def test_beta_regime_equivalence(r, excess):
    delta = r / 2 + excess
    beta = beta_index(delta, r)
    regime = classify_regime(delta, r, epsilon=0.0).regime
    assert 0.0 <= beta < 1.0
    assert (beta == 0.0) == (regime in ("boundary", "linear"))
    assert (0.0 < beta < 1.0) == (regime == "polynomial")


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 2), st.floats(0.001, 2.0), st.integers(2, 10**6))
def test_nu_times_w_identity(r, excess, n):
    delta = r / 2 + excess
    beta = beta_index(delta, r)
    prod = return_sequence_model(delta, r, n) * wandering_rate_model(delta, r, n)
    assert prod == pytest.approx(n / gamma_product(beta), rel=1e-12)


def test_convolution_examples():
    for delta, r in ((0.8, 1), (1.2, 1), (1.4, 2)):
        tab = convolution_check(delta, r, 10)
        nu2 = return_sequence_model(delta, r, 2)
        assert tab.ratio[0] == pytest.approx((nu2 + 2 ** (r - 1 - 2 * delta)) / nu2, rel=1e-14)
    tab = convolution_check(0.8, 1, 10_000)
    lo, hi = tab.band(10)
    assert 1 <= lo and hi < 3
    for n in (10, 100, 1000, 5000):
        assert tab.ratio[n - 2] == pytest.approx(convolution_ratio_direct(0.8, 1, n), rel=1e-10)
    lin = convolution_check(1.2, 1, 10_000)
    # ratio tends to 1 + sum_{k >= 2} k^(-2.4)
    limit = 1 + float(mpmath.zeta(2.4)) - 1
    assert lin.ratio[-1] == pytest.approx(limit, rel=2e-3)
    with pytest.raises(UsageError):
        convolution_check(0.8, 1, 7)


@pytest.mark.parametrize("r,delta", GRID)
def test_convolution_bounded_on_grid(r, delta):
    lo, hi = convolution_check(delta, r, 10_000).band(10)
    # band frozen from the first run: over the grid the ratio stays in [1.06, 6.54]
    assert 1.0 <= lo and hi <= 7.0


def test_model_families_nondecreasing():
    for m in REGIME_CANDIDATES[1:] + (AsymptoticModel("power", 0.6), AsymptoticModel("power", 0.0)):
        # n / log n has its minimum at n = e, so integer monotonicity starts at n = 3
        n = np.arange(3 if m.family == "n_over_log" else 2, 2000)
        v = m(n)
        assert m.nondecreasing
        assert np.all(v > 0) and np.all(np.diff(v) >= -1e-12 * v[1:])
    nol = AsymptoticModel("n_over_log")
    assert nol(3) < nol(2)
    assert not AsymptoticModel("inverse_log").nondecreasing
    with pytest.raises(UsageError):
        AsymptoticModel("quadratic")
    with pytest.raises(UsageError):
        AsymptoticModel("log", 0.5)


def test_fit_series_examples():
    n = np.arange(8, 4097)
    fit = fit_series({int(k): k**0.6 for k in n})
    assert fit.best_family == "power"
    assert fit.best.slope == pytest.approx(0.6, abs=1e-9)
    fit = fit_series({int(k): k / math.log(k) for k in n})
    assert fit.best_family == "n_over_log"
    res = fit.residuals
    assert res["n_over_log"] < res["power"] and res["n_over_log"] < res["linear"]
    fit = fit_series({int(k): 3.5 for k in n})
    assert fit.best_family == "constant"
    assert all(r >= 0 for r in fit.residuals.values())
    assert fit.residuals[fit.best_family] <= min(fit.residuals.values()) + 1e-12


def test_fit_series_preconditions():
    with pytest.raises(InsufficientDataError):
        fit_series({n: n for n in range(2, 7)})
    with pytest.raises(InsufficientDataError):
        fit_series({n: n for n in range(10, 30)})
    with pytest.raises(InsufficientDataError):
        fit_series({n: -1.0 for n in range(2, 20)})
    fit_series({n: n for n in range(10, 31)}, min_span=3.0)


def test_fit_ratio_bands():
    fit = fit_series({n: 2.0 * n / math.log(n) for n in range(4, 200)})
    lo, hi = fit.fits["n_over_log"].ratio_band
    assert lo == pytest.approx(2.0) and hi == pytest.approx(2.0)


@pytest.mark.parametrize("r,delta", GRID[::3] + [(1, 1.0), (2, 1.5)])
def test_fit_recovers_regime_family(r, delta):
    n = range(8, 4097)
    fit = fit_series({k: return_sequence_model(delta, r, k) for k in n})
    regime = classify_regime(delta, r, epsilon=0.0).regime
    # nu_n grows like n^(2 delta - r_max), n / log n, or n
    expected = {"polynomial": "power", "boundary": "n_over_log", "linear": "linear"}[regime]
    assert fit.best_family == expected
    if regime == "polynomial":
        assert fit.best.slope == pytest.approx(2 * delta - r, abs=1e-9)
