"""Closed-form growth models for the three orbit-growth regimes, and fitting.

With ``beta = max(0, 1 + r_max - 2 delta)`` the wandering rate is
``n^(1 + r_max - 2 delta)``, ``log n`` or ``1`` (polynomial, boundary and
linear regime), and the return sequence is
``nu_n = n / (Gamma(1 + beta) Gamma(2 - beta) w_n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import BeardonBoundError, InsufficientDataError, UsageError

POLYNOMIAL = "polynomial"
BOUNDARY = "boundary"
LINEAR = "linear"

#: Default half-width on ``2 delta - (r_max + 1)`` inside which the boundary regime is reported.
BOUNDARY_EPS = 0.02


def _check(delta: float, r_max: int) -> None:
    if not isinstance(r_max, (int, np.integer)) or r_max < 1:
        raise UsageError(f"r_max must be a positive integer, got {r_max!r}")
    if not math.isfinite(delta) or not delta > r_max / 2:
        raise BeardonBoundError(delta, r_max)


def _regime(delta: float, r_max: int, eps: float = 0.0) -> str:
    gap = 2 * delta - (r_max + 1)
    if gap == 0 or abs(gap) < eps:
        return BOUNDARY
    return POLYNOMIAL if gap < 0 else LINEAR


def beta_index(delta: float, r_max: int) -> float:
    _check(delta, r_max)
    return max(0.0, 1.0 + r_max - 2.0 * delta)


def _as_n(n):
    arr = np.asarray(n, dtype=float)
    if np.any(~(arr >= 2)):
        raise UsageError("growth models are evaluated at n >= 2")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def wandering_rate_model(delta: float, r_max: int, n):
    """``w_n`` up to a constant; accepts a scalar or an array of ``n >= 2``."""
    _check(delta, r_max)
    arr = _as_n(n)
    regime = _regime(delta, r_max)
    if regime == POLYNOMIAL:
        w = arr ** (1.0 + r_max - 2.0 * delta)
    elif regime == BOUNDARY:
        w = np.log(arr)
    else:
        w = np.ones_like(arr)
    return _out(w)


def gamma_product(beta: float) -> float:
    """``Gamma(1 + beta) Gamma(2 - beta)``."""
    return math.gamma(1.0 + beta) * math.gamma(2.0 - beta)


def return_sequence_model(delta: float, r_max: int, n):
    """``nu_n = n / (Gamma(1 + beta) Gamma(2 - beta) w_n)``."""
    beta = beta_index(delta, r_max)
    arr = _as_n(n)
    w = np.asarray(wandering_rate_model(delta, r_max, arr))
    return _out(arr / (gamma_product(beta) * w))


@dataclass(frozen=True)
class RegimeReport:
    delta: float
    r_max: int
    beta: float
    regime: str
    predicted_exponent: float
    boundary_flag: bool
    predicted_family: str
    # families worth reporting; adjacent ones are included near the boundary
    candidate_families: tuple = field(default=())

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "r_max": self.r_max,
            "beta": self.beta,
            "regime": self.regime,
            "predicted_exponent": self.predicted_exponent,
            "boundary_flag": self.boundary_flag,
            "predicted_family": self.predicted_family,
            "candidate_families": list(self.candidate_families),
        }


def classify_regime(delta: float, r_max: int, epsilon: float = BOUNDARY_EPS) -> RegimeReport:
    """Growth regime of ``P_n`` at the critical exponent.

    ``P_n`` grows like ``n^(2 delta - r_max)`` below the boundary, like
    ``n / log n`` on it and like ``n`` above it.
    """
    _check(delta, r_max)
    if epsilon < 0:
        raise UsageError("epsilon must be nonnegative")
    beta = beta_index(delta, r_max)
    regime = _regime(delta, r_max, epsilon)
    flag = abs(2 * delta - (r_max + 1)) < epsilon or regime == BOUNDARY
    exact = _regime(delta, r_max)
    exponent = 2.0 * delta - r_max if exact == POLYNOMIAL else 1.0
    family = {POLYNOMIAL: f"power({exponent:.17g})", BOUNDARY: "n_over_log", LINEAR: "linear"}[regime]
    candidates = [family]
    if flag:
        for extra in (f"power({min(exponent, 1.0):.17g})", "n_over_log", "linear"):
            if extra not in candidates:
                candidates.append(extra)
    return RegimeReport(delta, r_max, beta, regime, exponent, flag, family, tuple(candidates))


@dataclass(frozen=True)
class ConvolutionTable:
    delta: float
    r_max: int
    n: np.ndarray
    ratio: np.ndarray

    def band(self, n_min: int = 10) -> tuple[float, float]:
        sel = self.ratio[self.n >= n_min]
        return float(sel.min()), float(sel.max())


def return_sequence_with_origin(delta: float, r_max: int, n_max: int) -> np.ndarray:
    """``nu_0 .. nu_{n_max}`` with ``nu_0 = nu_1 = 1``."""
    nu = np.ones(n_max + 1)
    if n_max >= 2:
        nu[2:] = return_sequence_model(delta, r_max, np.arange(2, n_max + 1))
    return nu


def convolution_check(delta: float, r_max: int, n_max: int) -> ConvolutionTable:
    """``ratio(n) = (nu_n + sum_{k=2}^n k^(r_max - 1 - 2 delta) nu_{n-k}) / nu_n`` for ``2 <= n <= n_max``."""
    _check(delta, r_max)
    if n_max < 8:
        raise UsageError("convolution_check needs n_max >= 8")
    nu = return_sequence_with_origin(delta, r_max, n_max)
    kernel = np.zeros(n_max + 1)
    k = np.arange(2, n_max + 1, dtype=float)
    kernel[2:] = k ** (r_max - 1.0 - 2.0 * delta)
    conv = np.convolve(nu, kernel)[: n_max + 1]
    n = np.arange(2, n_max + 1)
    return ConvolutionTable(delta, r_max, n, (nu[2:] + conv[2:]) / nu[2:])


_FAMILIES = ("power", "n_over_log", "linear", "log", "constant", "inverse_log")
_NONDECREASING = {"n_over_log", "linear", "log", "constant"}


@dataclass(frozen=True)
class AsymptoticModel:
    """Unit-scale growth family; ``power`` with ``alpha=None`` has a fitted exponent.

    ``inverse_log`` and negative-exponent powers are decreasing; they exist for
    sum-level measures, not for orbit growth. ``n_over_log`` is nondecreasing
    on integers from ``n = 3`` (its minimum is at ``n = e``).
    """

    family: str
    alpha: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise UsageError(f"unknown model family {self.family!r}")
        if self.alpha is not None and self.family != "power":
            raise UsageError("only the power family takes an exponent")

    @property
    def name(self) -> str:
        if self.family == "power" and self.alpha is not None:
            return f"power({self.alpha:.6g})"
        return self.family

    @property
    def free_parameters(self) -> int:
        return 2 if self.family == "power" and self.alpha is None else 1

    @property
    def nondecreasing(self) -> bool:
        if self.family == "power":
            return self.alpha is not None and self.alpha >= 0
        return self.family in _NONDECREASING

    def log_shape(self, n: np.ndarray, alpha: float | None = None) -> np.ndarray:
        """``log f(n)`` for the unit-scale model."""
        ln = np.log(np.asarray(n, dtype=float))
        if self.family == "power":
            a = self.alpha if alpha is None else alpha
            if a is None:
                raise UsageError("power model needs an exponent to be evaluated")
            return a * ln
        return {
            "n_over_log": ln - np.log(ln),
            "linear": ln,
            "log": np.log(ln),
            "constant": np.zeros_like(ln),
            "inverse_log": -np.log(ln),
        }[self.family]

    def __call__(self, n, alpha: float | None = None):
        arr = _as_n(n)
        return _out(np.exp(self.log_shape(arr, alpha)))


#: Families used to tell the three orbit-growth regimes apart.
REGIME_CANDIDATES = (
    AsymptoticModel("power"),
    AsymptoticModel("n_over_log"),
    AsymptoticModel("linear"),
    AsymptoticModel("log"),
    AsymptoticModel("constant"),
)


@dataclass(frozen=True)
class CandidateFit:
    model: AsymptoticModel
    residual: float
    log_scale: float
    slope: float | None
    slope_stderr: float | None
    # min and max of value / f(n) over the data
    ratio_band: tuple


@dataclass(frozen=True)
class FitResult:
    best_family: str
    fits: dict
    n: tuple

    @property
    def best(self) -> CandidateFit:
        return self.fits[self.best_family]

    @property
    def residuals(self) -> dict:
        return {k: f.residual for k, f in self.fits.items()}


def fit_series(
    series: Mapping[int, float],
    candidates: Sequence[AsymptoticModel] = REGIME_CANDIDATES,
    *,
    tie_tol: float = 1e-12,
    min_span: float = 4.0,
) -> FitResult:
    """Least-squares fit of ``log value = log c + log f(n)`` for each candidate.

    The residual of a candidate is its residual standard error
    ``sqrt(RSS / (N - p))`` in log coordinates, ``p`` being its number of free
    parameters. ``min_span`` is the smallest accepted ratio ``max n / min n``.
    Candidates within ``tie_tol`` of the smallest residual are
    tied, and the tie goes to the one with fewer parameters, then to the
    earlier one in ``candidates``.
    """
    if not candidates:
        raise UsageError("fit_series needs at least one candidate")
    keys = sorted(series)
    n = np.array(keys, dtype=float)
    y = np.array([series[k] for k in keys], dtype=float)
    if len(n) < 6:
        raise InsufficientDataError(f"fit_series needs >= 6 points, got {len(n)}")
    if n[0] < 2 or n[-1] < min_span * n[0]:
        raise InsufficientDataError(
            f"n must span a factor >= {min_span:g} starting at n >= 2, got [{n[0]:g}, {n[-1]:g}]"
        )
    if np.any(~(y > 0)) or not np.all(np.isfinite(y)):
        raise InsufficientDataError("fit_series needs finite positive values")
    ly = np.log(y)
    ln = np.log(n)
    fits = {}
    for model in candidates:
        slope = stderr = None
        if model.family == "power" and model.alpha is None:
            reg = stats.linregress(ln, ly)
            slope, stderr = float(reg.slope), float(reg.stderr)
            shape = model.log_shape(n, slope)
            log_c = float(reg.intercept)
        else:
            shape = model.log_shape(n)
            log_c = float(np.mean(ly - shape))
        resid = ly - log_c - shape
        dof = len(n) - model.free_parameters
        rse = math.sqrt(float(np.dot(resid, resid)) / dof)
        ratio = np.exp(ly - shape)
        if model.name in fits:
            raise UsageError(f"duplicate candidate {model.name}")
        fits[model.name] = CandidateFit(model, rse, log_c, slope, stderr, (float(ratio.min()), float(ratio.max())))
    lowest = min(f.residual for f in fits.values())
    tied = [name for name, f in fits.items() if f.residual <= lowest + tie_tol]
    best = min(tied, key=lambda name: fits[name].model.free_parameters)
    return FitResult(best, fits, tuple(keys))
