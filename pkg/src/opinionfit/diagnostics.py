"""Confidence intervals, chi-square quantiles, NBIC and fit comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import stats

from . import kernels
from .errors import DataError, NumericalError
from .model import ModelParams, MosParams, ScoreTensor

Z95 = 1.96


class Interval(NamedTuple):
    lower: float
    upper: float


class MleIntervals(NamedTuple):
    """Per-entry ``(lower, upper)`` rows for psi, delta and upsilon."""

    psi: np.ndarray
    delta: np.ndarray
    upsilon: np.ndarray


@dataclass(frozen=True)
class FitComparison:
    plcc: float
    srocc: float
    diff_mean: float
    diff_std: float
    rmse: float


# -- chi-square -------------------------------------------------------------

_EPS = 1e-16
_TINY = 1e-300


def _gammainc_series(a, x):
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gammaincc_cf(a, x):
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for n in range(1, 10000):
        an = -n * (n - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _gammainc_series(a, x))
    return max(0.0, 1.0 - _gammaincc_cf(a, x))


def chi_square_cdf(x: float, k: int) -> float:
    return regularized_gamma_p(k / 2.0, x / 2.0)


@lru_cache(maxsize=4096)
def chi_square_ppf(k: int, p: float) -> float:
    """Chi-square percent point function by bisection on the CDF."""
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {k!r}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p!r}")
    k = int(k)
    lo, hi = 0.0, k + 40.0 * math.sqrt(2.0 * k) + 100.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if chi_square_cdf(mid, k) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- confidence intervals ---------------------------------------------------

def _band(center, half):
    return np.column_stack([center - half, center + half])


def ci_mle(scores: ScoreTensor, params: ModelParams) -> MleIntervals:
    """Asymptotic 95% intervals from the curvature of the likelihood."""
    params.check_against(scores)
    k = scores.votes_per_subject()
    if np.any(k == 0):
        raise DataError("subject with no votes has no interval")
    ups = params.upsilon
    if np.any(ups <= 0):
        raise NumericalError("upsilon must be positive for interval estimation")
    info = kernels.group_sum(scores.stimulus_index, ups[scores.subject_index] ** -2.0, scores.num_stimuli)
    psi_ci = _band(params.psi, Z95 / np.sqrt(info))
    delta_ci = _band(params.delta, Z95 * ups / np.sqrt(k))
    lo = np.array([math.sqrt(n / chi_square_ppf(int(n), 0.975)) for n in k])
    hi = np.array([math.sqrt(n / chi_square_ppf(int(n), 0.025)) for n in k])
    ups_ci = np.column_stack([lo * ups, hi * ups])
    return MleIntervals(psi_ci, delta_ci, ups_ci)


def stimulus_residual_std(scores: ScoreTensor, params: ModelParams) -> np.ndarray:
    """Per-stimulus std of the residuals around their per-stimulus mean."""
    params.check_against(scores)
    J = scores.num_stimuli
    eps = scores.scores - params.psi[scores.stimulus_index] - params.delta[scores.subject_index]
    n = kernels.group_count(scores.stimulus_index, J)
    mean = kernels.group_sum(scores.stimulus_index, eps, J) / n
    dev = eps - mean[scores.stimulus_index]
    return np.sqrt(kernels.group_sum(scores.stimulus_index, dev * dev, J) / n)


def ci_alt(scores: ScoreTensor, params: ModelParams) -> np.ndarray:
    """Per-stimulus differentiated quality intervals from residual spread."""
    v_j = stimulus_residual_std(scores, params)
    n = scores.votes_per_stimulus()
    return _band(params.psi, Z95 * v_j / np.sqrt(n))


def ci_mos(scores: ScoreTensor, params: MosParams) -> np.ndarray:
    if params.psi.shape != (scores.num_stimuli,):
        raise DataError("MOS params do not match the score tensor")
    n = scores.votes_per_stimulus()
    return _band(params.psi, Z95 * params.upsilon_j / np.sqrt(n))


# -- model comparison -------------------------------------------------------

def nbic(log_likelihood: float, num_params: int, num_obs: int) -> float:
    """BIC divided by the number of observations (natural log)."""
    if num_obs < 1:
        raise ValueError("num_obs must be at least 1")
    return (math.log(num_obs) * num_params - 2.0 * log_likelihood) / num_obs


def compare_fits(a, b) -> FitComparison:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise DataError("compare_fits needs two equal-length vectors of length >= 2")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise NumericalError("correlation undefined for a constant input")
    diff = b - a
    return FitComparison(
        plcc=float(stats.pearsonr(a, b)[0]),
        srocc=float(stats.spearmanr(a, b)[0]),
        diff_mean=float(diff.mean()),
        diff_std=float(diff.std()),
        rmse=float(np.sqrt(np.mean(diff * diff))),
    )
