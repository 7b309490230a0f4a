"""Plain MOS, Newton-Raphson and Alternating Projection estimators."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import kernels
from .diagnostics import ci_alt, ci_mle, ci_mos, nbic
from .errors import DataError
from .model import (
    ModelParams,
    MosParams,
    ScoreTensor,
    apply_zero_mean_bias,
    log_likelihood,
    mean_opinion_scores,
    subject_bias,
)

log = logging.getLogger(__name__)

NR_THRESHOLD = 1e-9
AP_THRESHOLD = 1e-8
UPSILON_FLOOR = 1e-8
# |denominator| at or below this skips a subject's NR inconsistency step
NR_DENOMINATOR_EPS = 1e-12


class Method(str, enum.Enum):
    MOS = "mos"
    BT500 = "bt500"
    P913 = "p913"
    NR = "nr"
    AP = "ap"


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls.

    ``psi_threshold=None`` selects the solver's own default (1e-9 for NR,
    1e-8 for AP). ``alpha`` is only used by NR.
    """

    alpha: float = 0.1
    psi_threshold: Optional[float] = None
    max_iterations: int = 10000
    upsilon_floor: float = UPSILON_FLOOR

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.psi_threshold is not None and not self.psi_threshold > 0:
            raise ValueError("psi_threshold must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if not self.upsilon_floor > 0:
            raise ValueError("upsilon_floor must be positive")

    def threshold_for(self, default: float) -> float:
        return default if self.psi_threshold is None else float(self.psi_threshold)


@dataclass(frozen=True, eq=False)
class FitReport:
    """Everything one estimation run produces.

    Interval arrays hold one ``(lower, upper)`` row per entry. For the
    MOS family ``params`` is a :class:`MosParams`; ``bias`` carries the
    P.913 subject bias and ``rejected_subjects`` the BT.500 rejections
    (indices into ``subjects``).
    """

    method: Method
    subjects: tuple
    stimuli: tuple
    params: Union[ModelParams, MosParams]
    log_likelihood: float
    nbic: float
    num_params: int
    num_obs: int
    psi_ci: np.ndarray
    iterations: int = 0
    converged: bool = True
    psi_ci2: Optional[np.ndarray] = None
    delta_ci: Optional[np.ndarray] = None
    upsilon_ci: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None
    rejected_subjects: tuple = ()
    flagged_subjects: tuple = ()
    warnings: tuple = field(default_factory=tuple)

    @property
    def psi(self) -> np.ndarray:
        return self.params.psi


def _mos_params(scores: ScoreTensor) -> MosParams:
    J = scores.num_stimuli
    psi = mean_opinion_scores(scores)
    dev = scores.scores - psi[scores.stimulus_index]
    n = kernels.group_count(scores.stimulus_index, J)
    return MosParams(psi=psi, upsilon_j=np.sqrt(kernels.group_sum(scores.stimulus_index, dev * dev, J) / n))


def mos_log_likelihood(scores: ScoreTensor, params: MosParams, floor: float = UPSILON_FLOOR) -> float:
    """Log-likelihood of the per-stimulus-ambiguity model, constants dropped.

    Zero ambiguity (unanimous stimuli) is evaluated at ``floor``.
    """
    v = np.maximum(params.upsilon_j, floor)[scores.stimulus_index]
    e = scores.scores - params.psi[scores.stimulus_index]
    return float(np.sum(-np.log(v) - e * e / (2.0 * v * v)))


def solve_mos(scores: ScoreTensor, floor: float = UPSILON_FLOOR) -> FitReport:
    params = _mos_params(scores)
    L = mos_log_likelihood(scores, params, floor)
    k = 2 * scores.num_stimuli
    return FitReport(
        method=Method.MOS,
        subjects=scores.subjects,
        stimuli=scores.stimuli,
        params=params,
        log_likelihood=L,
        nbic=nbic(L, k, scores.num_obs),
        num_params=k,
        num_obs=scores.num_obs,
        psi_ci=ci_mos(scores, params),
    )


def _single_vote_subjects(scores: ScoreTensor) -> np.ndarray:
    return scores.votes_per_subject() == 1


def nr_initialize(scores: ScoreTensor, upsilon_floor: float = UPSILON_FLOOR) -> ModelParams:
    """Zero bias, MOS quality, per-subject residue std as inconsistency."""
    mos = mean_opinion_scores(scores)
    eps = scores.scores - mos[scores.stimulus_index]
    ups = kernels.subject_sigma(scores.subject_index, eps, scores.num_subjects)
    return ModelParams(
        psi=mos,
        delta=np.zeros(scores.num_subjects),
        upsilon=np.maximum(ups, upsilon_floor),
    )


def _finish(method, scores, params, iterations, converged, warnings, floor) -> FitReport:
    params = apply_zero_mean_bias(params)
    L = log_likelihood(scores, params)
    k = scores.num_stimuli + 2 * scores.num_subjects
    cis = ci_mle(scores, params)
    single = np.flatnonzero(_single_vote_subjects(scores))
    warnings = list(warnings)
    for i in single:
        warnings.append(f"subject {scores.subjects[i]} has a single vote; upsilon pinned at the floor")
    collapsed = np.flatnonzero((scores.votes_per_subject() > 1) & (params.upsilon <= floor))
    for i in collapsed:
        warnings.append(
            f"subject {scores.subjects[i]}: inconsistency collapsed to the floor "
            "(degenerate likelihood; votes fit exactly)"
        )
    if not converged:
        warnings.append(f"{method.value} did not converge within {iterations} iterations")
    for w in warnings:
        log.debug(w)
    return FitReport(
        method=method,
        subjects=scores.subjects,
        stimuli=scores.stimuli,
        params=params,
        log_likelihood=L,
        nbic=nbic(L, k, scores.num_obs),
        num_params=k,
        num_obs=scores.num_obs,
        psi_ci=cis.psi,
        psi_ci2=ci_alt(scores, params),
        delta_ci=cis.delta,
        upsilon_ci=cis.upsilon,
        iterations=int(iterations),
        converged=bool(converged),
        flagged_subjects=tuple(int(i) for i in single),
        warnings=tuple(warnings),
    )


def solve_nr(scores: ScoreTensor, config: Optional[SolverConfig] = None) -> FitReport:
    """Damped Newton-Raphson ascent on the log-likelihood.

    One iteration updates delta, then upsilon, then psi, each step using the
    freshest values of the others. Stops when the Euclidean norm of the psi
    step drops below the threshold.
    """
    config = config or SolverConfig()
    init = nr_initialize(scores, config.upsilon_floor)
    psi, delta, ups, it, converged, skipped = kernels.nr_iterate(
        scores.subject_index,
        scores.stimulus_index,
        scores.scores,
        scores.num_subjects,
        scores.num_stimuli,
        np.array(init.psi),
        np.array(init.delta),
        np.array(init.upsilon),
        float(config.alpha),
        config.threshold_for(NR_THRESHOLD),
        int(config.max_iterations),
        float(config.upsilon_floor),
        _single_vote_subjects(scores),
        NR_DENOMINATOR_EPS,
    )
    warnings = [
        f"subject {scores.subjects[i]}: upsilon update skipped in {n} iteration(s), degenerate curvature"
        for i, n in enumerate(skipped)
        if n
    ]
    return _finish(Method.NR, scores, ModelParams(psi, delta, ups), it, converged, warnings, config.upsilon_floor)


def ap_initialize(scores: ScoreTensor):
    mos = mean_opinion_scores(scores)
    return mos, subject_bias(scores, mos)


def solve_ap(scores: ScoreTensor, config: Optional[SolverConfig] = None) -> FitReport:
    """Alternating projection: residual spread, weighted quality, mean bias."""
    config = config or SolverConfig()
    psi0, delta0 = ap_initialize(scores)
    psi, delta, ups, it, converged = kernels.ap_iterate(
        scores.subject_index,
        scores.stimulus_index,
        scores.scores,
        scores.num_subjects,
        scores.num_stimuli,
        psi0,
        delta0,
        config.threshold_for(AP_THRESHOLD),
        int(config.max_iterations),
        float(config.upsilon_floor),
        _single_vote_subjects(scores),
    )
    return _finish(Method.AP, scores, ModelParams(psi, delta, ups), it, converged, [], config.upsilon_floor)


def fit(scores: ScoreTensor, method, config: Optional[SolverConfig] = None) -> FitReport:
    """Dispatch by method name."""
    from . import legacy

    method = Method(method)
    if method is Method.MOS:
        return solve_mos(scores)
    if method is Method.BT500:
        return legacy.bt500_pipeline(scores)
    if method is Method.P913:
        return legacy.p913_pipeline(scores)
    if method is Method.NR:
        return solve_nr(scores, config)
    if method is Method.AP:
        return solve_ap(scores, config)
    raise DataError(f"unknown method {method}")  # pragma: no cover
