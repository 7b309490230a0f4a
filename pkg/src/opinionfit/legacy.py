"""BT.500 subject rejection and P.913 subject bias removal baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import nbic
from .errors import DataError
from .model import ScoreTensor, mean_opinion_scores, subject_bias
from .solvers import FitReport, Method, solve_mos

RATIO1_THRESHOLD = 0.05
RATIO2_THRESHOLD = 0.3
EPS_NORMAL = 2.0
EPS_NON_NORMAL = math.sqrt(20.0)


@dataclass(frozen=True, eq=False)
class RejectionReport:
    """Outlier counters per subject and the resulting rejected set.

    ``ratio2`` is NaN for subjects with no outlier votes. ``flagged_cells``
    lists ``(stimulus, repetition)`` cells that contributed no counts because
    they had fewer than two voters or zero spread.
    """

    p: np.ndarray
    q: np.ndarray
    votes: np.ndarray
    ratio1: np.ndarray
    ratio2: np.ndarray
    rejected: frozenset
    flagged_cells: tuple = ()


def _reject_rule(p, q, votes):
    ratio1 = (p + q) / votes
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio2 = np.where(p + q > 0, np.abs(p - q) / np.maximum(p + q, 1), np.nan)
    rejected = (ratio1 >= RATIO1_THRESHOLD) & (p + q > 0) & (ratio2 < RATIO2_THRESHOLD)
    return ratio1, ratio2, frozenset(int(i) for i in np.flatnonzero(rejected))


def bt500_reject(scores: ScoreTensor) -> RejectionReport:
    I = scores.num_subjects
    p = np.zeros(I, dtype=np.int64)
    q = np.zeros(I, dtype=np.int64)
    flagged = []
    si, ji, ri, u = scores.subject_index, scores.stimulus_index, scores.repetition_index, scores.scores
    cell = ji * scores.repetitions + ri
    order = np.argsort(cell, kind="stable")
    bounds = np.flatnonzero(np.diff(cell[order])) + 1
    for group in np.split(order, bounds):
        j, r = int(ji[group[0]]), int(ri[group[0]])
        x = u[group]
        n = x.size
        if n < 2:
            flagged.append((j, r))
            continue
        mu = x.mean()
        dev = x - mu
        m2 = np.mean(dev**2)
        if m2 == 0.0:
            flagged.append((j, r))
            continue
        kurtosis = np.mean(dev**4) / m2**2
        eps = EPS_NORMAL if 2.0 <= kurtosis <= 4.0 else EPS_NON_NORMAL
        sigma = math.sqrt(np.sum(dev**2) / (n - 1))
        hi = x >= mu + eps * sigma
        lo = x <= mu - eps * sigma
        np.add.at(p, si[group][hi], 1)
        np.add.at(q, si[group][lo], 1)
    votes = scores.votes_per_subject()
    ratio1, ratio2, rejected = _reject_rule(p, q, votes)
    return RejectionReport(p, q, votes, ratio1, ratio2, rejected, tuple(flagged))


def p913_bias_removal(scores: ScoreTensor):
    """Subtract each subject's mean shift from MOS out of all their votes.

    Returns ``(bias, adjusted_scores)``.
    """
    bias = subject_bias(scores, mean_opinion_scores(scores))
    return bias, scores.with_scores(scores.scores - bias[scores.subject_index])


def _mos_after_rejection(method, scores, rejection, extra_params, bias=None) -> FitReport:
    keep = [i for i in range(scores.num_subjects) if i not in rejection.rejected]
    if not keep:
        raise DataError("every subject was rejected")
    survivors = scores.select_subjects(keep)
    base = solve_mos(survivors)
    k = 2 * scores.num_stimuli + extra_params(len(keep))
    return FitReport(
        method=method,
        subjects=scores.subjects,
        stimuli=scores.stimuli,
        params=base.params,
        log_likelihood=base.log_likelihood,
        nbic=nbic(base.log_likelihood, k, survivors.num_obs),
        num_params=k,
        num_obs=survivors.num_obs,
        psi_ci=base.psi_ci,
        bias=bias,
        rejected_subjects=tuple(sorted(rejection.rejected)),
        warnings=tuple(
            f"cell (stimulus {scores.stimuli[j]}, repetition {r}) skipped by rejection screening"
            for j, r in rejection.flagged_cells
        ),
    )


def bt500_pipeline(scores: ScoreTensor) -> FitReport:
    """Reject outlier subjects, then plain MOS on the remaining votes."""
    return _mos_after_rejection(Method.BT500, scores, bt500_reject(scores), lambda n: 0)


def p913_pipeline(scores: ScoreTensor) -> FitReport:
    """Bias removal, rejection on the adjusted votes, then MOS."""
    bias, adjusted = p913_bias_removal(scores)
    return _mos_after_rejection(Method.P913, adjusted, bt500_reject(adjusted), lambda n: n, bias=bias)
