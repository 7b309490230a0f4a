"""Opinion-score containers and the subject-bias/inconsistency likelihood.

A vote is modelled as ``u[i, j, r] = psi[j] + delta[i] + upsilon[i] * x`` with
``x ~ N(0, 1)``. ``psi`` is the true quality of stimulus ``j``, ``delta`` the
bias of subject ``i`` and ``upsilon`` its inconsistency.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import DataError, DegenerateVarianceError, DimensionError


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScoreTensor:
    """Sparse subject x stimulus x repetition opinion scores.

    Stored as parallel arrays with one entry per present vote; a missing vote
    is simply absent. Identifier tuples map dense indices back to names.
    """

    subjects: tuple
    stimuli: tuple
    repetitions: int
    subject_index: np.ndarray
    stimulus_index: np.ndarray
    repetition_index: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "subjects", tuple(str(s) for s in self.subjects))
        set_(self, "stimuli", tuple(str(s) for s in self.stimuli))
        set_(self, "repetitions", int(self.repetitions))
        si = _frozen(self.subject_index, np.int64)
        ji = _frozen(self.stimulus_index, np.int64)
        ri = _frozen(self.repetition_index, np.int64)
        u = _frozen(self.scores, np.float64)
        set_(self, "subject_index", si)
        set_(self, "stimulus_index", ji)
        set_(self, "repetition_index", ri)
        set_(self, "scores", u)

        I, J, R = len(self.subjects), len(self.stimuli), self.repetitions
        if I < 1 or J < 1 or R < 1:
            raise DataError(f"need at least one subject, stimulus and repetition, got {I}x{J}x{R}")
        if len(set(self.subjects)) != I:
            raise DataError("duplicate subject identifiers")
        if len(set(self.stimuli)) != J:
            raise DataError("duplicate stimulus identifiers")
        if not (si.ndim == ji.ndim == ri.ndim == u.ndim == 1) or not (
            si.shape == ji.shape == ri.shape == u.shape
        ):
            raise DataError("index and score arrays must be 1-d and of equal length")
        if u.size == 0:
            raise DataError("score tensor has no votes")
        if not np.all(np.isfinite(u)):
            k = int(np.flatnonzero(~np.isfinite(u))[0])
            raise DataError(f"non-finite score at observation {k}")
        for name, idx, n in (("subject", si, I), ("stimulus", ji, J), ("repetition", ri, R)):
            if idx.min() < 0 or idx.max() >= n:
                raise DataError(f"{name} index out of range [0, {n})")
        flat = (si * J + ji) * R + ri
        if np.unique(flat).size != flat.size:
            raise DataError("duplicate (subject, stimulus, repetition) vote")
        if np.any(np.bincount(si, minlength=I) == 0):
            missing = [self.subjects[i] for i in np.flatnonzero(np.bincount(si, minlength=I) == 0)]
            raise DataError(f"subjects without votes: {missing}")
        if np.any(np.bincount(ji, minlength=J) == 0):
            missing = [self.stimuli[j] for j in np.flatnonzero(np.bincount(ji, minlength=J) == 0)]
            raise DataError(f"stimuli without votes: {missing}")

    @classmethod
    def from_dense(cls, scores, mask=None, subjects=None, stimuli=None) -> "ScoreTensor":
        """Build from an ``(I, J)`` or ``(I, J, R)`` array.

        ``mask`` is True where a vote is present; default is all present.
        Values under a False mask are ignored, whatever they hold.
        """
        u = np.asarray(scores, dtype=np.float64)
        if u.ndim == 2:
            u = u[:, :, None]
        if u.ndim != 3:
            raise DataError("dense scores must be 2-d or 3-d")
        if mask is None:
            m = np.ones(u.shape, dtype=bool)
        else:
            m = np.asarray(mask, dtype=bool)
            if m.ndim == 2:
                m = m[:, :, None]
            if m.shape != u.shape:
                raise DataError("mask shape does not match scores")
        I, J, R = u.shape
        si, ji, ri = np.nonzero(m)
        return cls(
            subjects=tuple(subjects) if subjects is not None else tuple(f"s{i}" for i in range(I)),
            stimuli=tuple(stimuli) if stimuli is not None else tuple(f"v{j}" for j in range(J)),
            repetitions=R,
            subject_index=si,
            stimulus_index=ji,
            repetition_index=ri,
            scores=u[si, ji, ri],
        )

    @classmethod
    def from_records(cls, records: Iterable[Sequence]) -> "ScoreTensor":
        """Build from ``(subject, stimulus, repetition, score)`` rows.

        Dense indices are assigned in first-appearance order.
        """
        subjects: dict = {}
        stimuli: dict = {}
        si, ji, ri, u = [], [], [], []
        for subject, stimulus, rep, score in records:
            si.append(subjects.setdefault(str(subject), len(subjects)))
            ji.append(stimuli.setdefault(str(stimulus), len(stimuli)))
            ri.append(int(rep))
            u.append(float(score))
        if not u:
            raise DataError("no records")
        if min(ri) < 0:
            raise DataError("negative repetition index")
        return cls(tuple(subjects), tuple(stimuli), max(ri) + 1, si, ji, ri, u)

    @property
    def num_subjects(self) -> int:
        return len(self.subjects)

    @property
    def num_stimuli(self) -> int:
        return len(self.stimuli)

    @property
    def num_obs(self) -> int:
        return int(self.scores.size)

    @property
    def shape(self):
        return self.num_subjects, self.num_stimuli, self.repetitions

    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[self.subject_index, self.stimulus_index, self.repetition_index] = True
        return m

    def dense(self) -> np.ma.MaskedArray:
        data = np.zeros(self.shape)
        data[self.subject_index, self.stimulus_index, self.repetition_index] = self.scores
        return np.ma.MaskedArray(data, mask=~self.mask())

    def votes_per_subject(self) -> np.ndarray:
        return np.bincount(self.subject_index, minlength=self.num_subjects)

    def votes_per_stimulus(self) -> np.ndarray:
        return np.bincount(self.stimulus_index, minlength=self.num_stimuli)

    def is_complete(self) -> bool:
        return self.num_obs == self.num_subjects * self.num_stimuli * self.repetitions

    def with_scores(self, scores) -> "ScoreTensor":
        """Same layout, new per-observation scores."""
        return ScoreTensor(
            self.subjects,
            self.stimuli,
            self.repetitions,
            self.subject_index,
            self.stimulus_index,
            self.repetition_index,
            scores,
        )

    def select_subjects(self, keep) -> "ScoreTensor":
        """Drop every subject not in ``keep``; surviving subjects keep their order."""
        keep = np.sort(np.unique(np.asarray(list(keep), dtype=np.int64)))
        if keep.size == 0:
            raise DataError("no subjects left")
        remap = np.full(self.num_subjects, -1, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        sel = remap[self.subject_index] >= 0
        return ScoreTensor(
            tuple(self.subjects[i] for i in keep),
            self.stimuli,
            self.repetitions,
            remap[self.subject_index[sel]],
            self.stimulus_index[sel],
            self.repetition_index[sel],
            self.scores[sel],
        )

    def records(self):
        for i, j, r, s in zip(self.subject_index, self.stimulus_index, self.repetition_index, self.scores):
            yield self.subjects[i], self.stimuli[j], int(r), float(s)


@dataclass(frozen=True, eq=False)
class ModelParams:
    psi: np.ndarray
    delta: np.ndarray
    upsilon: np.ndarray

    def __post_init__(self):
        for name in ("psi", "delta", "upsilon"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.float64))
        if self.delta.shape != self.upsilon.shape:
            raise DimensionError("delta and upsilon lengths differ")
        if np.any(self.upsilon < 0):
            raise DataError("upsilon must be non-negative")

    def check_against(self, scores: ScoreTensor):
        if self.psi.shape != (scores.num_stimuli,) or self.delta.shape != (scores.num_subjects,):
            raise DimensionError(
                f"params sized J={self.psi.size}, I={self.delta.size} for a "
                f"{scores.num_subjects}x{scores.num_stimuli} tensor"
            )


@dataclass(frozen=True, eq=False)
class MosParams:
    """Per-stimulus quality and ambiguity of the plain-MOS model."""

    psi: np.ndarray
    upsilon_j: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "psi", _frozen(self.psi, np.float64))
        object.__setattr__(self, "upsilon_j", _frozen(self.upsilon_j, np.float64))
        if self.psi.shape != self.upsilon_j.shape:
            raise DimensionError("psi and upsilon_j lengths differ")
        if np.any(self.upsilon_j < 0):
            raise DataError("upsilon_j must be non-negative")


class Derivatives(NamedTuple):
    d_psi: np.ndarray
    d_delta: np.ndarray
    d_upsilon: np.ndarray
    d2_psi: np.ndarray
    d2_delta: np.ndarray
    d2_upsilon: np.ndarray


def _check_variance(scores: ScoreTensor, params: ModelParams):
    voting = scores.votes_per_subject() > 0
    bad = np.flatnonzero(voting & ~(params.upsilon > 0))
    if bad.size:
        raise DegenerateVarianceError(
            f"non-positive upsilon for voting subjects {[scores.subjects[i] for i in bad]}"
        )


def residuals(scores: ScoreTensor, params: ModelParams) -> np.ma.MaskedArray:
    """``u - psi - delta`` at every present vote, masked elsewhere."""
    params.check_against(scores)
    eps = scores.scores - params.psi[scores.stimulus_index] - params.delta[scores.subject_index]
    out = np.zeros(scores.shape)
    out[scores.subject_index, scores.stimulus_index, scores.repetition_index] = eps
    return np.ma.MaskedArray(out, mask=~scores.mask())


def log_likelihood(scores: ScoreTensor, params: ModelParams) -> float:
    """Gaussian log-likelihood with additive constants dropped."""
    params.check_against(scores)
    _check_variance(scores, params)
    return float(
        kernels.log_likelihood(
            scores.subject_index, scores.stimulus_index, scores.scores,
            params.psi, params.delta, params.upsilon,
        )
    )


def derivatives(scores: ScoreTensor, params: ModelParams) -> Derivatives:
    params.check_against(scores)
    _check_variance(scores, params)
    out = kernels.derivatives(
        scores.subject_index, scores.stimulus_index, scores.scores,
        params.psi, params.delta, params.upsilon,
    )
    return Derivatives(*out)


def apply_zero_mean_bias(params: ModelParams) -> ModelParams:
    """Shift the mean bias into the quality scores so that sum(delta) == 0."""
    c = float(np.mean(params.delta))
    return ModelParams(psi=params.psi + c, delta=params.delta - c, upsilon=params.upsilon)


def mean_opinion_scores(scores: ScoreTensor) -> np.ndarray:
    """Per-stimulus mean over present votes."""
    J = scores.num_stimuli
    return kernels.group_sum(scores.stimulus_index, scores.scores, J) / kernels.group_count(
        scores.stimulus_index, J
    )


def subject_bias(scores: ScoreTensor, mos=None) -> np.ndarray:
    """Each subject's mean shift from the per-stimulus MOS, over all (j, r)."""
    if mos is None:
        mos = mean_opinion_scores(scores)
    return kernels.delta_update(
        scores.subject_index, scores.stimulus_index, scores.scores, scores.num_subjects, mos
    )
