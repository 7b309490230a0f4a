"""Seeded synthetic panels, vote corruption and the simulation studies.

Random streams come from numpy's Philox4x64 counter-based generator keyed
through ``SeedSequence``; every run of an experiment owns the stream derived
from ``(seed, run index, ...)`` so results never depend on execution order.
Gaussian draws use the Box-Muller transform on the generator's uniforms.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, OpinionFitError
from .model import ModelParams, MosParams, ScoreTensor
from .solvers import Method, SolverConfig, fit


def make_rng(seed) -> np.random.Generator:
    """Philox generator for an int seed or a tuple of ints (stream key)."""
    entropy = [int(s) for s in seed] if isinstance(seed, (tuple, list)) else int(seed)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def box_muller(rng: np.random.Generator, n: int) -> np.ndarray:
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1], keeps log finite
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * math.pi * u2
    return np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]


@dataclass(frozen=True)
class PanelLayout:
    I: int
    J: int
    R: int = 1
    missing_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.I, self.J, self.R) < 1:
            raise DataError("layout needs I, J, R >= 1")
        if not 0.0 <= self.missing_fraction < 1.0:
            raise DataError("missing_fraction must lie in [0, 1)")


def random_model_params(
    I: int,
    J: int,
    seed,
    psi_range=(1.0, 5.0),
    bias_sd: float = 0.5,
    upsilon_range=(0.3, 1.2),
) -> ModelParams:
    """Ground-truth parameters with zero-mean bias."""
    rng = make_rng(seed)
    psi = rng.uniform(*psi_range, size=J)
    delta = bias_sd * box_muller(rng, I)
    delta -= delta.mean()
    ups = rng.uniform(*upsilon_range, size=I)
    return ModelParams(psi, delta, ups)


def _layout_mask(layout: PanelLayout, rng) -> np.ndarray:
    shape = (layout.I, layout.J, layout.R)
    if layout.missing_fraction == 0.0:
        return np.ones(shape, dtype=bool)
    mask = rng.random(shape) >= layout.missing_fraction
    if not mask.any(axis=(1, 2)).all() or not mask.any(axis=(0, 2)).all():
        raise DataError("missing_fraction left a subject or stimulus without votes; change seed or fraction")
    return mask


def generate_synthetic(params: ModelParams, layout: PanelLayout) -> ScoreTensor:
    """Draw ``u = psi_j + delta_i + upsilon_i * x`` on a (possibly masked) grid."""
    if params.psi.size != layout.J or params.delta.size != layout.I:
        raise DataError("params do not match the layout")
    rng = make_rng(layout.seed)
    mask = _layout_mask(layout, rng)
    x = box_muller(rng, layout.I * layout.J * layout.R).reshape(layout.I, layout.J, layout.R)
    u = params.psi[None, :, None] + params.delta[:, None, None] + params.upsilon[:, None, None] * x
    return ScoreTensor.from_dense(u, mask)


def generate_synthetic_mos(params: MosParams, layout: PanelLayout) -> ScoreTensor:
    """Draw ``u = psi_j + upsilon_j * x`` on a (possibly masked) grid."""
    if params.psi.size != layout.J:
        raise DataError("params do not match the layout")
    rng = make_rng(layout.seed)
    mask = _layout_mask(layout, rng)
    x = box_muller(rng, layout.I * layout.J * layout.R).reshape(layout.I, layout.J, layout.R)
    u = params.psi[None, :, None] + params.upsilon_j[None, :, None] * x
    return ScoreTensor.from_dense(u, mask)


def resample_like(template: ScoreTensor, params, seed) -> ScoreTensor:
    """Fresh votes from ``params`` at exactly the template's present cells."""
    rng = make_rng(seed)
    x = box_muller(rng, template.num_obs)
    j = template.stimulus_index
    if isinstance(params, MosParams):
        u = params.psi[j] + params.upsilon_j[j] * x
    else:
        i = template.subject_index
        u = params.psi[j] + params.delta[i] + params.upsilon[i] * x
    return template.with_scores(u)


def corrupt_shuffle(scores: ScoreTensor, subject_ids, prob: float, seed) -> ScoreTensor:
    """Scramble part of some subjects' votes.

    Each vote of a listed subject is picked with probability ``prob``; the
    picked votes are randomly permuted among themselves. ``prob=1`` shuffles
    every vote of the subject across its stimuli.
    """
    if not 0.0 <= prob <= 1.0:
        raise DataError("prob must lie in [0, 1]")
    rng = make_rng(seed)
    u = np.array(scores.scores)
    for i in sorted(int(s) for s in subject_ids):
        if not 0 <= i < scores.num_subjects:
            raise DataError(f"subject index {i} out of range")
        pos = np.flatnonzero(scores.subject_index == i)
        picked = pos[rng.random(pos.size) < prob]
        u[picked] = u[picked[rng.permutation(picked.size)]]
    return scores.with_scores(u)


# -- robustness study -------------------------------------------------------

@dataclass
class RobustnessResult:
    """Normalised-psi RMSE against each method's clean-data benchmark.

    ``rmse[method]`` has shape ``(len(corrupt_counts), runs)``; failed fits
    are NaN and described in ``errors``.
    """

    methods: list
    corrupt_counts: list
    prob: float
    runs: int
    seed: int
    rmse: dict
    errors: list = field(default_factory=list)

    @property
    def mean_rmse(self) -> dict:
        return {m: np.nanmean(v, axis=1) for m, v in self.rmse.items()}


def robustness_experiment(
    scores: ScoreTensor,
    methods: Sequence,
    corrupt_counts: Sequence[int],
    prob: float,
    runs: int,
    seed,
    config: Optional[SolverConfig] = None,
) -> RobustnessResult:
    methods = [Method(m).value for m in methods]
    counts = [int(c) for c in corrupt_counts]
    if any(c < 0 or c > scores.num_subjects for c in counts):
        raise DataError("corrupt count out of range")
    mean, sd = float(scores.scores.mean()), float(scores.scores.std())
    if sd == 0.0:
        raise DataError("unaltered scores have zero spread; normalisation undefined")
    bench = {m: (fit(scores, m, config).psi - mean) / sd for m in methods}
    rmse = {m: np.full((len(counts), runs), np.nan) for m in methods}
    errors = []
    for ci, c in enumerate(counts):
        for run in range(runs):
            rng = make_rng((seed, c, run))
            chosen = rng.choice(scores.num_subjects, size=c, replace=False)
            corrupted = corrupt_shuffle(scores, chosen, prob, (seed, c, run, 1))
            for m in methods:
                try:
                    psi = (fit(corrupted, m, config).psi - mean) / sd
                except OpinionFitError as exc:
                    errors.append({"method": m, "corrupt_count": c, "run": run, "error": str(exc)})
                    continue
                rmse[m][ci, run] = float(np.sqrt(np.mean((psi - bench[m]) ** 2)))
    return RobustnessResult(methods, counts, float(prob), int(runs), seed, rmse, errors)


# -- coverage study ---------------------------------------------------------

COVERAGE_METHODS = (Method.MOS, Method.NR, Method.AP)


def _inside(ci, truth):
    return (ci[:, 0] <= truth) & (truth <= ci[:, 1])


@dataclass
class SimResult:
    """Per-run recovery errors plus pooled CI coverage fractions.

    ``coverage`` maps ``psi``, ``psi_alt``, ``delta``, ``upsilon`` (model
    methods) or just ``psi`` (MOS) to the fraction of (run, parameter)
    pairs whose ground truth fell inside the interval.
    """

    method: str
    runs: int
    seed: int
    truth: object
    recovered: list
    rmse_psi: np.ndarray
    coverage: dict
    coverage_per_run: dict
    runtime_seconds: np.ndarray
    iterations: np.ndarray


def coverage_experiment(
    scores: ScoreTensor,
    method,
    runs: int,
    seed,
    config: Optional[SolverConfig] = None,
) -> SimResult:
    """Fit, treat the estimate as ground truth, resample and refit ``runs`` times."""
    method = Method(method)
    if method not in COVERAGE_METHODS:
        raise DataError(f"coverage study supports {[m.value for m in COVERAGE_METHODS]}")
    truth = fit(scores, method, config).params
    keys = ("psi",) if method is Method.MOS else ("psi", "psi_alt", "delta", "upsilon")
    hits = {k: [] for k in keys}
    recovered, rmse, runtime, iters = [], [], [], []
    for run in range(runs):
        sample = resample_like(scores, truth, (seed, run))
        t0 = time.perf_counter()
        rep = fit(sample, method, config)
        runtime.append(time.perf_counter() - t0)
        iters.append(rep.iterations)
        recovered.append(rep.params)
        rmse.append(float(np.sqrt(np.mean((rep.psi - truth.psi) ** 2))))
        hits["psi"].append(_inside(rep.psi_ci, truth.psi))
        if method is not Method.MOS:
            hits["psi_alt"].append(_inside(rep.psi_ci2, truth.psi))
            hits["delta"].append(_inside(rep.delta_ci, truth.delta))
            hits["upsilon"].append(_inside(rep.upsilon_ci, truth.upsilon))
    per_run = {k: np.array([h.mean() for h in v]) for k, v in hits.items()}
    pooled = {k: float(np.mean(np.concatenate(v))) for k, v in hits.items()}
    return SimResult(
        method=method.value,
        runs=int(runs),
        seed=seed,
        truth=truth,
        recovered=recovered,
        rmse_psi=np.array(rmse),
        coverage=pooled,
        coverage_per_run=per_run,
        runtime_seconds=np.array(runtime),
        iterations=np.array(iters),
    )
