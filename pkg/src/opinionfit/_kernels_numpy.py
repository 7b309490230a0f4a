"""Vectorised numpy kernels over flat observation arrays.

Every kernel takes the observation triplet ``(subj, stim, u)``: the subject
index, stimulus index and score of each present vote. Missing cells simply
have no entry, so every reduction runs over present votes only.
"""
import numpy as np


def group_sum(idx, values, n):
    return np.bincount(idx, weights=values, minlength=n)


def group_count(idx, n):
    return np.bincount(idx, minlength=n).astype(np.float64)


def log_likelihood(subj, stim, u, psi, delta, ups):
    eps = u - psi[stim] - delta[subj]
    v = ups[subj]
    return float(np.sum(-np.log(v) - eps * eps / (2.0 * v * v)))


def derivatives(subj, stim, u, psi, delta, ups):
    I, J = delta.shape[0], psi.shape[0]
    eps = u - psi[stim] - delta[subj]
    v2 = ups[subj] ** 2
    d_psi = group_sum(stim, eps / v2, J)
    d_delta = group_sum(subj, eps / v2, I)
    d_ups = group_sum(subj, -1.0 / ups[subj] + eps * eps / (v2 * ups[subj]), I)
    dd_psi = -group_sum(stim, 1.0 / v2, J)
    dd_delta = -group_count(subj, I) / ups**2
    dd_ups = group_sum(subj, 1.0 / v2 - 3.0 * eps * eps / (v2 * v2), I)
    return d_psi, d_delta, d_ups, dd_psi, dd_delta, dd_ups


def psi_update(subj, stim, u, J, delta, ups):
    """Consistency-weighted, bias-removed per-stimulus mean."""
    w = ups[subj] ** -2.0
    return group_sum(stim, w * (u - delta[subj]), J) / group_sum(stim, w, J)


def delta_update(subj, stim, u, I, psi):
    return group_sum(subj, u - psi[stim], I) / group_count(subj, I)


def subject_sigma(subj, eps, I):
    """Per-subject residual std around the subject's own mean residual."""
    n = group_count(subj, I)
    mean = group_sum(subj, eps, I) / n
    dev = eps - mean[subj]
    return np.sqrt(group_sum(subj, dev * dev, I) / n)


def ap_iterate(subj, stim, u, I, J, psi, delta, thr, max_iter, floor, pinned):
    psi = psi.copy()
    delta = delta.copy()
    ups = np.full(I, floor)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        psi_prev = psi
        eps = u - psi[stim] - delta[subj]
        ups = np.maximum(subject_sigma(subj, eps, I), floor)
        ups[pinned] = floor
        psi = psi_update(subj, stim, u, J, delta, ups)
        delta = delta_update(subj, stim, u, I, psi)
        if np.sqrt(np.sum((psi - psi_prev) ** 2)) < thr:
            converged = True
            break
    return psi, delta, ups, it, converged


def nr_iterate(subj, stim, u, I, J, psi, delta, ups, alpha, thr, max_iter, floor, pinned, den_eps):
    psi = psi.copy()
    delta = delta.copy()
    ups = ups.copy()
    skipped = np.zeros(I, dtype=np.int64)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        psi_prev = psi
        delta = (1.0 - alpha) * delta + alpha * delta_update(subj, stim, u, I, psi)

        eps = u - psi[stim] - delta[subj]
        v2 = ups[subj] ** 2
        num = group_sum(subj, 2.0 * v2 - 4.0 * eps * eps, I)
        den = group_sum(subj, v2 - 3.0 * eps * eps, I)
        ok = np.abs(den) > den_eps
        skipped += ~ok
        ups_new = np.where(ok, ups * num / np.where(ok, den, 1.0), ups)
        ups = np.maximum((1.0 - alpha) * ups + alpha * ups_new, floor)
        ups[pinned] = floor

        psi = (1.0 - alpha) * psi + alpha * psi_update(subj, stim, u, J, delta, ups)
        if np.sqrt(np.sum((psi - psi_prev) ** 2)) < thr:
            converged = True
            break
    return psi, delta, ups, it, converged, skipped
