"""Loop kernels compiled with numba.

Same signatures and semantics as ``_kernels_numpy``; each reduction is a
single pass over the observation arrays.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def group_sum(idx, values, n):
    out = np.zeros(n)
    for k in range(idx.shape[0]):
        out[idx[k]] += values[k]
    return out


@njit(cache=True)
def group_count(idx, n):
    out = np.zeros(n)
    for k in range(idx.shape[0]):
        out[idx[k]] += 1.0
    return out


@njit(cache=True)
def log_likelihood(subj, stim, u, psi, delta, ups):
    total = 0.0
    for k in range(u.shape[0]):
        v = ups[subj[k]]
        e = u[k] - psi[stim[k]] - delta[subj[k]]
        total += -math.log(v) - e * e / (2.0 * v * v)
    return total


@njit(cache=True)
def derivatives(subj, stim, u, psi, delta, ups):
    I = delta.shape[0]
    J = psi.shape[0]
    d_psi = np.zeros(J)
    d_delta = np.zeros(I)
    d_ups = np.zeros(I)
    dd_psi = np.zeros(J)
    dd_delta = np.zeros(I)
    dd_ups = np.zeros(I)
    for k in range(u.shape[0]):
        i = subj[k]
        j = stim[k]
        v = ups[i]
        v2 = v * v
        e = u[k] - psi[j] - delta[i]
        d_psi[j] += e / v2
        d_delta[i] += e / v2
        d_ups[i] += -1.0 / v + e * e / (v2 * v)
        dd_psi[j] -= 1.0 / v2
        dd_delta[i] -= 1.0 / v2
        dd_ups[i] += 1.0 / v2 - 3.0 * e * e / (v2 * v2)
    return d_psi, d_delta, d_ups, dd_psi, dd_delta, dd_ups


@njit(cache=True)
def psi_update(subj, stim, u, J, delta, ups):
    num = np.zeros(J)
    den = np.zeros(J)
    for k in range(u.shape[0]):
        i = subj[k]
        w = 1.0 / (ups[i] * ups[i])
        num[stim[k]] += w * (u[k] - delta[i])
        den[stim[k]] += w
    return num / den


@njit(cache=True)
def delta_update(subj, stim, u, I, psi):
    num = np.zeros(I)
    cnt = np.zeros(I)
    for k in range(u.shape[0]):
        num[subj[k]] += u[k] - psi[stim[k]]
        cnt[subj[k]] += 1.0
    return num / cnt


@njit(cache=True)
def subject_sigma(subj, eps, I):
    n = group_count(subj, I)
    mean = group_sum(subj, eps, I) / n
    ss = np.zeros(I)
    for k in range(eps.shape[0]):
        d = eps[k] - mean[subj[k]]
        ss[subj[k]] += d * d
    return np.sqrt(ss / n)


@njit(cache=True)
def _step_norm(a, b):
    s = 0.0
    for j in range(a.shape[0]):
        d = a[j] - b[j]
        s += d * d
    return math.sqrt(s)


@njit(cache=True)
def ap_iterate(subj, stim, u, I, J, psi, delta, thr, max_iter, floor, pinned):
    psi = psi.copy()
    delta = delta.copy()
    ups = np.full(I, floor)
    eps = np.empty(u.shape[0])
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        psi_prev = psi
        for k in range(u.shape[0]):
            eps[k] = u[k] - psi[stim[k]] - delta[subj[k]]
        ups = subject_sigma(subj, eps, I)
        for i in range(I):
            if pinned[i] or ups[i] < floor:
                ups[i] = floor
        psi = psi_update(subj, stim, u, J, delta, ups)
        delta = delta_update(subj, stim, u, I, psi)
        if _step_norm(psi, psi_prev) < thr:
            converged = True
            break
    return psi, delta, ups, it, converged


@njit(cache=True)
def nr_iterate(subj, stim, u, I, J, psi, delta, ups, alpha, thr, max_iter, floor, pinned, den_eps):
    psi = psi.copy()
    delta = delta.copy()
    ups = ups.copy()
    skipped = np.zeros(I, dtype=np.int64)
    num = np.empty(I)
    den = np.empty(I)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        psi_prev = psi
        delta_new = delta_update(subj, stim, u, I, psi)
        for i in range(I):
            delta[i] = (1.0 - alpha) * delta[i] + alpha * delta_new[i]

        num[:] = 0.0
        den[:] = 0.0
        for k in range(u.shape[0]):
            i = subj[k]
            e = u[k] - psi[stim[k]] - delta[i]
            v2 = ups[i] * ups[i]
            num[i] += 2.0 * v2 - 4.0 * e * e
            den[i] += v2 - 3.0 * e * e
        for i in range(I):
            if abs(den[i]) > den_eps:
                ups[i] = (1.0 - alpha) * ups[i] + alpha * ups[i] * num[i] / den[i]
            else:
                skipped[i] += 1
            if pinned[i] or ups[i] < floor:
                ups[i] = floor

        psi_new = psi_update(subj, stim, u, J, delta, ups)
        psi = (1.0 - alpha) * psi + alpha * psi_new
        if _step_norm(psi, psi_prev) < thr:
            converged = True
            break
    return psi, delta, ups, it, converged, skipped
