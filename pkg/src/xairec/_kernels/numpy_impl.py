"""Pure-numpy implementations of the prototype-selection inner loops.

These are the reference semantics; the compiled module in ``_fast`` must
return identical results (same tie-breaking: lowest medoid position, then
lowest candidate index).
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def total_cost(D: np.ndarray, medoids: np.ndarray) -> float:
    """Sum over points of the distance to their nearest medoid."""
    return float(D[:, medoids].min(axis=1).sum())


def best_swap(D: np.ndarray, medoids: np.ndarray):
    """Best single (medoid, non-medoid) swap for PAM.

    Returns ``(delta, medoid_pos, candidate)`` where delta is the change in
    total cost (negative = improvement); candidate is -1 when no swap helps.
    """
    n = D.shape[0]
    medoids = np.asarray(medoids, dtype=np.intp)
    k = len(medoids)
    dist_med = D[:, medoids]
    nearest_pos = dist_med.argmin(axis=1)
    d1 = dist_med[np.arange(n), nearest_pos]
    if k > 1:
        part = np.partition(dist_med, 1, axis=1)
        d2 = part[:, 1]
    else:
        d2 = np.full(n, np.inf)
    old_cost = d1.sum()

    is_medoid = np.zeros(n, dtype=bool)
    is_medoid[medoids] = True
    candidates = np.flatnonzero(~is_medoid)
    if len(candidates) == 0:
        return 0.0, -1, -1

    best_delta = 0.0
    best_m, best_h = -1, -1
    for m_pos in range(k):
        dmin_wo = np.where(nearest_pos == m_pos, d2, d1)
        new_costs = np.minimum(dmin_wo[:, None], D[:, candidates]).sum(axis=0)
        h_pos = int(new_costs.argmin())
        delta = float(new_costs[h_pos] - old_cost)
        if delta < best_delta - 1e-12:
            best_delta = delta
            best_m, best_h = m_pos, int(candidates[h_pos])
    return best_delta, best_m, best_h


def greedy_mmd(K: np.ndarray, k: int) -> np.ndarray:
    """Greedy prototype selection minimizing squared MMD to the full set.

    K is the full n x n kernel matrix. At each step the candidate giving the
    lowest resulting MMD^2 is added (ties: lowest index).
    """
    n = K.shape[0]
    colmean = K.mean(axis=0)
    diag = np.diag(K).copy()
    selected: list[int] = []
    sum_mu = 0.0  # sum of colmean over selected
    sum_kss = 0.0  # sum of K over selected x selected
    svec = np.zeros(n)  # K[c, S].sum() per candidate c
    mask = np.ones(n, dtype=bool)

    for _ in range(k):
        l_new = len(selected) + 1
        # MMD^2 after adding c, up to the constant mean(K) term.
        obj = (
            -2.0 / l_new * (sum_mu + colmean)
            + (sum_kss + 2.0 * svec + diag) / (l_new * l_new)
        )
        obj = np.where(mask, obj, np.inf)
        c = int(obj.argmin())
        selected.append(c)
        mask[c] = False
        sum_mu += colmean[c]
        sum_kss += 2.0 * svec[c] + diag[c]
        svec += K[:, c]
    return np.asarray(selected, dtype=np.intp)
