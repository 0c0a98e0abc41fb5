"""Prototype explainers: k-medoids (PAM / alternate), greedy MMD prototype
selection, and weighted greedy set-cover prototype selection."""

from __future__ import annotations

from math import comb

import numpy as np
from sklearn.metrics import pairwise_distances

from .. import _kernels
from ..data import Dataset
from .base import ExplainerError, PrototypeSet

NNLS_ITERATIONS = 200
# Below this many candidate medoid sets the PAM path solves the problem
# exactly; single-swap local search can stall in a non-global optimum on a
# few percent of tiny instances, where enumeration is cheaper than a swap
# pass anyway.
EXHAUSTIVE_MEDOID_LIMIT = 500


def distance_matrix(X, metric: str) -> np.ndarray:
    if metric not in ("euclidean", "cosine"):
        raise ExplainerError(f"unsupported metric {metric!r}")
    return np.asarray(pairwise_distances(X, metric=metric), dtype=float)


def squared_euclidean(X) -> np.ndarray:
    D = pairwise_distances(X, metric="euclidean")
    return np.asarray(D, dtype=float) ** 2


def _check_k(k: int, n: int):
    if n == 0:
        raise ExplainerError("empty subset")
    if k > n:
        raise ExplainerError(f"k {k} > n {n}")


def _init_medoids(D: np.ndarray, k: int, init: str, rng) -> np.ndarray:
    n = D.shape[0]
    if init == "random":
        return np.sort(rng.choice(n, size=k, replace=False)).astype(np.intp)
    if init == "heuristic":
        # k points with the smallest total distance to everything.
        return np.sort(np.argsort(D.sum(axis=0), kind="stable")[:k]).astype(np.intp)
    if init == "build":
        medoids = [int(np.argmin(D.sum(axis=0)))]
        d_near = D[:, medoids[0]].copy()
        for _ in range(k - 1):
            gains = np.maximum(d_near[:, None] - D, 0.0).sum(axis=0)
            gains[medoids] = -np.inf
            c = int(np.argmax(gains))
            medoids.append(c)
            d_near = np.minimum(d_near, D[:, c])
        return np.asarray(sorted(medoids), dtype=np.intp)
    raise ExplainerError(f"unknown init {init!r}")


def _exhaustive_medoids(D: np.ndarray, k: int) -> np.ndarray:
    """Globally optimal medoid set by enumeration; ties break toward the
    lexicographically smallest index tuple."""
    from itertools import combinations

    best_cost, best = np.inf, None
    for subset in combinations(range(D.shape[0]), k):
        cost = _kernels.total_cost(D, np.asarray(subset, dtype=np.intp))
        if cost < best_cost - 1e-12:
            best_cost, best = cost, subset
    return np.asarray(best, dtype=np.intp)


def _pam(D: np.ndarray, medoids: np.ndarray, max_iter: int) -> np.ndarray:
    cost = _kernels.total_cost(D, medoids)
    for _ in range(max_iter):
        delta, m_pos, h = _kernels.best_swap(D, medoids)
        if h < 0 or delta >= -1e-12:
            break
        medoids = medoids.copy()
        medoids[m_pos] = h
        new_cost = _kernels.total_cost(D, medoids)
        assert new_cost <= cost + 1e-9, "PAM swap increased cost"
        cost = new_cost
    return medoids


def _alternate(D: np.ndarray, medoids: np.ndarray, max_iter: int) -> np.ndarray:
    medoids = medoids.copy()
    for _ in range(max_iter):
        labels = D[:, medoids].argmin(axis=1)
        new = medoids.copy()
        taken = set()
        for j in range(len(medoids)):
            members = np.flatnonzero(labels == j)
            if len(members) > 0:
                intra = D[np.ix_(members, members)].sum(axis=0)
                choice = int(members[int(np.argmin(intra))])
                # Duplicate rows can make two clusters pick the same point;
                # keep medoids distinct.
                if choice not in taken:
                    new[j] = choice
            taken.add(int(new[j]))
        if np.array_equal(np.sort(new), np.sort(medoids)):
            break
        medoids = new
    return medoids


def kmedoids_explain(ds_subset: Dataset, h: dict, seed: int) -> PrototypeSet:
    """Medoids of the subset as prototypes; indices are rows of the subset."""
    _check_k(h["k"], ds_subset.n)
    rng = np.random.default_rng(seed)
    D = distance_matrix(ds_subset.X, h["metric"])
    medoids = _init_medoids(D, h["k"], h["init"], rng)
    if h["algorithm"] == "pam":
        if comb(ds_subset.n, h["k"]) <= EXHAUSTIVE_MEDOID_LIMIT:
            medoids = _exhaustive_medoids(D, h["k"])
        else:
            medoids = _pam(D, medoids, h["max_iter"])
    elif h["algorithm"] == "alternate":
        medoids = _alternate(D, medoids, h["max_iter"])
    else:
        raise ExplainerError(f"unknown algorithm {h['algorithm']!r}")
    return PrototypeSet(prototype_indices=tuple(int(i) for i in np.sort(medoids)))


def mmd_critic_explain(ds_subset: Dataset, h: dict, seed: int) -> PrototypeSet:
    """Greedy selection minimizing squared MMD between prototypes and data,
    RBF kernel exp(-gamma * ||a-b||^2). No critics are produced."""
    _check_k(h["k"], ds_subset.n)
    K = np.exp(-h["gamma"] * squared_euclidean(ds_subset.X))
    idx = _kernels.greedy_mmd(K, h["k"])
    return PrototypeSet(prototype_indices=tuple(int(i) for i in idx))


def _protodash_kernel(X, kernel: str, sigma: float) -> np.ndarray:
    if kernel == "gaussian":
        return np.exp(-squared_euclidean(X) / (2.0 * sigma**2))
    if kernel == "linear":
        G = X @ X.T
        return np.asarray(G.todense()) if hasattr(G, "todense") else np.asarray(G)
    raise ExplainerError(f"unknown kernel {kernel!r}")


def _nnls_projected_gradient(K_ss: np.ndarray, mu_s: np.ndarray, w0: np.ndarray):
    """min_w>=0  0.5 w'Kw - mu'w by projected gradient, Lipschitz step."""
    lip = float(np.linalg.eigvalsh(K_ss).max())
    step = 1.0 / max(lip, 1e-12)
    w = w0.copy()
    for _ in range(NNLS_ITERATIONS):
        grad = K_ss @ w - mu_s
        w = np.maximum(w - step * grad, 0.0)
    return w


def protodash_explain(ds_subset: Dataset, h: dict, seed: int) -> PrototypeSet:
    """Greedy weighted prototype selection: each step adds the candidate with
    the largest positive objective gradient, then re-optimizes nonnegative
    weights. Returns fewer than k prototypes (flagged) when no candidate has
    a positive gradient."""
    _check_k(h["k"], ds_subset.n)
    K = _protodash_kernel(ds_subset.X, h["kernel"], h["sigma"])
    n = K.shape[0]
    mu = K.mean(axis=0)

    selected: list[int] = []
    w = np.zeros(0)
    truncated = False
    for _ in range(h["k"]):
        grad = mu - (K[:, selected] @ w if selected else np.zeros(n))
        grad[selected] = -np.inf
        c = int(np.argmax(grad))
        if grad[c] <= 0:
            truncated = True
            break
        selected.append(c)
        K_ss = K[np.ix_(selected, selected)]
        w = _nnls_projected_gradient(K_ss, mu[selected], np.append(w, 0.0))
    return PrototypeSet(
        prototype_indices=tuple(selected),
        prototype_weights=tuple(float(v) for v in w),
        truncated=truncated,
    )


def protodash_objective(K: np.ndarray, mu: np.ndarray, indices, weights) -> float:
    """w'mu - 0.5 w'Kw for a given prototype set (test oracle hook)."""
    idx = list(indices)
    w = np.asarray(weights, dtype=float)
    return float(w @ mu[idx] - 0.5 * w @ K[np.ix_(idx, idx)] @ w)
