"""Shapley-value attribution via kernel-weighted linear regression on
coalitions."""

from __future__ import annotations

from math import comb

import numpy as np
from sklearn.linear_model import LassoLarsIC

from ..data import Dataset
from ..models import PredictiveFunction
from .base import ExplainerError, FeatureAttribution

ANCHOR_WEIGHT = 1e6


def shapley_kernel_weight(d: int, size: int) -> float:
    return (d - 1) / (comb(d, size) * size * (d - size))


def _all_coalitions(d: int) -> np.ndarray:
    """All z in {0,1}^d with 0 < |z| < d, in binary-counter order."""
    codes = np.arange(1, 2**d - 1)
    return ((codes[:, None] >> np.arange(d)) & 1).astype(float)


def _sample_coalitions(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    sizes = rng.integers(1, d, size=count)
    Z = np.zeros((count, d))
    for i, s in enumerate(sizes):
        Z[i, rng.choice(d, size=int(s), replace=False)] = 1.0
    return Z


def _solve_constrained_wls(Z, y, w, support, total):
    """Weighted least squares for phi restricted to `support`, with
    sum(phi[support]) == total enforced by eliminating the last support
    feature."""
    phi = np.zeros(Z.shape[1])
    support = np.asarray(support, dtype=int)
    if len(support) == 1:
        phi[support[0]] = total
        return phi
    Zs = Z[:, support]
    A = Zs[:, :-1] - Zs[:, [-1]]
    b = y - Zs[:, -1] * total
    sw = np.sqrt(w)
    sol, *_ = np.linalg.lstsq(A * sw[:, None], b * sw, rcond=None)
    phi[support[:-1]] = sol
    phi[support[-1]] = total - sol.sum()
    return phi


def explain_point(
    model: PredictiveFunction,
    x: np.ndarray,
    background: np.ndarray,
    num_features: int,
    num_coalitions: int,
    l1_mode: str,
    rng: np.random.Generator,
) -> np.ndarray:
    """Dense Shapley-value attribution of f(x) - f(background) for one point.

    Coalition values replace off-coalition features with the background;
    the weighted regression is constrained so attributions sum exactly to
    f(x) - f(background). When every coalition can be enumerated the result
    equals exact Shapley values.
    """
    x = np.asarray(x, dtype=float)
    d = len(x)
    if d < 2:
        raise ExplainerError("kernel SHAP needs d >= 2")
    if num_features > d:
        raise ExplainerError(f"num_features {num_features} > d {d}")

    full_enum = num_coalitions >= 2**d - 2
    if full_enum:
        Z = _all_coalitions(d)
    else:
        Z = _sample_coalitions(d, num_coalitions, rng)
    sizes = Z.sum(axis=1).astype(int)
    w = np.array([shapley_kernel_weight(d, s) for s in sizes])

    X_eval = np.where(Z == 1.0, x, background)
    v = model.predict(X_eval)
    f0 = float(model.predict(background[None, :])[0])
    fx = float(model.predict(x[None, :])[0])
    total = fx - f0
    y = v - f0

    # Empty and full coalitions carry a large anchor weight; with the hard
    # sum constraint below they are consistent no-ops but keep the design
    # matrix faithful to the sampling contract.
    Z = np.vstack([Z, np.zeros(d), np.ones(d)])
    y = np.concatenate([y, [0.0, total]])
    w = np.concatenate([w, [ANCHOR_WEIGHT, ANCHOR_WEIGHT]])

    mode = l1_mode
    if mode == "auto":
        mode = "aic" if not full_enum else "none"
    support = np.arange(d)
    if mode in ("aic", "bic"):
        sw = np.sqrt(w)
        lasso = LassoLarsIC(criterion=mode, fit_intercept=False)
        lasso.fit(Z * sw[:, None], y * sw)
        nz = np.flatnonzero(lasso.coef_)
        if len(nz) > 0:
            support = nz

    phi = _solve_constrained_wls(Z, y, w, support, total)
    if len(np.flatnonzero(phi)) > num_features:
        keep = np.argsort(-np.abs(phi), kind="stable")[:num_features]
        mask = np.zeros(d, dtype=bool)
        mask[keep] = True
        phi = np.where(mask, phi, 0.0)
    return phi


def explain(
    model: PredictiveFunction,
    ds: Dataset,
    h: dict,
    targets,
    seed: int,
) -> list[FeatureAttribution]:
    targets = list(targets)
    if not targets:
        raise ExplainerError("empty target list")
    X = ds.dense()
    background = X.mean(axis=0)
    out = []
    for t in targets:
        rng = np.random.default_rng((seed, int(t)))
        phi = explain_point(
            model,
            X[t],
            background,
            h["num_features"],
            h["num_coalitions"],
            h["l1_mode"],
            rng,
        )
        out.append(FeatureAttribution.from_dense(t, phi))
    return out
