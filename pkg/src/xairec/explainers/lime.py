"""Local linear surrogate attribution (Gaussian perturbations + weighted
ridge)."""

from __future__ import annotations

import numpy as np
from sklearn.linear_model import Ridge

from ..data import Dataset
from ..models import PredictiveFunction
from .base import ExplainerError, FeatureAttribution

RIDGE_PENALTY = 1.0


def kernel_width(d: int) -> float:
    return 0.75 * np.sqrt(d)


def explain_point(
    model: PredictiveFunction,
    x: np.ndarray,
    num_features: int,
    num_perturbations: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Dense attribution vector for one point.

    Perturbations are unit-variance Gaussian around x (standardized space),
    sample-weighted by exp(-dist^2 / width^2); a first ridge fit picks the
    top |coefficient| features, a second fit on that subset gives the final
    weights.
    """
    x = np.asarray(x, dtype=float)
    d = len(x)
    if num_features > d:
        raise ExplainerError(f"num_features {num_features} > d {d}")
    Z = x + rng.standard_normal((num_perturbations, d))
    dist = np.linalg.norm(Z - x, axis=1)
    width = kernel_width(d)
    sample_w = np.exp(-(dist**2) / width**2)
    y = model.predict(Z)

    ridge = Ridge(alpha=RIDGE_PENALTY)
    ridge.fit(Z, y, sample_weight=sample_w)
    top = np.argsort(-np.abs(ridge.coef_), kind="stable")[:num_features]
    top = np.sort(top)

    refit = Ridge(alpha=RIDGE_PENALTY)
    refit.fit(Z[:, top], y, sample_weight=sample_w)
    weights = np.zeros(d)
    weights[top] = refit.coef_
    return weights


def explain(
    model: PredictiveFunction,
    ds: Dataset,
    h: dict,
    targets,
    seed: int,
) -> list[FeatureAttribution]:
    """One attribution per target row; randomness derives from
    (seed, target) so results are independent of evaluation order."""
    targets = list(targets)
    if not targets:
        raise ExplainerError("empty target list")
    X = ds.dense()
    out = []
    for t in targets:
        rng = np.random.default_rng((seed, int(t)))
        w = explain_point(model, X[t], h["num_features"], h["num_perturbations"], rng)
        out.append(FeatureAttribution.from_dense(t, w))
    return out
