"""Explainer registry: one uniform contract over attribution and prototype
methods, each declaring its hyperparameter space and context tags."""

from __future__ import annotations

import numpy as np

from .. import context as _context
from ..data import Dataset
from ..models import PredictiveFunction
from . import kernel_shap, lime, prototypes
from .base import (
    ExplainerDescriptor,
    ExplainerError,
    FeatureAttribution,
    HyperparameterSpace,
    Param,
    PrototypeSet,
)

SOLUTION_IDS = ["lime", "kernel_shap", "kmedoids", "mmd_critic", "protodash"]


def _space(solution_id: str, d: int | None) -> HyperparameterSpace:
    if solution_id in ("lime", "kernel_shap"):
        if d is None or d < 2:
            raise ExplainerError(f"{solution_id} needs the feature count d (>= 2)")
        nf = Param("num_features", "integer", 1, d, default=min(10, d))
        if solution_id == "lime":
            return HyperparameterSpace(
                (nf, Param("num_perturbations", "integer", 100, 10000, default=5000))
            )
        return HyperparameterSpace(
            (
                nf,
                Param("num_coalitions", "integer", 100, 10000, default=2048),
                Param(
                    "l1_mode", "categorical", options=("auto", "aic", "bic"),
                    default="auto",
                ),
            )
        )
    if solution_id == "kmedoids":
        return HyperparameterSpace(
            (
                Param(
                    "init", "categorical", options=("random", "heuristic", "build"),
                    default="build",
                ),
                Param("max_iter", "integer", 50, 500, default=300),
                Param(
                    "algorithm", "categorical", options=("pam", "alternate"),
                    default="pam",
                ),
                Param(
                    "metric", "categorical", options=("euclidean", "cosine"),
                    default="euclidean",
                ),
                Param("k", "integer", 2, 30, default=5),
            )
        )
    if solution_id == "mmd_critic":
        return HyperparameterSpace(
            (
                Param("gamma", "continuous", 1e-3, 10.0, default=1.0, log_scale=True),
                Param("k", "integer", 2, 30, default=5),
            )
        )
    if solution_id == "protodash":
        return HyperparameterSpace(
            (
                Param(
                    "kernel", "categorical", options=("gaussian", "linear"),
                    default="gaussian",
                ),
                Param("sigma", "continuous", 0.1, 50.0, default=10.0, log_scale=True),
                Param("k", "integer", 2, 30, default=5),
            )
        )
    raise ExplainerError(f"unknown solution id {solution_id!r}")


def describe(
    solution_id: str,
    d: int | None = None,
    registry: _context.Registry | None = None,
) -> ExplainerDescriptor:
    registry = registry or _context.load_registry()
    entry = registry.explainer(solution_id)
    return ExplainerDescriptor(
        id=solution_id,
        explanandum_tags=tuple(entry["explananda"]),
        explanan_tag=entry["explanan"],
        space=_space(solution_id, d),
        family=entry["family"],
    )


def explain_attribution(
    solution_id: str,
    model: PredictiveFunction,
    ds: Dataset,
    h: dict,
    targets,
    seed: int,
) -> list[FeatureAttribution]:
    if solution_id == "lime":
        return lime.explain(model, ds, h, targets, seed)
    if solution_id == "kernel_shap":
        return kernel_shap.explain(model, ds, h, targets, seed)
    raise ExplainerError(f"{solution_id!r} is not an attribution explainer")


def attribution_point_fn(
    solution_id: str, model: PredictiveFunction, ds: Dataset, h: dict, seed: int
):
    """Callable (x, target_index) -> dense weights, deterministic in x.

    Each call reseeds from (seed, target_index) so the explanation is a pure
    function of the input point for a given target; the continuity metric
    relies on this.
    """
    if solution_id == "lime":

        def fn(x, target):
            rng = np.random.default_rng((seed, int(target)))
            return lime.explain_point(
                model, x, h["num_features"], h["num_perturbations"], rng
            )

        return fn
    if solution_id == "kernel_shap":
        background = ds.dense().mean(axis=0)

        def fn(x, target):
            rng = np.random.default_rng((seed, int(target)))
            return kernel_shap.explain_point(
                model,
                x,
                background,
                h["num_features"],
                h["num_coalitions"],
                h["l1_mode"],
                rng,
            )

        return fn
    raise ExplainerError(f"{solution_id!r} is not an attribution explainer")


def explain_prototypes(
    solution_id: str, ds_subset: Dataset, h: dict, seed: int
) -> PrototypeSet:
    if solution_id == "kmedoids":
        return prototypes.kmedoids_explain(ds_subset, h, seed)
    if solution_id == "mmd_critic":
        return prototypes.mmd_critic_explain(ds_subset, h, seed)
    if solution_id == "protodash":
        return prototypes.protodash_explain(ds_subset, h, seed)
    raise ExplainerError(f"{solution_id!r} is not a prototype explainer")


__all__ = [
    "SOLUTION_IDS",
    "ExplainerDescriptor",
    "ExplainerError",
    "FeatureAttribution",
    "HyperparameterSpace",
    "Param",
    "PrototypeSet",
    "describe",
    "explain_attribution",
    "explain_prototypes",
    "attribution_point_fn",
    "kernel_shap",
    "lime",
    "prototypes",
]
