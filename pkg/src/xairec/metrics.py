"""The six explanation-quality metrics.

Attribution metrics (robustness, infidelity, number of features) score one
explanation per target and aggregate by mean; prototype metrics
(non-representativeness, diversity, number of prototypes) score the set as a
whole. Each metric has a fixed orientation: loss (lower is better) or gain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .data import Dataset
from .explainers.base import FeatureAttribution, PrototypeSet
from .models import PredictiveFunction, scalar_fn
from .strategies import (
    InfidelityPerturbationCache,
    RobustnessMaximaCache,
    StopController,
)

ROBUSTNESS_DEFAULTS = dict(candidates_per_point=40, refine_rounds=2)
REFINE_SAMPLES = 10
REFINE_SHRINK = 0.25
INFIDELITY_DEFAULTS = dict(num_perturbations=100, noise_half_width=0.5)


class MetricError(RuntimeError):
    pass


@dataclass(frozen=True)
class MetricDescriptor:
    id: str
    property: str
    orientation: str  # "loss" | "gain"
    explanan_tag: str
    signature: tuple[str, ...]


METRIC_DESCRIPTORS = {
    "robustness": MetricDescriptor(
        "robustness", "continuity", "loss", "feature-summary",
        ("dataset", "explainer_function"),
    ),
    "infidelity": MetricDescriptor(
        "infidelity", "correctness", "loss", "feature-summary",
        ("dataset", "model", "explanations"),
    ),
    "number_of_features": MetricDescriptor(
        "number_of_features", "compactness_size", "loss", "feature-summary",
        ("explanations",),
    ),
    "non_representativeness": MetricDescriptor(
        "non_representativeness", "completeness", "loss", "data-point",
        ("dataset", "explanations"),
    ),
    "diversity": MetricDescriptor(
        "diversity", "compactness_redundancy", "gain", "data-point",
        ("dataset", "explanations"),
    ),
    "number_of_prototypes": MetricDescriptor(
        "number_of_prototypes", "compactness_size", "loss", "data-point",
        ("explanations",),
    ),
}


@dataclass
class MetricResult:
    metric_id: str
    aggregate: float
    per_item_scores: list[float] | None = None
    items_evaluated: int = 0
    stopped_early: bool = False
    note: str = ""

    def __post_init__(self):
        if not np.isfinite(self.aggregate):
            raise MetricError(f"{self.metric_id}: non-finite aggregate")


def _finish_per_item(metric_id, scores, total_targets, stopped):
    return MetricResult(
        metric_id=metric_id,
        aggregate=float(np.mean(scores)),
        per_item_scores=[float(s) for s in scores],
        items_evaluated=len(scores),
        stopped_early=stopped,
    )


def robustness(
    explain_fn,
    ds: Dataset,
    targets,
    params: dict | None = None,
    seed: int = 0,
    cache: RobustnessMaximaCache | None = None,
    cache_family: str | None = None,
    controller: StopController | None = None,
) -> MetricResult:
    """Worst-case ratio ||e(x)-e(x')|| / ||x-x'|| over a std-sized box.

    Randomized local search: uniform box samples plus shrinking refinement
    rounds around the incumbent. When a cached best point for the same
    explainer family and target is available, the expensive global sampling
    round is skipped entirely: the cached argmax seeds the search and only
    the local refinement rounds run, which is where the reuse saves time.
    """
    p = {**ROBUSTNESS_DEFAULTS, **(params or {})}
    X = ds.dense()
    half_width = ds.column_std()
    scores: list[float] = []
    stopped = False
    skipped = attempted = 0

    for t in targets:
        x = X[int(t)]
        rng = np.random.default_rng((seed, int(t), 0xB0))
        e_x = np.asarray(explain_fn(x, t), dtype=float)

        entry = None
        if cache is not None and cache_family is not None:
            entry = cache.get(cache_family, t)
        if entry is not None:
            candidates = [entry[0]]
        else:
            candidates = [
                x + rng.uniform(-half_width, half_width)
                for _ in range(p["candidates_per_point"])
            ]

        best_ratio, best_point = 0.0, None

        def try_candidates(cands):
            nonlocal best_ratio, best_point, skipped, attempted
            for c in cands:
                attempted += 1
                denom = float(np.linalg.norm(x - c))
                if denom == 0.0:
                    continue
                try:
                    e_c = np.asarray(explain_fn(c, t), dtype=float)
                except Exception:
                    skipped += 1
                    continue
                ratio = float(np.linalg.norm(e_x - e_c)) / denom
                if ratio > best_ratio:
                    best_ratio, best_point = ratio, c

        try_candidates(candidates)
        width = half_width.astype(float)
        for _ in range(p["refine_rounds"]):
            width = width * REFINE_SHRINK
            center = best_point if best_point is not None else x
            try_candidates(
                [center + rng.uniform(-width, width) for _ in range(REFINE_SAMPLES)]
            )

        if cache is not None and cache_family is not None and best_point is not None:
            cache.put_if_better(cache_family, t, best_point, best_ratio)
        scores.append(best_ratio)
        if controller is not None and controller.observe(float(np.mean(scores))) == "stop":
            stopped = True
            break

    if attempted and skipped > 0.5 * attempted:
        raise MetricError(
            f"robustness: {skipped}/{attempted} perturbed explanations failed"
        )
    return _finish_per_item("robustness", scores, len(list(targets)), stopped)


def infidelity(
    explanations: list[FeatureAttribution],
    model: PredictiveFunction,
    ds: Dataset,
    params: dict | None = None,
    seed: int = 0,
    cache: InfidelityPerturbationCache | None = None,
    controller: StopController | None = None,
) -> MetricResult:
    """Mean squared gap between I·e and f(x) - f(x-I) under uniform noise I.

    Noise coordinates are uniform in +/- noise_half_width * per-feature std.
    The (perturbations, model values) pair per target is cacheable keyed by
    (target, seed), so reuse across trials is bit-exact.
    """
    p = {**INFIDELITY_DEFAULTS, **(params or {})}
    X = ds.dense()
    half = p["noise_half_width"] * ds.column_std()
    scores: list[float] = []
    stopped = False

    for e in explanations:
        t = e.instance_index
        x = X[t]
        if len(e.weights) != ds.d:
            raise MetricError(
                f"explanation length {len(e.weights)} != d {ds.d} (target {t})"
            )
        entry = cache.get(t, seed) if cache is not None else None
        if entry is not None:
            I, fvals, fx = entry
        else:
            rng = np.random.default_rng((seed, int(t), 0x1F))
            I = rng.uniform(-half, half, size=(p["num_perturbations"], ds.d))
            g = scalar_fn(model, x)
            fx = float(g(x[None, :])[0])
            fvals = g(x - I)
            if cache is not None:
                cache.put_if_absent(t, seed, I, fvals, fx)
        gaps = I @ e.weights - (fx - fvals)
        scores.append(float(np.mean(gaps**2)))
        if controller is not None and controller.observe(float(np.mean(scores))) == "stop":
            stopped = True
            break

    return _finish_per_item("infidelity", scores, len(explanations), stopped)


def number_of_features(explanations: list[FeatureAttribution]) -> MetricResult:
    scores = [float(e.size) for e in explanations]
    return _finish_per_item("number_of_features", scores, len(explanations), False)


def _proto_rows(prototypes: PrototypeSet, ds_subset: Dataset) -> np.ndarray:
    return ds_subset.rows(list(prototypes.prototype_indices))


def non_representativeness(
    prototypes: PrototypeSet, ds_subset: Dataset, distance: str = "euclidean"
) -> MetricResult:
    """Mean distance from each point of the subset to its nearest prototype."""
    if prototypes.size == 0:
        raise MetricError("non_representativeness: empty prototype set")
    X = ds_subset.dense()
    D = cdist(X, _proto_rows(prototypes, ds_subset), metric=distance)
    return MetricResult(
        metric_id="non_representativeness",
        aggregate=float(D.min(axis=1).mean()),
        items_evaluated=ds_subset.n,
    )


def diversity(
    prototypes: PrototypeSet, ds_subset: Dataset, distance: str = "euclidean"
) -> MetricResult:
    """Mean pairwise distance among prototypes; a singleton set scores 0."""
    l = prototypes.size
    if l <= 1:
        return MetricResult(
            metric_id="diversity",
            aggregate=0.0,
            items_evaluated=l,
            note="fewer than two prototypes; no pairs",
        )
    P = _proto_rows(prototypes, ds_subset)
    D = cdist(P, P, metric=distance)
    iu = np.triu_indices(l, k=1)
    return MetricResult(
        metric_id="diversity",
        aggregate=float(D[iu].mean()),
        items_evaluated=l,
    )


def number_of_prototypes(prototypes: PrototypeSet) -> MetricResult:
    return MetricResult(
        metric_id="number_of_prototypes",
        aggregate=float(prototypes.size),
        items_evaluated=prototypes.size,
    )
