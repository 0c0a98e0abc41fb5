"""Context handling: the needs/constraints registry, shortlisting of
compatible explainers and metrics, and weight validation.

The registry ships as an editable JSON file so new explainers, metrics or
question/answer tags can be added without touching code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

DEFAULT_WEIGHT = 1.0


class RegistryError(ValueError):
    pass


class ShortlistEmpty(RuntimeError):
    """No registered explainer matches the requested (explanandum, explanan)."""

    def __init__(self, message: str, suggestions: list[tuple[str, str]]):
        super().__init__(message)
        self.suggestions = suggestions


@dataclass(frozen=True)
class Registry:
    explananda: tuple[dict, ...]
    explanans: tuple[dict, ...]
    explainers: tuple[dict, ...]
    metrics: tuple[dict, ...]

    def explanandum_ids(self) -> list[str]:
        return [e["id"] for e in self.explananda]

    def explanan_ids(self) -> list[str]:
        return [e["id"] for e in self.explanans]

    def explainer(self, explainer_id: str) -> dict:
        for e in self.explainers:
            if e["id"] == explainer_id:
                return e
        raise RegistryError(f"unknown explainer {explainer_id!r}")

    def metric(self, metric_id: str) -> dict:
        for m in self.metrics:
            if m["id"] == metric_id:
                return m
        raise RegistryError(f"unknown metric {metric_id!r}")


def _validate(reg: Registry) -> Registry:
    eids = set(reg.explanandum_ids())
    aids = set(reg.explanan_ids())
    for e in reg.explainers:
        dangling = set(e["explananda"]) - eids
        if dangling:
            raise RegistryError(
                f"explainer {e['id']!r} references unknown explananda {sorted(dangling)}"
            )
        if e["explanan"] not in aids:
            raise RegistryError(
                f"explainer {e['id']!r} references unknown explanan {e['explanan']!r}"
            )
    for m in reg.metrics:
        if m["explanan"] not in aids:
            raise RegistryError(
                f"metric {m['id']!r} references unknown explanan {m['explanan']!r}"
            )
        if m["orientation"] not in ("loss", "gain"):
            raise RegistryError(f"metric {m['id']!r} has bad orientation")
    return reg


def load_registry(path=None) -> Registry:
    if path is None:
        text = (
            resources.files("xairec").joinpath("resources/registry.json").read_text()
        )
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    raw = json.loads(text)
    return _validate(
        Registry(
            explananda=tuple(raw["explananda"]),
            explanans=tuple(raw["explanans"]),
            explainers=tuple(raw["explainers"]),
            metrics=tuple(raw["metrics"]),
        )
    )


def list_questions(registry: Registry) -> list[tuple[str, str]]:
    return [(e["id"], e["question"]) for e in registry.explananda]


def list_explanans(registry: Registry) -> list[tuple[str, str]]:
    return [(e["id"], e["label"]) for e in registry.explanans]


def validate_weights(weights: dict | None) -> dict[str, float]:
    """Missing entries default to 1; negatives and all-zero maps rejected."""
    weights = dict(weights or {})
    for mid, w in weights.items():
        w = float(w)
        if not (w >= 0):
            raise ValueError(f"weight for {mid!r} must be >= 0, got {w}")
        weights[mid] = w
    if weights and all(w == 0 for w in weights.values()):
        raise ValueError("all weights are zero; at least one property must count")
    return weights


def weight_of(weights: dict[str, float], metric_id: str) -> float:
    return weights.get(metric_id, DEFAULT_WEIGHT)


def shortlist(
    explanandum_id: str,
    explanan_id: str,
    weights: dict[str, float],
    registry: Registry,
) -> tuple[list[str], list[str]]:
    """Explainers tagged with the pair, and matching metrics with weight > 0.

    Raises ShortlistEmpty with nearest available pairings when nothing
    matches.
    """
    if explanandum_id not in registry.explanandum_ids():
        raise RegistryError(f"unknown explanandum {explanandum_id!r}")
    if explanan_id not in registry.explanan_ids():
        raise RegistryError(f"unknown explanan {explanan_id!r}")

    explainers = [
        e["id"]
        for e in registry.explainers
        if explanandum_id in e["explananda"] and e["explanan"] == explanan_id
    ]
    if not explainers:
        suggestions = sorted(
            {
                (eid, e["explanan"])
                for e in registry.explainers
                for eid in e["explananda"]
            }
        )
        raise ShortlistEmpty(
            f"no explainer registered for ({explanandum_id}, {explanan_id}); "
            f"available pairings: {suggestions}",
            suggestions,
        )
    metrics = [
        m["id"]
        for m in registry.metrics
        if m["explanan"] == explanan_id and weight_of(weights, m["id"]) > 0
    ]
    return explainers, metrics
