"""Shared types for explainers: hyperparameter spaces and explanation
containers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ExplainerError(RuntimeError):
    pass


@dataclass(frozen=True)
class Param:
    """One hyperparameter descriptor."""

    name: str
    kind: str  # "continuous" | "integer" | "categorical"
    lo: float | None = None
    hi: float | None = None
    options: tuple = ()
    default: object = None
    log_scale: bool = False

    def __post_init__(self):
        if self.kind in ("continuous", "integer"):
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ValueError(f"{self.name}: need lo < hi for {self.kind}")
        elif self.kind == "categorical":
            if not self.options:
                raise ValueError(f"{self.name}: categorical needs options")
        else:
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")
        if not self.contains(self.default):
            raise ValueError(f"{self.name}: default {self.default!r} out of domain")

    def contains(self, value) -> bool:
        if self.kind == "continuous":
            return isinstance(value, (int, float)) and self.lo <= value <= self.hi
        if self.kind == "integer":
            return (
                isinstance(value, (int, np.integer))
                and self.lo <= value <= self.hi
            )
        return value in self.options


@dataclass(frozen=True)
class HyperparameterSpace:
    params: tuple[Param, ...]

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names: {names}")

    def names(self) -> list[str]:
        return [p.name for p in self.params]

    def defaults(self) -> dict:
        return {p.name: p.default for p in self.params}

    def validate(self, assignment: dict) -> dict:
        """Check an assignment covers exactly this space and is in-domain."""
        unknown = set(assignment) - set(self.names())
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        out = {}
        for p in self.params:
            if p.name not in assignment:
                raise ValueError(f"missing hyperparameter {p.name!r}")
            v = assignment[p.name]
            if p.kind == "integer" and isinstance(v, float) and v == int(v):
                v = int(v)
            if not p.contains(v):
                raise ValueError(f"hyperparameter {p.name}={v!r} out of domain")
            out[p.name] = v
        return out

    def __getitem__(self, name: str) -> Param:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class FeatureAttribution:
    """Signed per-feature contributions for one instance.

    ``weights`` is a dense d-vector, zero outside the selection;
    ``selected_features`` lists the nonzero features by descending |weight|.
    """

    instance_index: int
    weights: np.ndarray
    selected_features: tuple[int, ...]

    @staticmethod
    def from_dense(instance_index: int, weights: np.ndarray) -> "FeatureAttribution":
        weights = np.asarray(weights, dtype=float)
        nz = np.flatnonzero(weights)
        order = nz[np.argsort(-np.abs(weights[nz]), kind="stable")]
        return FeatureAttribution(
            instance_index=int(instance_index),
            weights=weights,
            selected_features=tuple(int(i) for i in order),
        )

    @property
    def size(self) -> int:
        return len(self.selected_features)


@dataclass(frozen=True)
class PrototypeSet:
    """Indices (into the explained subset) of representative data points."""

    prototype_indices: tuple[int, ...]
    prototype_weights: tuple[float, ...] | None = None
    truncated: bool = False

    def __post_init__(self):
        if len(set(self.prototype_indices)) != len(self.prototype_indices):
            raise ValueError("duplicate prototype indices")
        if self.prototype_weights is not None:
            if len(self.prototype_weights) != len(self.prototype_indices):
                raise ValueError("weights length mismatch")
            if any(w < 0 for w in self.prototype_weights):
                raise ValueError("negative prototype weight")

    @property
    def size(self) -> int:
        return len(self.prototype_indices)


@dataclass(frozen=True)
class ExplainerDescriptor:
    id: str
    explanandum_tags: tuple[str, ...]
    explanan_tag: str
    space: HyperparameterSpace
    family: str  # "attribution" | "prototype"
