"""Time-saving controllers and caches: target sampling, early stopping of
sequential evaluations, and information sharing across optimization epochs.

All strategies are strictly additive: with everything disabled (or configured
so that nothing ever fires) results are bit-identical to the naive path.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

METRIC_STOP_DEFAULTS = dict(relative_threshold=0.02, patience=8, min_samples=20)
HPO_STOP_DEFAULTS = dict(relative_threshold=0.001, patience=8, min_samples=5)


def sample_targets(n: int, fraction: float, seed: int) -> list[int]:
    """ceil(fraction*n) distinct indices, uniform without replacement.

    fraction == 1.0 returns all indices in natural order.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return list(range(n))
    count = int(np.ceil(fraction * n))
    rng = np.random.default_rng((seed, n))
    return sorted(int(i) for i in rng.choice(n, size=count, replace=False))


@dataclass
class StopController:
    """Fires when a running statistic changes by less than a relative
    threshold for `patience` consecutive observations after `min_samples`."""

    relative_threshold: float
    patience: int
    min_samples: int
    _prev: float | None = field(default=None, repr=False)
    _streak: int = field(default=0, repr=False)
    _count: int = field(default=0, repr=False)

    def __post_init__(self):
        if not self.relative_threshold > 0:
            raise ValueError("relative_threshold must be > 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")

    def observe(self, running_value: float) -> str:
        """Returns "stop" or "continue". Only changes seen after min_samples
        count toward the patience streak."""
        if not np.isfinite(running_value):
            raise ValueError(f"non-finite running value {running_value}")
        self._count += 1
        if self._prev is not None and self._count > self.min_samples:
            rel = abs(running_value - self._prev) / max(abs(self._prev), 1e-12)
            self._streak = self._streak + 1 if rel < self.relative_threshold else 0
        self._prev = running_value
        if self._count >= self.min_samples and self._streak >= self.patience:
            return "stop"
        return "continue"

    @classmethod
    def for_metric(cls, **overrides) -> "StopController":
        return cls(**{**METRIC_STOP_DEFAULTS, **overrides})

    @classmethod
    def for_hpo(cls, **overrides) -> "StopController":
        return cls(**{**HPO_STOP_DEFAULTS, **overrides})


class RobustnessMaximaCache:
    """Best perturbation point found per (solution family, target index).

    Entries keep the max ratio seen so far; a hit seeds the next search with
    the stored point instead of a fresh global sampling round, never as a
    final answer.
    """

    def __init__(self):
        self._store: dict[tuple, tuple[np.ndarray, float]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, family: str, target: int):
        entry = self._store.get((family, int(target)))
        if entry is None:
            self.misses += 1
            return None
        self.hits += 1
        return entry

    def put_if_better(self, family: str, target: int, point: np.ndarray, ratio: float):
        key = (family, int(target))
        with self._lock:
            cur = self._store.get(key)
            if cur is None or ratio > cur[1]:
                self._store[key] = (np.array(point, copy=True), float(ratio))

    def __len__(self):
        return len(self._store)


class InfidelityPerturbationCache:
    """Write-once (target, seed) -> (perturbation matrix, model values).

    The model is fixed per run, so cached values equal fresh evaluations and
    reuse is bit-exact for a matching seed.
    """

    def __init__(self):
        self._store: dict[tuple, tuple[np.ndarray, np.ndarray, float]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, target: int, seed: int):
        entry = self._store.get((int(target), int(seed)))
        if entry is None:
            self.misses += 1
            return None
        self.hits += 1
        return entry

    def put_if_absent(self, target, seed, perturbations, values, f_at_x: float):
        key = (int(target), int(seed))
        with self._lock:
            if key not in self._store:
                self._store[key] = (
                    np.array(perturbations, copy=True),
                    np.array(values, copy=True),
                    float(f_at_x),
                )

    def __len__(self):
        return len(self._store)


@dataclass
class StrategyConfig:
    """Run-level strategy toggles and parameters.

    `neutral()` keeps every code path active but configured so nothing can
    change results (sampling 1.0, thresholds that never fire, no robustness
    maxima injection — injection is score-altering by design).
    """

    sampling_fraction: float = 1.0
    metric_early_stopping: bool = False
    hpo_early_stopping: bool = False
    share_infidelity: bool = False
    share_robustness: bool = False
    metric_stop: dict = field(default_factory=lambda: dict(METRIC_STOP_DEFAULTS))
    hpo_stop: dict = field(default_factory=lambda: dict(HPO_STOP_DEFAULTS))

    @classmethod
    def disabled(cls) -> "StrategyConfig":
        return cls()

    @classmethod
    def neutral(cls) -> "StrategyConfig":
        never = dict(relative_threshold=1e-300, patience=10**6, min_samples=10**6)
        return cls(
            sampling_fraction=1.0,
            metric_early_stopping=True,
            hpo_early_stopping=True,
            share_infidelity=True,
            share_robustness=False,
            metric_stop=never,
            hpo_stop=dict(never),
        )

    def metric_controller(self) -> StopController | None:
        if not self.metric_early_stopping:
            return None
        return StopController(**self.metric_stop)

    def hpo_controller(self) -> StopController | None:
        if not self.hpo_early_stopping:
            return None
        return StopController(**self.hpo_stop)
