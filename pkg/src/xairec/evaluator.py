"""Score scaling, weighted aggregation and the trial ledger.

Raw metric values are orientation-adjusted (losses negated so that higher is
always better), z-scored against the pool of everything observed so far in
the run, then combined into one aggregated score by a weighted mean. The
ledger rescores every trial whenever the pool statistics change, so the
optimizer targets and the final ranking always share one consistent view.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .context import weight_of
from .metrics import METRIC_DESCRIPTORS

STD_FLOOR = 1e-12
FAILED_SCORE = float("-inf")


class EvaluationError(RuntimeError):
    pass


def orient(raw: float, orientation: str) -> float:
    """Losses are negated so every oriented score is higher-is-better."""
    if orientation == "gain":
        return float(raw)
    if orientation == "loss":
        return -float(raw)
    raise ValueError(f"unknown orientation {orientation!r}")


def orient_metric(raw: float, metric_id: str) -> float:
    return orient(raw, METRIC_DESCRIPTORS[metric_id].orientation)


class ScalingState:
    """Per-metric pools of oriented raw scores with z-score scaling."""

    def __init__(self):
        self._pools: dict[str, list[float]] = {}

    def add(self, metric_id: str, oriented: float) -> None:
        self._pools.setdefault(metric_id, []).append(float(oriented))

    def stats(self, metric_id: str) -> tuple[float, float]:
        pool = self._pools.get(metric_id)
        if not pool:
            raise EvaluationError(f"metric {metric_id!r} was never cold-started")
        arr = np.asarray(pool)
        return float(arr.mean()), float(arr.std())

    def scale(self, metric_id: str, oriented: float) -> float:
        mean, std = self.stats(metric_id)
        if std < STD_FLOOR:
            return 0.0
        return (oriented - mean) / std

    def pool_size(self, metric_id: str) -> int:
        return len(self._pools.get(metric_id, ()))


def scale(state: ScalingState, metric_id: str, oriented: float) -> float:
    return state.scale(metric_id, oriented)


def aggregate(scaled: dict[str, float], weights: dict[str, float]) -> float:
    """Weighted mean over the active metrics: (1/c') * sum w_q * scaled_q."""
    active = {m: v for m, v in scaled.items() if weight_of(weights, m) > 0}
    if not active:
        raise EvaluationError("no metrics with positive weight to aggregate")
    return sum(weight_of(weights, m) * v for m, v in active.items()) / len(active)


@dataclass
class TrialRecord:
    solution_id: str
    hyperparameters: dict
    raw_scores: dict[str, float]
    scaled_scores: dict[str, float] = field(default_factory=dict)
    aggregated: float = float("nan")
    epoch: int = -1  # -1 = cold start
    wall_time: float = 0.0
    cold_start: bool = False
    failed: bool = False
    items_evaluated: dict[str, int] = field(default_factory=dict)
    stopped_early: dict[str, bool] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "solution_id": self.solution_id,
            "hyperparameters": self.hyperparameters,
            "raw_scores": self.raw_scores,
            "scaled_scores": self.scaled_scores,
            "aggregated": None if self.failed else self.aggregated,
            "epoch": self.epoch,
            "wall_time": self.wall_time,
            "cold_start": self.cold_start,
            "failed": self.failed,
            "items_evaluated": self.items_evaluated,
            "stopped_early": self.stopped_early,
        }
        return json.dumps(payload, sort_keys=True)


class TrialLedger:
    """Single-writer store of all evaluated (solution, h) pairs.

    Inserting a successful trial feeds the scaling pools; ``rescore_all``
    recomputes every trial's scaled and aggregated values against the current
    pool statistics.
    """

    def __init__(self, weights: dict[str, float], on_insert=None):
        self.weights = dict(weights)
        self.state = ScalingState()
        self.trials: list[TrialRecord] = []
        self._on_insert = on_insert

    def insert(self, trial: TrialRecord) -> TrialRecord:
        if not trial.failed:
            for mid, raw in trial.raw_scores.items():
                self.state.add(mid, orient_metric(raw, mid))
        self.trials.append(trial)
        if self._on_insert is not None:
            self._on_insert(trial)
        return trial

    def rescore_all(self) -> list[TrialRecord]:
        for t in self.trials:
            if t.failed:
                t.scaled_scores = {}
                t.aggregated = FAILED_SCORE
                continue
            t.scaled_scores = {
                mid: self.state.scale(mid, orient_metric(raw, mid))
                for mid, raw in t.raw_scores.items()
            }
            t.aggregated = aggregate(t.scaled_scores, self.weights)
        return self.trials

    def best(self, solution_id: str | None = None) -> TrialRecord | None:
        pool = [
            t
            for t in self.trials
            if not t.failed and (solution_id is None or t.solution_id == solution_id)
        ]
        return max(pool, key=lambda t: t.aggregated, default=None)

    def ranking(self, per_size_rows: bool = False) -> list[TrialRecord]:
        """Trials sorted by aggregated desc; ties by explanation size then id.

        With per_size_rows, only the best trial per (solution, explanation
        size) is kept, mirroring how shortlists are usually inspected.
        """
        ok = [t for t in self.trials if not t.failed]
        if per_size_rows:
            best: dict[tuple, TrialRecord] = {}
            for t in ok:
                key = (t.solution_id, _explanation_size(t))
                if key not in best or t.aggregated > best[key].aggregated:
                    best[key] = t
            ok = list(best.values())
        return sorted(
            ok,
            key=lambda t: (-t.aggregated, _explanation_size(t), t.solution_id),
        )


def _explanation_size(trial: TrialRecord) -> float:
    h = trial.hyperparameters
    for key in ("num_features", "k"):
        if key in h:
            return float(h[key])
    return 0.0


def evaluate_cold_start(
    solutions: list[str],
    defaults_of,
    evaluate_fn,
    ledger: TrialLedger,
) -> list[str]:
    """One trial per shortlisted solution at its default hyperparameters.

    A solution that fails at defaults is dropped (recorded as a failed trial)
    and the run continues if at least one survives.
    """
    survivors = []
    for sid in solutions:
        h = defaults_of(sid)
        start = time.perf_counter()
        try:
            raw, extra = evaluate_fn(sid, h)
        except Exception as exc:  # noqa: BLE001 - failure is a recorded outcome
            ledger.insert(
                TrialRecord(
                    solution_id=sid,
                    hyperparameters=h,
                    raw_scores={},
                    epoch=-1,
                    cold_start=True,
                    failed=True,
                    wall_time=time.perf_counter() - start,
                )
            )
            continue
        ledger.insert(
            TrialRecord(
                solution_id=sid,
                hyperparameters=h,
                raw_scores=raw,
                epoch=-1,
                cold_start=True,
                wall_time=time.perf_counter() - start,
                **extra,
            )
        )
        survivors.append(sid)
    if not survivors:
        raise EvaluationError("every shortlisted solution failed at defaults")
    ledger.rescore_all()
    return survivors
