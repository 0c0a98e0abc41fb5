"""End-to-end run orchestration: config validation, data/model preparation,
shortlisting, cold start, per-solution optimization loops and report
emission."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import context as ctx
from . import explainers, metrics
from .data import (
    Dataset,
    confusion_split,
    load_csv,
    load_documents,
    load_predictions,
    standardize,
    tfidf_vectorize,
)
from .evaluator import TrialLedger, TrialRecord, evaluate_cold_start
from .hpo import run_hpo
from .models import PredictiveFunction, train_mlp
from .strategies import (
    InfidelityPerturbationCache,
    RobustnessMaximaCache,
    StrategyConfig,
    sample_targets,
)


class ConfigError(ValueError):
    pass


# Operative method defaults, echoed into every report so a reader can see
# exactly which conventions produced the numbers.
DECISION_LOG = [
    "metric scaling: z-score against the pool of all orientation-adjusted raw "
    "scores observed so far in the run (cold start seeds the pool)",
    "historic trials are rescored against current pool statistics each epoch",
    "aggregated score: weighted mean over active metrics, weights not "
    "normalized, divided by the number of active metrics",
    "attribution sampling: LIME perturbs with unit-variance Gaussians, kernel "
    "width 0.75*sqrt(d), ridge penalty 1.0",
    "kernel SHAP background: per-feature mean of the dataset; 'auto' l1 mode "
    "resolves to aic under coalition subsampling, no selection under full "
    "enumeration",
    "robustness search: randomized box search (default 40 candidates + 2 "
    "shrinking refinement rounds of 10), box half-width = per-feature std",
    "infidelity noise: uniform, half-width 0.5 * per-feature std, 100 draws "
    "per target",
    "classification scalar for metrics: probability of the class predicted "
    "at the unperturbed point",
    "optimizer: GP with isotropic squared-exponential kernel, length-scale "
    "grid by marginal likelihood, expected-improvement acquisition (xi=0.01), "
    "3 random warmup epochs, one independent GP per solution",
    "robustness maxima reuse is score-altering by construction and therefore "
    "excluded from the neutral strategy configuration",
]

_CONFUSION_CELLS = (
    "true_positives",
    "true_negatives",
    "false_positives",
    "false_negatives",
)


@dataclass
class RunConfig:
    dataset: dict
    model: dict | None
    context: dict
    run: dict
    output_dir: str | None = None

    @staticmethod
    def from_dict(raw: dict) -> "RunConfig":
        allowed = {"dataset", "model", "context", "run", "output_dir"}
        unknown = set(raw) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("dataset", "context"):
            if key not in raw:
                raise ConfigError(f"missing config section {key!r}")
        cfg = RunConfig(
            dataset=_check_keys(
                "dataset",
                raw["dataset"],
                {
                    "kind", "path", "target_column", "task", "labels_path",
                    "predictions_path", "min_doc_freq", "subset",
                },
            ),
            model=_check_keys(
                "model",
                raw.get("model"),
                {"kind", "hidden_width", "max_epochs", "train_seed", "path"},
            ),
            context=_check_keys(
                "context", raw["context"], {"explanandum", "explanan", "weights"}
            ),
            run=_check_keys(
                "run",
                raw.get("run", {}),
                {
                    "epochs", "seed", "per_size_rows", "distance",
                    "strategies", "metric_params",
                },
            ),
            output_dir=raw.get("output_dir"),
        )
        if cfg.dataset.get("kind") not in ("csv", "text"):
            raise ConfigError("dataset.kind must be 'csv' or 'text'")
        if "explanandum" not in cfg.context or "explanan" not in cfg.context:
            raise ConfigError("context needs 'explanandum' and 'explanan'")
        if cfg.run.get("epochs", 0) < 0:
            raise ConfigError("run.epochs must be >= 0")
        subset = cfg.dataset.get("subset")
        if subset is not None and subset not in _CONFUSION_CELLS:
            raise ConfigError(f"dataset.subset must be one of {_CONFUSION_CELLS}")
        _check_keys(
            "run.strategies",
            cfg.run.get("strategies"),
            {
                "sampling_fraction", "metric_early_stopping", "hpo_early_stopping",
                "share_infidelity", "share_robustness", "metric_stop", "hpo_stop",
            },
        )
        return cfg

    @staticmethod
    def load(path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return RunConfig.from_dict(raw)

    def strategies(self) -> StrategyConfig:
        return StrategyConfig(**(self.run.get("strategies") or {}))

    def seed(self) -> int:
        return int(self.run.get("seed", 0))

    def epochs(self) -> int:
        return int(self.run.get("epochs", 25))


def _check_keys(section, mapping, allowed):
    if mapping is None:
        return mapping
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")
    return dict(mapping)


@dataclass
class PreparedRun:
    """Everything a run needs after data/model/context preparation."""

    config: RunConfig
    dataset: Dataset
    explained: Dataset  # subset actually explained (confusion cell for text)
    model: PredictiveFunction | None
    registry: ctx.Registry
    weights: dict[str, float]
    solutions: list[str]
    metric_ids: list[str]
    targets: list[int]
    distance: str


def prepare(config: RunConfig) -> PreparedRun:
    registry = ctx.load_registry()
    weights = ctx.validate_weights(config.context.get("weights"))
    solutions, metric_ids = ctx.shortlist(
        config.context["explanandum"], config.context["explanan"], weights, registry
    )

    dcfg = config.dataset
    if dcfg["kind"] == "csv":
        ds = standardize(
            load_csv(dcfg["path"], dcfg.get("target_column", "target"), dcfg["task"])
        )
        explained = ds
    else:
        docs = load_documents(dcfg["path"])
        labels = (
            load_predictions(dcfg["labels_path"], len(docs))
            if dcfg.get("labels_path")
            else None
        )
        ds = tfidf_vectorize(docs, int(dcfg.get("min_doc_freq", 1)), labels=labels)
        if dcfg.get("predictions_path"):
            preds = load_predictions(dcfg["predictions_path"], ds.n)
            split = confusion_split(ds, preds)
            cell = dcfg.get("subset", "false_positives")
            idx = split.cells()[cell]
            if not idx:
                raise ConfigError(f"confusion cell {cell!r} is empty")
            explained = ds.subset(idx)
        else:
            explained = ds

    model = None
    needs_model = any(
        "model" in metrics.METRIC_DESCRIPTORS[m].signature for m in metric_ids
    ) or config.context["explanan"] == "feature-summary"
    if needs_model:
        mcfg = config.model or {}
        kind = mcfg.get("kind", "mlp")
        if kind == "mlp":
            model = train_mlp(
                ds,
                hidden_width=int(mcfg.get("hidden_width", 100)),
                max_epochs=int(mcfg.get("max_epochs", 200)),
                seed=int(mcfg.get("train_seed", 0)),
            )
        elif kind == "load":
            from .models import load_model

            model = load_model(mcfg["path"])
        else:
            raise ConfigError(f"unsupported model kind {kind!r} for this context")

    strategies = config.strategies()
    targets = sample_targets(
        explained.n, strategies.sampling_fraction, config.seed()
    )
    return PreparedRun(
        config=config,
        dataset=ds,
        explained=explained,
        model=model,
        registry=registry,
        weights=weights,
        solutions=solutions,
        metric_ids=metric_ids,
        targets=targets,
        distance=config.run.get("distance", "euclidean"),
    )


class Evaluator:
    """Per-trial evaluation closure shared by cold start and the HPO loops."""

    def __init__(self, prep: PreparedRun):
        self.prep = prep
        strategies = prep.config.strategies()
        self.strategies = strategies
        self.seed = prep.config.seed()
        self.robustness_cache = (
            RobustnessMaximaCache() if strategies.share_robustness else None
        )
        self.infidelity_cache = (
            InfidelityPerturbationCache() if strategies.share_infidelity else None
        )
        self.metric_params = prep.config.run.get("metric_params") or {}
        self.per_item_rows: list[tuple] = []  # (trial_no, solution, metric, target, value)
        self._trial_no = 0

    def space(self, solution_id: str):
        return explainers.describe(
            solution_id, d=self.prep.explained.d, registry=self.prep.registry
        ).space

    def defaults(self, solution_id: str) -> dict:
        return self.space(solution_id).defaults()

    def __call__(self, solution_id: str, h: dict) -> tuple[dict, dict]:
        prep = self.prep
        family = prep.registry.explainer(solution_id)["family"]
        h = self.space(solution_id).validate(h)
        raw: dict[str, float] = {}
        items: dict[str, int] = {}
        stopped: dict[str, bool] = {}
        trial_no = self._trial_no
        self._trial_no += 1

        if family == "attribution":
            exps = explainers.explain_attribution(
                solution_id, prep.model, prep.explained, h, self.targets(), self.seed
            )
            point_fn = explainers.attribution_point_fn(
                solution_id, prep.model, prep.explained, h, self.seed
            )
            for mid in prep.metric_ids:
                if mid == "number_of_features":
                    res = metrics.number_of_features(exps)
                elif mid == "infidelity":
                    res = metrics.infidelity(
                        exps,
                        prep.model,
                        prep.explained,
                        params=self.metric_params.get("infidelity"),
                        seed=self.seed,
                        cache=self.infidelity_cache,
                        controller=self.strategies.metric_controller(),
                    )
                elif mid == "robustness":
                    res = metrics.robustness(
                        point_fn,
                        prep.explained,
                        self.targets(),
                        params=self.metric_params.get("robustness"),
                        seed=self.seed,
                        cache=self.robustness_cache,
                        cache_family=solution_id,
                        controller=self.strategies.metric_controller(),
                    )
                else:
                    raise ConfigError(f"metric {mid!r} unsupported for attribution")
                self._record(trial_no, solution_id, res)
                raw[mid] = res.aggregate
                items[mid] = res.items_evaluated
                stopped[mid] = res.stopped_early
        else:
            pset = explainers.explain_prototypes(
                solution_id, prep.explained, h, self.seed
            )
            for mid in prep.metric_ids:
                if mid == "non_representativeness":
                    res = metrics.non_representativeness(
                        pset, prep.explained, self.distance()
                    )
                elif mid == "diversity":
                    res = metrics.diversity(pset, prep.explained, self.distance())
                elif mid == "number_of_prototypes":
                    res = metrics.number_of_prototypes(pset)
                else:
                    raise ConfigError(f"metric {mid!r} unsupported for prototypes")
                self._record(trial_no, solution_id, res)
                raw[mid] = res.aggregate
                items[mid] = res.items_evaluated
                stopped[mid] = res.stopped_early
        return raw, {"items_evaluated": items, "stopped_early": stopped}

    def targets(self) -> list[int]:
        return self.prep.targets

    def distance(self) -> str:
        return self.prep.distance

    def _record(self, trial_no, solution_id, res: metrics.MetricResult):
        if res.per_item_scores:
            for t, v in zip(self.targets(), res.per_item_scores):
                self.per_item_rows.append((trial_no, solution_id, res.metric_id, t, v))


def run(config: RunConfig, out_dir) -> dict:
    """Full pipeline per the architecture loop; returns a result summary.

    Deterministic per seed: two runs with the same config produce identical
    rankings byte for byte.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    prep = prepare(config)
    evaluator = Evaluator(prep)

    trials_path = out / "trials.jsonl"
    trials_fh = open(trials_path, "w", encoding="utf-8")

    def persist(trial: TrialRecord):
        trials_fh.write(trial.to_json() + "\n")
        trials_fh.flush()

    ledger = TrialLedger(prep.weights, on_insert=persist)
    try:
        survivors = evaluate_cold_start(
            prep.solutions, evaluator.defaults, evaluator, ledger
        )
        stopper_factory = prep.config.strategies().hpo_controller
        for sid in survivors:
            run_hpo(
                sid,
                evaluator.space(sid),
                evaluator,
                ledger,
                epochs=config.epochs(),
                seed=config.seed(),
                stopper=stopper_factory(),
            )
        ledger.rescore_all()
    finally:
        trials_fh.close()

    ranking = ledger.ranking(per_size_rows=bool(config.run.get("per_size_rows")))
    write_ranking_csv(out / "ranking.csv", ranking, prep.metric_ids)
    write_ranking_json(out / "ranking.json", ranking, prep.metric_ids)
    write_per_item_csv(out / "per_item_scores.csv", evaluator.per_item_rows)
    report = render_report(
        prep, ledger, ranking, evaluator, elapsed=time.perf_counter() - t0
    )
    validate_report(report)
    (out / "report.md").write_text(report, encoding="utf-8")
    return {
        "ranking": ranking,
        "ledger": ledger,
        "evaluator": evaluator,
        "prepared": prep,
        "out_dir": str(out),
    }


def write_ranking_csv(path, ranking, metric_ids):
    lines = [
        ",".join(
            ["aggregated"]
            + [f"scaled_{m}" for m in metric_ids]
            + ["solution", "hyperparameters"]
        )
    ]
    for t in ranking:
        h_str = ";".join(
            _plain(v) for v in _ordered_h_values(t)
        )
        lines.append(
            ",".join(
                [f"{t.aggregated:.6f}"]
                + [f"{t.scaled_scores.get(m, float('nan')):.6f}" for m in metric_ids]
                + [t.solution_id, h_str]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _ordered_h_values(trial: TrialRecord):
    return [trial.hyperparameters[k] for k in sorted(trial.hyperparameters)]


def _plain(v) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def write_ranking_json(path, ranking, metric_ids):
    rows = [
        {
            "aggregated": t.aggregated,
            "scaled": {m: t.scaled_scores.get(m) for m in metric_ids},
            "raw": t.raw_scores,
            "solution": t.solution_id,
            "hyperparameters": t.hyperparameters,
            "epoch": t.epoch,
            "cold_start": t.cold_start,
        }
        for t in ranking
    ]
    Path(path).write_text(
        json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_per_item_csv(path, rows):
    lines = ["trial,solution,metric_id,target_index,value"]
    for trial_no, sid, mid, target, value in rows:
        lines.append(f"{trial_no},{sid},{mid},{target},{value:.10g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def render_report(prep: PreparedRun, ledger, ranking, evaluator, elapsed: float) -> str:
    cfg = prep.config
    lines = ["# Recommendation report", ""]
    lines.append(
        f"Context: explanandum `{cfg.context['explanandum']}`, "
        f"explanan `{cfg.context['explanan']}`"
    )
    lines.append(f"Shortlisted explainers: {', '.join(prep.solutions)}")
    lines.append(f"Metrics: {', '.join(prep.metric_ids)}")
    lines.append(
        "Weights: "
        + ", ".join(
            f"{m}={ctx.weight_of(prep.weights, m)}" for m in prep.metric_ids
        )
    )
    lines.append("")

    lines.append("## Ranking")
    lines.append("")
    header = (
        "| aggregated | "
        + " | ".join(f"scaled {m}" for m in prep.metric_ids)
        + " | solution | hyperparameters |"
    )
    lines.append(header)
    lines.append("|" + "---|" * (len(prep.metric_ids) + 3))
    for t in ranking:
        lines.append(
            "| "
            + " | ".join(
                [f"{t.aggregated:.3f}"]
                + [f"{t.scaled_scores.get(m, float('nan')):.3f}" for m in prep.metric_ids]
                + [t.solution_id, ";".join(_plain(v) for v in _ordered_h_values(t))]
            )
            + " |"
        )
    lines.append("")

    per_item = {}
    for trial_no, sid, mid, target, value in evaluator.per_item_rows:
        per_item.setdefault((trial_no, sid, mid), []).append(value)
    if per_item:
        lines.append("## Per-metric score distributions (per trial)")
        lines.append("")
        lines.append("| trial | solution | metric | min | q25 | median | q75 | max |")
        lines.append("|---|---|---|---|---|---|---|---|")
        for (trial_no, sid, mid), values in sorted(per_item.items()):
            q = np.percentile(values, [0, 25, 50, 75, 100])
            lines.append(
                f"| {trial_no} | {sid} | {mid} | "
                + " | ".join(f"{v:.4g}" for v in q)
                + " |"
            )
        lines.append("")

    strategies = cfg.strategies()
    lines.append("## Strategy statistics")
    lines.append("")
    lines.append(f"- sampling fraction: {strategies.sampling_fraction}")
    lines.append(
        f"- targets evaluated: {len(prep.targets)} of {prep.explained.n}"
    )
    lines.append(f"- metric early stopping: {strategies.metric_early_stopping}")
    lines.append(f"- optimizer early stopping: {strategies.hpo_early_stopping}")
    for name, cache in (
        ("robustness maxima cache", evaluator.robustness_cache),
        ("infidelity perturbation cache", evaluator.infidelity_cache),
    ):
        if cache is None:
            lines.append(f"- {name}: off")
        else:
            lines.append(
                f"- {name}: {cache.hits} hits, {cache.misses} misses, "
                f"{len(cache)} entries"
            )
    n_stopped = sum(
        1 for t in ledger.trials for v in t.stopped_early.values() if v
    )
    lines.append(f"- metric evaluations stopped early: {n_stopped}")
    lines.append(f"- wall time: {elapsed:.2f}s")
    lines.append("")

    lines.append("## Decision log")
    lines.append("")
    for item in DECISION_LOG:
        lines.append(f"- {item}")
    lines.append("")
    return "\n".join(lines)


def validate_report(text: str) -> None:
    if "## Decision log" not in text or DECISION_LOG[0] not in text:
        raise RuntimeError("report is missing the decision log")


def explain_with(config: RunConfig, solution_id: str, h: dict, targets, out_path=None):
    """Produce explanations for one chosen (solution, h) row and export them
    as JSON lines plus a plain-text rendering."""
    prep = prepare(config)
    space = explainers.describe(
        solution_id, d=prep.explained.d, registry=prep.registry
    ).space
    full_h = {**space.defaults(), **h}
    full_h = space.validate(full_h)
    family = prep.registry.explainer(solution_id)["family"]
    records = []
    text_lines = []
    if family == "attribution":
        targets = list(targets) if targets else prep.targets[:1]
        exps = explainers.explain_attribution(
            solution_id, prep.model, prep.explained, full_h, targets, config.seed()
        )
        for e in exps:
            records.append(
                {
                    "solution": solution_id,
                    "hyperparameters": full_h,
                    "target": e.instance_index,
                    "weights": {
                        prep.explained.feature_names[i]: float(e.weights[i])
                        for i in e.selected_features
                    },
                }
            )
            text_lines.append(f"target {e.instance_index}:")
            for i in e.selected_features:
                text_lines.append(
                    f"  {prep.explained.feature_names[i]}: {e.weights[i]:+.4f}"
                )
    else:
        pset = explainers.explain_prototypes(
            solution_id, prep.explained, full_h, config.seed()
        )
        for rank, idx in enumerate(pset.prototype_indices):
            row = prep.explained.rows([idx])[0]
            nz = np.flatnonzero(row)
            rendering = ", ".join(
                f"{prep.explained.feature_names[j]}={row[j]:.3g}" for j in nz[:12]
            )
            rec = {
                "solution": solution_id,
                "hyperparameters": full_h,
                "prototype_rank": rank,
                "row_index": idx,
                "values": rendering,
            }
            if pset.prototype_weights is not None:
                rec["weight"] = pset.prototype_weights[rank]
            records.append(rec)
            text_lines.append(f"prototype {rank} (row {idx}): {rendering}")
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
    return records, "\n".join(text_lines)
