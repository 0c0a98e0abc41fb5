"""Command-line entry points.

Exit codes: 0 success, 2 configuration/usage errors, 3 empty shortlist,
4 runtime failures (model training, evaluation, I/O during the run).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import context as ctx
from . import explainers
from .data import DataError
from .evaluator import EvaluationError
from .models import ModelError
from .pipeline import ConfigError, RunConfig, explain_with
from .pipeline import run as run_pipeline

EXIT_CONFIG = 2
EXIT_EMPTY_SHORTLIST = 3
EXIT_RUNTIME = 4


@click.group()
def main():
    """Recommend, tune and rank explanation methods for a model/dataset."""


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Overrides run.seed.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
def run_cmd(config_path, seed, out_dir):
    """Execute a full recommendation run from a JSON config."""
    try:
        config = RunConfig.load(config_path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    if seed is not None:
        config.run["seed"] = int(seed)
    out = out_dir or config.output_dir or "out"
    try:
        result = run_pipeline(config, out)
    except ctx.ShortlistEmpty as exc:
        _fail(EXIT_EMPTY_SHORTLIST, str(exc))
    except (DataError, ModelError, EvaluationError, OSError) as exc:
        _fail(EXIT_RUNTIME, str(exc))
    except (ConfigError, ctx.RegistryError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    ranking = result["ranking"]
    click.echo(f"wrote {result['out_dir']}/ranking.csv ({len(ranking)} rows)")
    if ranking:
        top = ranking[0]
        click.echo(
            f"best: {top.solution_id} aggregated={top.aggregated:.3f} "
            f"h={top.hyperparameters}"
        )


@main.command("list-solutions")
def list_solutions_cmd():
    """Show registered explainers with their context tags and spaces."""
    registry = ctx.load_registry()
    for sid in explainers.SOLUTION_IDS:
        entry = registry.explainer(sid)
        d = 10 if entry["family"] == "attribution" else None
        desc = explainers.describe(sid, d=d, registry=registry)
        click.echo(f"{sid}  [{entry['family']}]")
        click.echo(f"  answers: {', '.join(desc.explanandum_tags)}")
        click.echo(f"  explanan: {desc.explanan_tag}")
        for p in desc.space.params:
            if p.kind == "categorical":
                domain = "{" + ", ".join(p.options) + "}"
            else:
                domain = f"[{p.lo}, {p.hi}]" + (" log" if p.log_scale else "")
            click.echo(f"  {p.name}: {p.kind} {domain} (default {p.default})")
    click.echo("\nmetrics:")
    for m in registry.metrics:
        click.echo(
            f"  {m['id']}: {m['property']} ({m['orientation']}, {m['explanan']})"
        )


@main.command("explain")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--solution", "solution_id", required=True)
@click.option("--hp", "hp_string", default="", help="Comma-separated k=v pairs.")
@click.option("--targets", default="", help="Comma-separated row indices.")
@click.option("--out", "out_path", type=click.Path(), default=None)
def explain_cmd(config_path, solution_id, hp_string, targets, out_path):
    """Run one explainer at explicit hyperparameters and print the result."""
    try:
        config = RunConfig.load(config_path)
        h = _parse_hp(hp_string)
        target_list = [int(t) for t in targets.split(",") if t.strip()]
    except (ConfigError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    if solution_id not in explainers.SOLUTION_IDS:
        _fail(EXIT_CONFIG, f"unknown solution {solution_id!r}")
    try:
        _, rendered = explain_with(config, solution_id, h, target_list, out_path)
    except (DataError, ModelError, explainers.ExplainerError, OSError) as exc:
        _fail(EXIT_RUNTIME, str(exc))
    except (ValueError, ConfigError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    click.echo(rendered)
    if out_path:
        click.echo(f"wrote {out_path}")


def _parse_hp(hp_string: str) -> dict:
    h: dict = {}
    for pair in hp_string.split(","):
        pair = pair.strip()
        if not pair:
            continue
        if "=" not in pair:
            raise ValueError(f"bad hyperparameter {pair!r}, expected k=v")
        key, value = pair.split("=", 1)
        try:
            h[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            h[key.strip()] = value.strip()
    return h


@main.command("wizard")
@click.option("--out", "out_path", type=click.Path(), default="run_config.json")
def wizard_cmd(out_path):
    """Interactively build a run config; aborts leave no partial file."""
    registry = ctx.load_registry()
    try:
        click.echo("What should the explanation answer?")
        questions = ctx.list_questions(registry)
        for i, (qid, text) in enumerate(questions):
            click.echo(f"  [{i}] {text} ({qid})")
        qi = click.prompt("choice", type=click.IntRange(0, len(questions) - 1))
        explanandum = questions[qi][0]

        click.echo("What form should the explanation take?")
        forms = ctx.list_explanans(registry)
        for i, (aid, label) in enumerate(forms):
            click.echo(f"  [{i}] {label} ({aid})")
        ai = click.prompt("choice", type=click.IntRange(0, len(forms) - 1))
        explanan = forms[ai][0]

        weights = {}
        metric_ids = [
            m["id"] for m in registry.metrics if m["explanan"] == explanan
        ]
        click.echo("Importance weight per quality metric (0 disables it):")
        for mid in metric_ids:
            weights[mid] = click.prompt(f"  {mid}", type=float, default=1.0)
        try:
            ctx.validate_weights(weights)
        except ValueError as exc:
            _fail(EXIT_CONFIG, str(exc))

        kind = click.prompt(
            "dataset kind", type=click.Choice(["csv", "text"]), default="csv"
        )
        dataset: dict = {"kind": kind, "path": click.prompt("dataset path")}
        model = None
        if kind == "csv":
            dataset["task"] = click.prompt(
                "task", type=click.Choice(["regression", "classification"])
            )
            dataset["target_column"] = click.prompt(
                "target column", default="target"
            )
            model = {"kind": "mlp"}
        else:
            if click.confirm("have per-document labels?", default=False):
                dataset["labels_path"] = click.prompt("labels path")
            if click.confirm("have model predictions to slice by?", default=False):
                dataset["predictions_path"] = click.prompt("predictions path")
                dataset["subset"] = click.prompt(
                    "confusion cell",
                    type=click.Choice(
                        [
                            "true_positives", "true_negatives",
                            "false_positives", "false_negatives",
                        ]
                    ),
                    default="false_positives",
                )

        epochs = click.prompt("optimization epochs per solution", type=int, default=25)
        seed = click.prompt("random seed", type=int, default=0)
    except click.Abort:
        click.echo("\naborted; nothing written", err=True)
        sys.exit(EXIT_CONFIG)

    config = {
        "dataset": dataset,
        "context": {
            "explanandum": explanandum,
            "explanan": explanan,
            "weights": weights,
        },
        "run": {"epochs": epochs, "seed": seed},
    }
    if model is not None:
        config["model"] = model
    try:
        RunConfig.from_dict(config)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    Path(out_path).write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    click.echo(f"wrote {out_path}")


@main.command("bench-strategies")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", type=click.Path(), default="bench_out")
@click.option(
    "--epochs", type=int, default=None, help="Override run.epochs for the grid."
)
def bench_strategies_cmd(config_path, out_dir, epochs):
    """Time a run under each time-saving strategy combination."""
    from .bench import bench_strategies

    try:
        config = RunConfig.load(config_path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    if epochs is not None:
        config.run["epochs"] = int(epochs)
    try:
        rows = bench_strategies(config, out_dir)
    except ctx.ShortlistEmpty as exc:
        _fail(EXIT_EMPTY_SHORTLIST, str(exc))
    except (DataError, ModelError, EvaluationError, OSError) as exc:
        _fail(EXIT_RUNTIME, str(exc))
    click.echo(f"{'variant':<28} {'seconds':>9} {'best aggregated':>16}")
    for row in rows:
        click.echo(f"{row['variant']:<28} {row['seconds']:>9.2f} {row['best']:>16.3f}")
    click.echo(f"wrote {out_dir}/bench_strategies.json")


if __name__ == "__main__":
    main()
