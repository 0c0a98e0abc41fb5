"""Timing grid over the time-saving strategies.

Runs the same configured pipeline once per strategy variant (everything off,
each strategy alone, everything on) and reports wall time plus the best
aggregated score, so the cost/benefit of each shortcut is visible on the
user's own data.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from .pipeline import RunConfig, run

VARIANTS = [
    ("no_strategies", {}),
    ("sampling_0.1", {"sampling_fraction": 0.1}),
    ("metric_early_stop", {"metric_early_stopping": True}),
    ("hpo_early_stop", {"hpo_early_stopping": True}),
    ("share_infidelity", {"share_infidelity": True}),
    ("share_robustness", {"share_robustness": True}),
    (
        "all_strategies",
        {
            "sampling_fraction": 0.1,
            "metric_early_stopping": True,
            "hpo_early_stopping": True,
            "share_infidelity": True,
            "share_robustness": True,
        },
    ),
]


def bench_strategies(config: RunConfig, out_dir) -> list[dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, overrides in VARIANTS:
        raw = {
            "dataset": config.dataset,
            "context": config.context,
            "run": {**config.run, "strategies": overrides},
        }
        if config.model is not None:
            raw["model"] = config.model
        variant_cfg = RunConfig.from_dict(raw)
        t0 = time.perf_counter()
        result = run(variant_cfg, out / name)
        seconds = time.perf_counter() - t0
        ranking = result["ranking"]
        rows.append(
            {
                "variant": name,
                "seconds": seconds,
                "best": ranking[0].aggregated if ranking else float("nan"),
                "trials": len(result["ledger"].trials),
            }
        )
    (out / "bench_strategies.json").write_text(
        json.dumps(rows, indent=2) + "\n", encoding="utf-8"
    )
    return rows
