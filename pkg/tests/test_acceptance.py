"""End-to-end acceptance gate.

One test per release criterion; each prints a single PASS/FAIL line so the
suite output doubles as the sign-off checklist. The heavyweight criteria
(7, 8) run the bundled tabular use case at full size and are the slow part
of the suite.
"""

import json
import time
from contextlib import contextmanager
from itertools import combinations

import numpy as np
import pytest

from xairec import data, explainers, models
from xairec._kernels import numpy_impl
from xairec.context import load_registry, shortlist
from xairec.evaluator import TrialLedger, TrialRecord, aggregate
from xairec.explainers import kernel_shap, prototypes
from xairec.explainers.base import FeatureAttribution, HyperparameterSpace, Param
from xairec.hpo import run_hpo
from xairec.metrics import infidelity, non_representativeness, diversity, robustness
from xairec.models import LinearModel, PredictiveFunction
from xairec.pipeline import RunConfig, run
from xairec.strategies import RobustnessMaximaCache, InfidelityPerturbationCache, StopController

from tests.conftest import DIABETES_PATH
from tests.test_evaluator import ATTRIB_WEIGHTS, PROTO_WEIGHTS, TABULAR_ROWS, TEXT_ROWS
from tests.test_kernel_shap import ProductModel, brute_force_shapley
from tests.test_pipeline import _tiny_csv


@contextmanager
def criterion(number, label):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"criterion {number} ({label}): FAIL")
        raise
    print(f"criterion {number} ({label}): PASS [{time.perf_counter() - start:.1f}s]")


def _ds_from(X):
    X = np.asarray(X, dtype=float)
    return data.Dataset(
        X=X, y=np.zeros(len(X)),
        feature_names=tuple(f"f{i}" for i in range(X.shape[1])),
        feature_mean=X.mean(axis=0), feature_std=X.std(axis=0),
        task="regression", standardized=True,
    )


def test_criterion_01_aggregation_reproduces_published_rows():
    with criterion(1, "aggregation arithmetic on published rows"):
        for agg, rob, infd, nof in TABULAR_ROWS:
            scaled = {"robustness": rob, "infidelity": infd,
                      "number_of_features": nof}
            assert aggregate(scaled, ATTRIB_WEIGHTS) == pytest.approx(agg, abs=0.0015)
        for agg, nr, div, nop in TEXT_ROWS:
            scaled = {"non_representativeness": nr, "diversity": div,
                      "number_of_prototypes": nop}
            assert aggregate(scaled, PROTO_WEIGHTS) == pytest.approx(agg, abs=0.0015)


def test_criterion_02_kernel_shap_exact_on_full_enumeration():
    with criterion(2, "kernel SHAP equals brute-force Shapley, d<=5"):
        start = time.perf_counter()
        for d in (2, 3, 4, 5):
            rng = np.random.default_rng(1000 + d)
            for _ in range(3):
                for model in (
                    LinearModel(rng.normal(size=d), b=float(rng.normal())),
                    ProductModel(rng.uniform(0.5, 1.5, size=d)),
                ):
                    x = rng.normal(size=d)
                    background = rng.normal(size=d)
                    phi = kernel_shap.explain_point(
                        model, x, background, d, 2**d, "auto", rng
                    )
                    oracle = brute_force_shapley(model, x, background)
                    np.testing.assert_allclose(phi, oracle, atol=1e-6)
        assert time.perf_counter() - start < 10.0


def test_criterion_03_infidelity_null_for_exact_gradient():
    with criterion(3, "infidelity < 1e-12 for exact gradients"):
        start = time.perf_counter()
        rng = np.random.default_rng(7)
        w = rng.normal(size=4)
        model = LinearModel(w, b=0.3)
        ds = _ds_from(rng.normal(size=(25, 4)))
        exps = [FeatureAttribution.from_dense(t, w) for t in range(ds.n)]
        res = infidelity(exps, model, ds, seed=0)
        assert all(s < 1e-12 for s in res.per_item_scores)
        assert time.perf_counter() - start < 1.0


def test_criterion_04_robustness_calibration():
    with criterion(4, "robustness identity/constant/linear calibration"):
        start = time.perf_counter()
        rng = np.random.default_rng(11)
        ds = _ds_from(rng.normal(size=(8, 2)))
        ident = robustness(lambda x, t: x, ds, range(ds.n), seed=0)
        assert ident.aggregate == pytest.approx(1.0, abs=1e-9)
        const = robustness(lambda x, t: np.ones(2), ds, range(ds.n), seed=0)
        assert const.aggregate == 0.0
        A = np.diag([3.0, 1.0])
        res = robustness(
            lambda x, t: A @ x, ds, range(ds.n), seed=0,
            params={"candidates_per_point": 200, "refine_rounds": 2},
        )
        assert 2.5 <= res.aggregate <= 3.0
        assert time.perf_counter() - start < 5.0


def test_criterion_05_prototype_metric_and_pam_oracles():
    with criterion(5, "prototype metric brute-force oracles + exact PAM"):
        start = time.perf_counter()
        for seed in range(50):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(4, 21))
            ds = _ds_from(rng.normal(size=(n, 3)))
            k = int(rng.integers(2, min(5, n)))
            idx = sorted(rng.choice(n, size=k, replace=False).tolist())
            protos = prototypes.PrototypeSet(
                prototype_indices=tuple(idx),
                prototype_weights=tuple([1.0] * k),
            )
            X = ds.dense()
            # brute-force double loops, independent of the library kernels
            nr_oracle = np.mean([
                min(np.linalg.norm(X[i] - X[j]) for j in idx) for i in range(n)
            ])
            div_oracle = np.mean([
                np.linalg.norm(X[a] - X[b]) for a, b in combinations(idx, 2)
            ])
            assert non_representativeness(protos, ds).aggregate == pytest.approx(
                nr_oracle, abs=1e-9
            )
            assert diversity(protos, ds).aggregate == pytest.approx(
                div_oracle, abs=1e-9
            )
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            n = int(rng.integers(4, 9))
            ds = _ds_from(rng.normal(size=(n, 2)))
            D = prototypes.distance_matrix(ds.X, "euclidean")
            got = prototypes.kmedoids_explain(
                ds,
                {"k": 2, "init": "build", "max_iter": 100,
                 "algorithm": "pam", "metric": "euclidean"},
                seed=0,
            )
            got_cost = numpy_impl.total_cost(
                D, np.asarray(got.prototype_indices, dtype=np.intp)
            )
            best_cost = min(
                numpy_impl.total_cost(D, np.asarray(pair, dtype=np.intp))
                for pair in combinations(range(n), 2)
            )
            assert got_cost == pytest.approx(best_cost, abs=1e-9)
        assert time.perf_counter() - start < 10.0


def test_criterion_06_bayesian_optimization_convergence():
    with criterion(6, "BO finds -(x-0.7)^2 optimum for >=18/20 seeds"):
        start = time.perf_counter()
        space = HyperparameterSpace(
            (Param("x", "continuous", 0.0, 1.0, default=0.5),)
        )
        hits = 0
        for seed in range(20):
            ledger = TrialLedger({"diversity": 1.0})
            run_hpo(
                "probe", space,
                lambda sid, h: ({"diversity": -((h["x"] - 0.7) ** 2)}, {}),
                ledger, epochs=20, seed=seed,
            )
            if abs(ledger.best("probe").hyperparameters["x"] - 0.7) <= 0.05:
                hits += 1
        assert hits >= 18
        assert time.perf_counter() - start < 30.0


def _use_case_1_config(tmp_path):
    raw = json.loads(open("configs/use_case_1.json").read())
    raw["dataset"]["path"] = str(DIABETES_PATH)
    raw.pop("output_dir", None)
    p = tmp_path / "uc1.json"
    p.write_text(json.dumps(raw))
    return RunConfig.load(p)


def test_criterion_07_end_to_end_determinism_and_shape(tmp_path):
    with criterion(7, "full tabular run: deterministic, in-domain, both solutions ranked"):
        start = time.perf_counter()
        cfg = _use_case_1_config(tmp_path)
        a = run(cfg, tmp_path / "a")
        run(_use_case_1_config(tmp_path), tmp_path / "b")
        assert (tmp_path / "a/ranking.csv").read_bytes() == \
            (tmp_path / "b/ranking.csv").read_bytes()
        assert (tmp_path / "a/ranking.json").read_bytes() == \
            (tmp_path / "b/ranking.json").read_bytes()

        ranking = a["ranking"]
        assert ranking, "empty ranking"
        d = 10  # diabetes feature count
        for row in ranking:
            space = explainers._space(row.solution_id, d=d)
            space.validate(row.hyperparameters)  # raises if out of domain
        assert {r.solution_id for r in ranking} == {"lime", "kernel_shap"}
        assert time.perf_counter() - start < 900.0


class _CountingModel(PredictiveFunction):
    task = "regression"
    model_kind = "counting"

    def __init__(self, inner):
        self.inner = inner
        self.rows = 0

    def predict(self, X):
        self.rows += np.atleast_2d(X).shape[0]
        return self.inner.predict(X)


def test_criterion_08_time_saving_strategies():
    with criterion(8, "early stopping / information sharing effectiveness"):
        ds = data.standardize(
            data.load_csv(str(DIABETES_PATH), target_column="target",
                          task="regression")
        )
        model = models.train_mlp(ds, hidden_width=32, max_epochs=60, seed=0)
        fn = explainers.attribution_point_fn(
            "lime", model, ds, {"num_features": 5, "num_perturbations": 200}, 0
        )
        targets = range(ds.n)

        cache = RobustnessMaximaCache()
        t0 = time.perf_counter()
        full = robustness(fn, ds, targets, seed=0, cache=cache,
                          cache_family="lime")
        t_full = time.perf_counter() - t0

        t0 = time.perf_counter()
        es = robustness(fn, ds, targets, seed=0,
                        controller=StopController.for_metric())
        t_es = time.perf_counter() - t0
        drift = abs(es.aggregate - full.aggregate) / abs(full.aggregate)
        assert 1.0 - t_es / t_full >= 0.80, f"early stop saved {1 - t_es / t_full:.1%}"
        assert drift <= 0.10, f"early stop drift {drift:.1%}"

        # both strategies: the cache warmed by the first trial plus stopping
        t0 = time.perf_counter()
        both = robustness(fn, ds, targets, seed=0, cache=cache,
                          cache_family="lime",
                          controller=StopController.for_metric())
        t_both = time.perf_counter() - t0
        drift_b = abs(both.aggregate - full.aggregate) / abs(full.aggregate)
        assert 1.0 - t_both / t_full >= 0.90, f"both saved {1 - t_both / t_full:.1%}"
        assert drift_b <= 0.10, f"both drift {drift_b:.1%}"

        # infidelity sharing: the second seed-matched trial reuses the cached
        # perturbations and their model values, so the model is never called
        rng = np.random.default_rng(2)
        counting = _CountingModel(model)
        sub = _ds_from(ds.dense()[:50])
        exps = [
            FeatureAttribution.from_dense(t, rng.normal(size=sub.d))
            for t in range(sub.n)
        ]
        icache = InfidelityPerturbationCache()
        first = infidelity(exps, counting, sub, seed=0, cache=icache)
        rows_first = counting.rows
        counting.rows = 0
        second = infidelity(exps, counting, sub, seed=0, cache=icache)
        eliminated = 1.0 - counting.rows / rows_first
        assert eliminated >= 0.90, f"only {eliminated:.1%} of model rows eliminated"
        for x, y in zip(first.per_item_scores, second.per_item_scores):
            assert abs(x - y) <= 1e-12


def test_criterion_09_context_filtering_and_zero_weight_invariance():
    with criterion(9, "context shortlists + zero-weight insensitivity"):
        start = time.perf_counter()
        registry = load_registry()
        sols, mets = shortlist("why-this-prediction", "feature-summary", {},
                               registry)
        assert sols == ["lime", "kernel_shap"]
        assert mets == ["robustness", "infidelity", "number_of_features"]
        sols, mets = shortlist("what-data-lead", "data-point", {}, registry)
        assert sols == ["kmedoids", "mmd_critic", "protodash"]
        assert mets == ["non_representativeness", "diversity",
                        "number_of_prototypes"]
        _, mets = shortlist("why-this-prediction", "feature-summary",
                            {"number_of_features": 0.0}, registry)
        assert "number_of_features" not in mets

        # ranking is invariant to any permutation of a zero-weight metric
        rng = np.random.default_rng(3)
        weights = {"robustness": 1.0, "infidelity": 2.0,
                   "number_of_features": 0.0}
        raws = [
            {"robustness": float(rng.uniform(0.5, 3)),
             "infidelity": float(rng.uniform(0, 1)),
             "number_of_features": float(rng.integers(1, 10))}
            for _ in range(8)
        ]

        def ranked_ids(nof_values):
            ledger = TrialLedger(weights)
            for i, raw in enumerate(raws):
                ledger.insert(TrialRecord(
                    solution_id=f"s{i}", hyperparameters={"p": i},
                    raw_scores={**raw, "number_of_features": nof_values[i]},
                    epoch=0,
                ))
            ledger.rescore_all()
            return [t.solution_id for t in ledger.ranking()]

        base = [raw["number_of_features"] for raw in raws]
        reference = ranked_ids(base)
        for _ in range(5):
            assert ranked_ids(list(rng.permutation(base))) == reference
        assert time.perf_counter() - start < 1.0


def test_criterion_10_strategies_off_equals_neutral(tmp_path):
    with criterion(10, "disabled strategies bit-identical to never-firing ones"):
        csv_path = _tiny_csv(tmp_path)
        never = {"relative_threshold": 1e-300, "patience": 10**6,
                 "min_samples": 10**6}
        neutral = {
            "sampling_fraction": 1.0,
            "metric_early_stopping": True,
            "hpo_early_stopping": True,
            "share_infidelity": True,
            "share_robustness": False,
            "metric_stop": never,
            "hpo_stop": dict(never),
        }

        def cfg(strategies):
            return RunConfig.from_dict({
                "dataset": {"kind": "csv", "path": csv_path,
                            "target_column": "target", "task": "regression"},
                "model": {"kind": "mlp", "hidden_width": 8, "max_epochs": 5,
                          "train_seed": 0},
                "context": {"explanandum": "why-this-prediction",
                            "explanan": "feature-summary",
                            "weights": {"robustness": 1, "infidelity": 2,
                                        "number_of_features": 0.5}},
                "run": {"epochs": 2, "seed": 0, "strategies": strategies,
                        "metric_params": {
                            "robustness": {"candidates_per_point": 3,
                                           "refine_rounds": 1},
                            "infidelity": {"num_perturbations": 20},
                        }},
            })

        run(cfg({}), tmp_path / "off")
        run(cfg(neutral), tmp_path / "neutral")
        for name in ("ranking.csv", "ranking.json"):
            assert (tmp_path / "off" / name).read_bytes() == \
                (tmp_path / "neutral" / name).read_bytes(), name
