"""Gaussian-process Bayesian optimization of the aggregated score.

Hyperparameters are encoded into the unit hypercube (min-max for numeric
parameters, optionally in log space; one-hot for categoricals). A zero-mean
GP with an isotropic squared-exponential kernel is fit on standardized
targets, the length-scale picked from a small grid by marginal likelihood,
and new points chosen by expected improvement over random candidates.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from .evaluator import TrialLedger, TrialRecord
from .explainers.base import HyperparameterSpace, Param
from .strategies import StopController

LENGTH_SCALE_GRID = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)
BASE_JITTER = 1e-6
MAX_JITTER = 1e-2
EI_XI = 0.01
N_RANDOM_CANDIDATES = 512
N_INCUMBENT_CANDIDATES = 32
INCUMBENT_SIGMA = 0.05
RANDOM_WARMUP_EPOCHS = 3


class HpoError(RuntimeError):
    pass


def _blocks(space: HyperparameterSpace) -> list[tuple[Param, int]]:
    return [
        (p, len(p.options) if p.kind == "categorical" else 1) for p in space.params
    ]


def encoded_dim(space: HyperparameterSpace) -> int:
    return sum(width for _, width in _blocks(space))


def _to_unit(p: Param, value) -> float:
    if p.log_scale:
        return (np.log(value) - np.log(p.lo)) / (np.log(p.hi) - np.log(p.lo))
    return (value - p.lo) / (p.hi - p.lo)


def _from_unit(p: Param, u: float):
    u = min(max(float(u), 0.0), 1.0)
    if p.log_scale:
        v = float(np.exp(np.log(p.lo) + u * (np.log(p.hi) - np.log(p.lo))))
    else:
        v = p.lo + u * (p.hi - p.lo)
    if p.kind == "integer":
        return int(min(max(np.floor(v + 0.5), p.lo), p.hi))  # round half up
    return float(min(max(v, p.lo), p.hi))


def encode(space: HyperparameterSpace, assignment: dict) -> np.ndarray:
    assignment = space.validate(assignment)
    coords: list[float] = []
    for p, width in _blocks(space):
        if p.kind == "categorical":
            block = [0.0] * width
            block[p.options.index(assignment[p.name])] = 1.0
            coords.extend(block)
        else:
            coords.append(_to_unit(p, assignment[p.name]))
    return np.asarray(coords)


def decode(space: HyperparameterSpace, point: np.ndarray) -> dict:
    out = {}
    i = 0
    for p, width in _blocks(space):
        if p.kind == "categorical":
            out[p.name] = p.options[int(np.argmax(point[i : i + width]))]
        else:
            out[p.name] = _from_unit(p, point[i])
        i += width
    return out


def sample_point(space: HyperparameterSpace, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(size=encoded_dim(space))


@dataclass
class GpPosterior:
    X: np.ndarray
    y_std: np.ndarray  # standardized targets
    y_mean: float
    y_scale: float
    length_scale: float
    jitter: float
    _cho: tuple
    _alpha: np.ndarray

    def predict(self, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and std (standardized target space)."""
        Kq = _se_kernel(Xq, self.X, self.length_scale)
        mean = Kq @ self._alpha
        v = cho_solve(self._cho, Kq.T)
        var = 1.0 + self.jitter - np.einsum("ij,ji->i", Kq, v)
        return mean, np.sqrt(np.maximum(var, 0.0))

    def best_standardized(self) -> float:
        return float(self.y_std.max())

    def incumbent_point(self) -> np.ndarray:
        return self.X[int(np.argmax(self.y_std))]


def _se_kernel(A: np.ndarray, B: np.ndarray, ell: float) -> np.ndarray:
    sq = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-sq / (2.0 * ell**2))


def _log_marginal_likelihood(X, y, ell, jitter):
    n = len(y)
    K = _se_kernel(X, X, ell) + jitter * np.eye(n)
    cho = cho_factor(K, lower=True)
    alpha = cho_solve(cho, y)
    logdet = 2.0 * np.log(np.diag(cho[0])).sum()
    return -0.5 * y @ alpha - 0.5 * logdet - 0.5 * n * np.log(2 * np.pi), cho, alpha


def fit_gp(observations: list[tuple[np.ndarray, float]]) -> GpPosterior:
    """Zero-mean GP on standardized targets; length-scale by max LML.

    Exact-duplicate inputs with conflicting targets are averaged. The jitter
    escalates x10 (up to 1e-2) if the covariance fails to factorize.
    """
    if len(observations) < 2:
        raise HpoError("need at least 2 observations to fit the surrogate")
    merged: dict[tuple, list[float]] = {}
    for x, y in observations:
        merged.setdefault(tuple(np.round(np.asarray(x, dtype=float), 12)), []).append(
            float(y)
        )
    X = np.asarray([list(k) for k in merged])
    y_raw = np.asarray([float(np.mean(v)) for v in merged.values()])
    y_mean = float(y_raw.mean())
    y_scale = float(y_raw.std())
    if y_scale < 1e-12:
        y_scale = 1.0
    y = (y_raw - y_mean) / y_scale

    best = None
    jitter = BASE_JITTER
    while True:
        try:
            for ell in LENGTH_SCALE_GRID:
                lml, cho, alpha = _log_marginal_likelihood(X, y, ell, jitter)
                if best is None or lml > best[0]:
                    best = (lml, ell, cho, alpha, jitter)
            break
        except np.linalg.LinAlgError:
            best = None
            jitter *= 10
            if jitter > MAX_JITTER:
                raise HpoError("covariance factorization failed at max jitter")
    _, ell, cho, alpha, jitter = best
    return GpPosterior(
        X=X,
        y_std=y,
        y_mean=y_mean,
        y_scale=y_scale,
        length_scale=ell,
        jitter=jitter,
        _cho=cho,
        _alpha=alpha,
    )


def expected_improvement(
    posterior: GpPosterior, Xq: np.ndarray, xi: float = EI_XI
) -> np.ndarray:
    mean, std = posterior.predict(Xq)
    best = posterior.best_standardized()
    improve = mean - best - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, improve / np.where(std > 0, std, 1.0), 0.0)
        ei = np.where(std > 0, improve * norm.cdf(z) + std * norm.pdf(z), 0.0)
    return np.maximum(ei, 0.0)


def propose(
    posterior: GpPosterior,
    space: HyperparameterSpace,
    rng: np.random.Generator,
    evaluated: set | None = None,
) -> dict:
    """Argmax of expected improvement over random + incumbent-local
    candidates; an exact-duplicate proposal is re-perturbed once, then
    accepted as is."""
    dim = encoded_dim(space)
    cands = [rng.uniform(size=(N_RANDOM_CANDIDATES, dim))]
    inc = posterior.incumbent_point()
    cands.append(
        np.clip(
            inc + rng.normal(scale=INCUMBENT_SIGMA, size=(N_INCUMBENT_CANDIDATES, dim)),
            0.0,
            1.0,
        )
    )
    Xq = np.vstack(cands)
    ei = expected_improvement(posterior, Xq)
    best = Xq[int(np.argmax(ei))]
    assignment = decode(space, best)
    if evaluated is not None and _key(assignment) in evaluated:
        jiggled = np.clip(best + rng.normal(scale=INCUMBENT_SIGMA, size=dim), 0.0, 1.0)
        assignment = decode(space, jiggled)
    return assignment


def _key(assignment: dict) -> tuple:
    return tuple(sorted(assignment.items()))


def _solution_rng(seed: int, solution_id: str) -> np.random.Generator:
    return np.random.default_rng((seed, zlib.crc32(solution_id.encode())))


def run_hpo(
    solution_id: str,
    space: HyperparameterSpace,
    evaluate_fn,
    ledger: TrialLedger,
    epochs: int,
    seed: int,
    stopper: StopController | None = None,
) -> list[TrialRecord]:
    """Propose / explain / evaluate / rescore loop for one solution.

    The first epochs after cold start are random proposals (exploration
    seed); failed trials are remembered to avoid re-proposal but excluded
    from the surrogate's training set.
    """
    rng = _solution_rng(seed, solution_id)
    evaluated = {
        _key(t.hyperparameters)
        for t in ledger.trials
        if t.solution_id == solution_id
    }

    for epoch in range(epochs):
        observations = [
            (encode(space, t.hyperparameters), t.aggregated)
            for t in ledger.trials
            if t.solution_id == solution_id and not t.failed
        ]
        if epoch < RANDOM_WARMUP_EPOCHS or len(observations) < 2:
            h = decode(space, sample_point(space, rng))
            if _key(h) in evaluated:
                h = decode(space, sample_point(space, rng))
        else:
            posterior = fit_gp(observations)
            h = propose(posterior, space, rng, evaluated)
        evaluated.add(_key(h))

        start = time.perf_counter()
        try:
            raw, extra = evaluate_fn(solution_id, h)
            trial = TrialRecord(
                solution_id=solution_id,
                hyperparameters=h,
                raw_scores=raw,
                epoch=epoch,
                wall_time=time.perf_counter() - start,
                **extra,
            )
        except Exception:  # noqa: BLE001 - recorded as a failed trial
            trial = TrialRecord(
                solution_id=solution_id,
                hyperparameters=h,
                raw_scores={},
                epoch=epoch,
                failed=True,
                wall_time=time.perf_counter() - start,
            )
        ledger.insert(trial)
        ledger.rescore_all()

        if stopper is not None:
            best = ledger.best(solution_id)
            if best is not None and stopper.observe(best.aggregated) == "stop":
                break

    return [t for t in ledger.trials if t.solution_id == solution_id]
