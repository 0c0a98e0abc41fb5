"""Black-box predictive functions: a small numpy MLP, linear/logistic models
and an external predictions table.

The MLP is trained with Adam so that training is fully deterministic per
seed and so that ``analytic_gradient`` (backprop w.r.t. the input) is
available for gradient-check tests and metric oracles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, DataError

ADAM_STEP = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
BATCH_SIZE = 32
VALIDATION_FRACTION = 0.1
PATIENCE_EPOCHS = 10

MODEL_FILE_VERSION = 1


class ModelError(RuntimeError):
    pass


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class PredictiveFunction:
    """Deterministic f: observation matrix -> real vector.

    Regression returns raw outputs; classification returns the probability
    of the positive class, always in [0, 1].
    """

    task: str
    model_kind: str

    def predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """d(predict)/dx at a single point x."""
        raise NotImplementedError(f"no analytic gradient for {self.model_kind}")


def analytic_gradient(model: PredictiveFunction, x: np.ndarray) -> np.ndarray:
    if model.model_kind not in ("mlp", "linear", "logistic"):
        raise ModelError(f"unsupported model kind {model.model_kind!r}")
    return model.gradient(np.asarray(x, dtype=float))


class LinearModel(PredictiveFunction):
    """w·x + b, optionally squashed through a logistic for classification."""

    def __init__(self, w, b: float = 0.0, task: str = "regression", logistic=None):
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)
        self.task = task
        if logistic is None:
            logistic = task == "classification"
        self._logistic = logistic
        self.model_kind = "logistic" if logistic else "linear"

    def predict(self, X):
        z = np.atleast_2d(X) @ self.w + self.b
        return _sigmoid(z) if self._logistic else z

    def gradient(self, x):
        if self._logistic:
            p = float(self.predict(x[None, :])[0])
            return p * (1.0 - p) * self.w
        return self.w.copy()


class ExternalModel(PredictiveFunction):
    """Row-index lookup over an externally supplied predictions vector.

    Used when the real model is unavailable and only its outputs on the
    dataset rows are known; supports lookups only.
    """

    def __init__(self, predictions, task: str = "classification"):
        self.predictions = np.asarray(predictions, dtype=float)
        self.task = task
        self.model_kind = "external"

    def predict_rows(self, indices) -> np.ndarray:
        return self.predictions[np.asarray(indices, dtype=int)]

    def predict(self, X):
        raise ModelError("external model serves row lookups only")


@dataclass
class MlpModel(PredictiveFunction):
    """One hidden ReLU layer; linear (regression) or logistic (classification)
    output."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float
    task: str
    seed: int
    model_kind: str = field(default="mlp")

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        h = np.maximum(X @ self.W1 + self.b1, 0.0)
        z = h @ self.W2 + self.b2
        return _sigmoid(z) if self.task == "classification" else z

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        pre = x @ self.W1 + self.b1
        active = (pre > 0).astype(float)
        g = self.W1 @ (active * self.W2)
        if self.task == "classification":
            p = float(self.predict(x[None, :])[0])
            g = p * (1.0 - p) * g
        return g

    @property
    def hidden_width(self) -> int:
        return self.W1.shape[1]


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _loss(model_out, y, task):
    if task == "classification":
        p = np.clip(model_out, 1e-12, 1 - 1e-12)
        return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))
    return float(np.mean((model_out - y) ** 2))


def train_mlp(
    ds: Dataset,
    hidden_width: int = 100,
    max_epochs: int = 200,
    seed: int = 0,
) -> MlpModel:
    """Mini-batch Adam with a 10% validation split and patience-10 early stop.

    Loss is MSE for regression, log-loss for classification. Deterministic
    per seed (shuffling, init and split all come from one generator).
    """
    if ds.n < 10:
        raise ModelError(f"need at least 10 rows to train, got {ds.n}")
    rng = np.random.default_rng(seed)
    X, y = ds.dense().astype(float), ds.y.astype(float)
    n, d = X.shape

    perm = rng.permutation(n)
    n_val = max(1, int(round(VALIDATION_FRACTION * n)))
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    Xtr, ytr, Xval, yval = X[tr_idx], y[tr_idx], X[val_idx], y[val_idx]

    params = {
        "W1": _glorot(rng, d, hidden_width),
        "b1": np.zeros(hidden_width),
        "W2": _glorot(rng, hidden_width, 1).ravel(),
        "b2": np.zeros(1),
    }
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(v) for k, v in params.items()}
    t = 0

    def forward(Xb):
        pre = Xb @ params["W1"] + params["b1"]
        h = np.maximum(pre, 0.0)
        z = h @ params["W2"] + params["b2"][0]
        out = _sigmoid(z) if ds.task == "classification" else z
        return pre, h, out

    def grads(Xb, yb):
        pre, h, out = forward(Xb)
        # dL/dz is (out - y)/B for both MSE/linear (x2 folded into the step
        # scale-free Adam) and log-loss/sigmoid.
        if ds.task == "classification":
            dz = (out - yb) / len(yb)
        else:
            dz = 2.0 * (out - yb) / len(yb)
        gW2 = h.T @ dz
        gb2 = np.array([dz.sum()])
        dh = np.outer(dz, params["W2"]) * (pre > 0)
        gW1 = Xb.T @ dh
        gb1 = dh.sum(axis=0)
        return {"W1": gW1, "b1": gb1, "W2": gW2, "b2": gb2}

    best_val = np.inf
    best_params = {k: p.copy() for k, p in params.items()}
    stale = 0
    train_losses = [_loss(forward(Xtr)[2], ytr, ds.task)]
    for epoch in range(max_epochs):
        order = rng.permutation(len(Xtr))
        for start in range(0, len(Xtr), BATCH_SIZE):
            batch = order[start : start + BATCH_SIZE]
            g = grads(Xtr[batch], ytr[batch])
            t += 1
            for k in params:
                m[k] = ADAM_BETA1 * m[k] + (1 - ADAM_BETA1) * g[k]
                v[k] = ADAM_BETA2 * v[k] + (1 - ADAM_BETA2) * g[k] ** 2
                mhat = m[k] / (1 - ADAM_BETA1**t)
                vhat = v[k] / (1 - ADAM_BETA2**t)
                params[k] = params[k] - ADAM_STEP * mhat / (np.sqrt(vhat) + ADAM_EPS)
        train_losses.append(_loss(forward(Xtr)[2], ytr, ds.task))
        val_loss = _loss(forward(Xval)[2], yval, ds.task)
        if not np.isfinite(val_loss):
            raise ModelError(f"training diverged at epoch {epoch}")
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = {k: p.copy() for k, p in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= PATIENCE_EPOCHS:
                break

    model = MlpModel(
        W1=best_params["W1"],
        b1=best_params["b1"],
        W2=best_params["W2"],
        b2=float(best_params["b2"][0]),
        task=ds.task,
        seed=seed,
    )
    model.train_loss_history = train_losses
    return model


def save_model(model: MlpModel, path) -> None:
    """Binary .npz with a JSON header describing architecture and seed."""
    header = json.dumps(
        {
            "version": MODEL_FILE_VERSION,
            "kind": "mlp",
            "task": model.task,
            "seed": model.seed,
            "n_features": int(model.W1.shape[0]),
            "hidden_width": int(model.W1.shape[1]),
        }
    )
    np.savez(
        path,
        header=np.frombuffer(header.encode("utf-8"), dtype=np.uint8),
        W1=model.W1,
        b1=model.b1,
        W2=model.W2,
        b2=np.array([model.b2]),
    )


def load_model(path) -> MlpModel:
    with np.load(path) as z:
        header = json.loads(bytes(z["header"]).decode("utf-8"))
        if header.get("version") != MODEL_FILE_VERSION:
            raise ModelError(f"unsupported model file version {header.get('version')}")
        if header.get("kind") != "mlp":
            raise ModelError(f"unsupported model kind {header.get('kind')!r}")
        return MlpModel(
            W1=z["W1"],
            b1=z["b1"],
            W2=z["W2"],
            b2=float(z["b2"][0]),
            task=header["task"],
            seed=header["seed"],
        )


def scalar_fn(model: PredictiveFunction, x0: np.ndarray):
    """Scalar view of a model for attribution metrics, anchored at x0.

    Regression: the raw output. Classification: the probability of the class
    the model predicts at the unperturbed point, so the scalar stays
    comparable across perturbations of the same instance.
    """
    if model.task == "regression":
        return lambda X: model.predict(X)
    p0 = float(model.predict(np.atleast_2d(x0))[0])
    if p0 >= 0.5:
        return lambda X: model.predict(X)
    return lambda X: 1.0 - model.predict(X)
