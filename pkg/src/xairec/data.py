"""Dataset loading, vectorization, standardization and confusion splits.

Every downstream component (models, explainers, metrics) consumes the
``Dataset`` produced here, so the representation is fixed once: a dense or
sparse observation matrix, a label vector and per-feature statistics.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

SPARSE_DENSITY_CUTOFF = 0.25

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class DataError(ValueError):
    """Raised for malformed input files or inconsistent dataset arguments."""


@dataclass(frozen=True)
class Dataset:
    """Immutable observation matrix with labels and feature statistics.

    ``feature_mean``/``feature_std`` always describe the *original* scale,
    so a standardized dataset keeps enough information for the inverse map.
    """

    X: np.ndarray | sp.csr_matrix
    y: np.ndarray
    feature_names: tuple[str, ...]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    task: str  # "regression" | "classification"
    standardized: bool = False

    def __post_init__(self):
        if self.X.shape[0] != len(self.y):
            raise DataError(
                f"row count {self.X.shape[0]} does not match label count {len(self.y)}"
            )
        if len(set(self.feature_names)) != len(self.feature_names):
            raise DataError("feature names are not unique")
        if self.task not in ("regression", "classification"):
            raise DataError(f"unknown task {self.task!r}")
        if np.any(self.feature_std < 0):
            raise DataError("negative feature std")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.X)

    def dense(self) -> np.ndarray:
        """Observations as a dense 2-d array (copy only when sparse)."""
        if self.is_sparse:
            return np.asarray(self.X.todense())
        return self.X

    def rows(self, indices) -> np.ndarray:
        """Dense rows at the given indices."""
        sub = self.X[np.asarray(indices, dtype=int)]
        return np.asarray(sub.todense()) if sp.issparse(sub) else sub

    def subset(self, indices) -> "Dataset":
        """New Dataset restricted to the given row indices (stats retained)."""
        idx = np.asarray(indices, dtype=int)
        return replace(self, X=self.X[idx], y=self.y[idx])

    def column_std(self) -> np.ndarray:
        """Std of the observations as currently stored (1.0 after standardize)."""
        if self.is_sparse:
            mean = np.asarray(self.X.mean(axis=0)).ravel()
            sq = np.asarray(self.X.multiply(self.X).mean(axis=0)).ravel()
            return np.sqrt(np.maximum(sq - mean**2, 0.0))
        return self.X.std(axis=0)


@dataclass(frozen=True)
class ConfusionSplit:
    """Index partition of a binary-classification dataset by model outcome."""

    true_positives: tuple[int, ...]
    true_negatives: tuple[int, ...]
    false_positives: tuple[int, ...]
    false_negatives: tuple[int, ...]

    def cells(self) -> dict[str, tuple[int, ...]]:
        return {
            "true_positives": self.true_positives,
            "true_negatives": self.true_negatives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
        }


def load_csv(path, target_column: str, task: str) -> Dataset:
    """Load a numeric CSV (header row, comma separated) into a Dataset.

    Values are kept on their raw scale; per-feature mean/std are computed so
    ``standardize`` can be applied afterwards.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise DataError(f"target column {target_column!r} not in header {header}")
        t_idx = header.index(target_column)
        rows, targets = [], []
        for r, row in enumerate(reader, start=2):
            if not row:
                continue
            vals = []
            for c, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"non-numeric cell at row {r}, column {header[c]!r}: {cell!r}"
                    ) from None
                vals.append(v)
            targets.append(vals.pop(t_idx))
            rows.append(vals)
    if not rows:
        raise DataError(f"no data rows in {path}")
    X = np.asarray(rows, dtype=float)
    y = np.asarray(targets, dtype=float)
    names = tuple(h for i, h in enumerate(header) if i != t_idx)
    return Dataset(
        X=X,
        y=y,
        feature_names=names,
        feature_mean=X.mean(axis=0),
        feature_std=X.std(axis=0),
        task=task,
    )


def standardize(ds: Dataset) -> Dataset:
    """Map each column to zero mean / unit std; constant columns become 0.

    Idempotent: standardizing an already-standardized dataset is a no-op up
    to floating-point noise.
    """
    if ds.is_sparse:
        # Sparse data (TF-IDF) is consumed as-is by the prototype explainers.
        raise DataError("standardize expects a dense observation matrix")
    if ds.standardized:
        return ds
    std = ds.feature_std
    safe = np.where(std > 0, std, 1.0)
    Xs = (ds.X - ds.feature_mean) / safe
    Xs[:, std == 0] = 0.0
    return replace(ds, X=Xs, standardized=True)


def destandardize_rows(ds: Dataset, rows: np.ndarray) -> np.ndarray:
    """Inverse of ``standardize`` for a matrix of rows."""
    if not ds.standardized:
        return rows
    return rows * np.where(ds.feature_std > 0, ds.feature_std, 1.0) + ds.feature_mean


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric."""
    return _TOKEN_RE.findall(text.lower())


def tfidf_vectorize(
    documents: list[str],
    min_doc_freq: int = 1,
    labels=None,
    task: str = "classification",
) -> Dataset:
    """TF-IDF matrix over a corpus: tf = raw term count, idf = ln(n/df).

    No smoothing, so a term present in every document gets weight exactly 0.
    Terms with document frequency below ``min_doc_freq`` are dropped and each
    row is L2-normalized. Stored sparse when density < 25%.
    """
    if not documents:
        raise DataError("empty corpus")
    n = len(documents)
    token_lists = [tokenize(doc) for doc in documents]
    df: dict[str, int] = {}
    for toks in token_lists:
        for t in set(toks):
            df[t] = df.get(t, 0) + 1
    vocab = sorted(t for t, c in df.items() if c >= min_doc_freq)
    if not vocab:
        raise DataError("all tokens filtered out")
    index = {t: j for j, t in enumerate(vocab)}
    idf = np.log(n / np.array([df[t] for t in vocab], dtype=float))

    data, indices, indptr = [], [], [0]
    for toks in token_lists:
        counts: dict[int, int] = {}
        for t in toks:
            j = index.get(t)
            if j is not None:
                counts[j] = counts.get(j, 0) + 1
        for j in sorted(counts):
            indices.append(j)
            data.append(counts[j] * idf[j])
        indptr.append(len(indices))
    X = sp.csr_matrix(
        (np.asarray(data, dtype=float), indices, indptr), shape=(n, len(vocab))
    )
    norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
    inv = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0)
    X = sp.diags(inv) @ X
    X = sp.csr_matrix(X)

    density = X.nnz / (n * len(vocab))
    if density >= SPARSE_DENSITY_CUTOFF:
        X = np.asarray(X.todense())

    y = np.zeros(n) if labels is None else np.asarray(labels, dtype=float)
    mean = np.asarray(X.mean(axis=0)).ravel() if sp.issparse(X) else X.mean(axis=0)
    if sp.issparse(X):
        sq = np.asarray(X.multiply(X).mean(axis=0)).ravel()
        std = np.sqrt(np.maximum(sq - mean**2, 0.0))
    else:
        std = X.std(axis=0)
    return Dataset(
        X=X,
        y=y,
        feature_names=tuple(vocab),
        feature_mean=mean,
        feature_std=std,
        task=task,
    )


def load_documents(path) -> list[str]:
    """One document per line, blank lines kept out."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            docs = [line.rstrip("\n") for line in fh]
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    docs = [d for d in docs if d.strip()]
    if not docs:
        raise DataError(f"no documents in {path}")
    return docs


def load_predictions(path, n: int | None = None) -> np.ndarray:
    """Single-column CSV of predictions aligned to dataset rows."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    if lines and not _is_number(lines[0]):
        lines = lines[1:]  # optional header
    try:
        preds = np.asarray([float(v) for v in lines])
    except ValueError as exc:
        raise DataError(f"non-numeric prediction in {path}: {exc}") from None
    if n is not None and len(preds) != n:
        raise DataError(f"expected {n} predictions, found {len(preds)}")
    return preds


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def confusion_split(ds: Dataset, predictions) -> ConfusionSplit:
    """Partition row indices by confusion-matrix cell (class 1 = positive)."""
    preds = np.asarray(predictions)
    if len(preds) != ds.n:
        raise DataError(f"predictions length {len(preds)} != n {ds.n}")
    labels = ds.y
    uniq = set(np.unique(labels)) | set(np.unique(preds))
    if not uniq <= {0.0, 1.0}:
        raise DataError(f"labels/predictions must be binary 0/1, got {sorted(uniq)}")
    pos_label = labels == 1
    pos_pred = preds == 1
    idx = np.arange(ds.n)
    return ConfusionSplit(
        true_positives=tuple(idx[pos_label & pos_pred].tolist()),
        true_negatives=tuple(idx[~pos_label & ~pos_pred].tolist()),
        false_positives=tuple(idx[~pos_label & pos_pred].tolist()),
        false_negatives=tuple(idx[pos_label & ~pos_pred].tolist()),
    )
