"""Recommendation engine for explanation methods: shortlists explainers and
quality metrics compatible with the user's question, tunes each explainer's
hyperparameters against a weighted aggregate of the metrics, and ranks the
results."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .context import Registry, ShortlistEmpty, load_registry, shortlist
from .data import Dataset, load_csv, standardize, tfidf_vectorize
from .evaluator import TrialLedger, TrialRecord, aggregate
from .explainers import SOLUTION_IDS, describe
from .pipeline import ConfigError, RunConfig, run

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "Registry",
    "ShortlistEmpty",
    "load_registry",
    "shortlist",
    "Dataset",
    "load_csv",
    "standardize",
    "tfidf_vectorize",
    "TrialLedger",
    "TrialRecord",
    "aggregate",
    "SOLUTION_IDS",
    "describe",
    "ConfigError",
    "RunConfig",
    "run",
    "__version__",
]
