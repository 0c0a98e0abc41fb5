"""Hot kernels for prototype selection with a compiled fast path.

The Cython extension is optional: when it failed to build, or when
``XAIREC_PURE_PYTHON=1`` is set, the numpy fallback is used. Both backends
implement identical semantics (see tests/test_kernels.py for parity checks).
"""

import os

import numpy as np

from . import numpy_impl

if os.environ.get("XAIREC_PURE_PYTHON") == "1":
    _impl = numpy_impl
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = numpy_impl

BACKEND = _impl.BACKEND


def _as_dist(D):
    return np.ascontiguousarray(D, dtype=np.float64)


def _as_idx(medoids):
    return np.ascontiguousarray(medoids, dtype=np.intp)


def total_cost(D, medoids) -> float:
    return float(_impl.total_cost(_as_dist(D), _as_idx(medoids)))


def best_swap(D, medoids):
    delta, m_pos, h = _impl.best_swap(_as_dist(D), _as_idx(medoids))
    return float(delta), int(m_pos), int(h)


def greedy_mmd(K, k: int) -> np.ndarray:
    return np.asarray(_impl.greedy_mmd(_as_dist(K), int(k)), dtype=np.intp)


__all__ = ["BACKEND", "total_cost", "best_swap", "greedy_mmd", "numpy_impl"]
