"""Times the compiled kernels against the pure-numpy reference.

Usage: python3 benchmarks/bench_kernels.py [n] [k]
"""

import sys
import time

import numpy as np

from xairec._kernels import numpy_impl

try:
    from xairec._kernels import _fast
except ImportError:
    _fast = None


def _time(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 600
    k = int(sys.argv[2]) if len(sys.argv) > 2 else 8
    rng = np.random.default_rng(0)
    X = rng.normal(size=(n, 12))
    D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    K = np.exp(-0.5 * D**2)
    medoids = np.asarray(sorted(rng.choice(n, size=k, replace=False)), dtype=np.intp)

    impls = [("numpy", numpy_impl)]
    if _fast is not None:
        impls.append(("compiled", _fast))
    else:
        print("compiled kernels unavailable; timing numpy only")

    print(f"n={n} k={k}")
    for name, fn_args in (
        ("best_swap", (D, medoids)),
        ("greedy_mmd", (K, k)),
    ):
        results = {}
        for impl_name, impl in impls:
            secs, out = _time(getattr(impl, name), *fn_args)
            results[impl_name] = (secs, out)
            print(f"  {name:<12} {impl_name:<9} {secs * 1e3:9.2f} ms")
        if len(results) == 2:
            a, b = results["numpy"], results["compiled"]
            same = all(
                np.allclose(x, y) for x, y in zip(np.atleast_1d(a[1]), np.atleast_1d(b[1]))
            )
            print(f"  {name:<12} speedup  {a[0] / b[0]:9.1f}x  outputs match: {same}")


if __name__ == "__main__":
    main()
