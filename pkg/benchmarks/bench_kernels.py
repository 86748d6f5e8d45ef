"""Time the numba and pure-numpy variants of every kernel side by side.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Compiled variants are warmed up once before timing, so the numbers exclude
JIT compilation.  Results are checked for agreement before they are timed.
"""

import argparse
import timeit

import numpy as np

from otcl import kernels
from otcl._accel import NUMBA_AVAILABLE


def cases(rng):
    x = np.linspace(-5, 5, 501)
    c = (x[:, None] - x[None, :]) ** 2 / 0.02
    f, g = rng.normal(size=501), rng.normal(size=501)
    yield "log_row_lse 501x501", "log_row_lse", (c, f, g, 0.03)
    yield "log_col_lse 501x501", "log_col_lse", (c, f, g, 0.03)

    pts = rng.uniform(size=(120, 2))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    yield "triangle_violations n=120", "triangle_violations", (d, 1e-12)

    d40 = d[:40, :40].copy()
    sets = [rng.choice(40, 12, replace=False) for _ in range(3)]
    flat = np.concatenate(sets).astype(np.int64)
    offsets = np.array([0, 12, 24, 36], dtype=np.int64)
    yield "barycenter_union 12^3 tuples", "barycenter_union", (d40, flat, offsets, np.array([0.2, 0.3, 0.5]), 1e-12)

    yield "weighted_sq_objective", "weighted_sq_objective", (d, np.arange(0, 120, 3), np.full(40, 1 / 40))

    cost = rng.uniform(size=(7, 7))
    yield "min_permutation_cost n=7", "min_permutation_cost", (cost,)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    if a.dtype.kind == "f":
        return np.allclose(a, b, rtol=1e-10, atol=1e-12, equal_nan=True)
    return np.array_equal(a, b)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    if not NUMBA_AVAILABLE:
        print("numba is not installed; only the numpy variants can run")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for label, name, inputs in cases(rng):
        fn_np = getattr(kernels, name + "_np")
        fn_nb = getattr(kernels, name + "_nb")
        ref = fn_np(*inputs)
        t_np = timeit.timeit(lambda: fn_np(*inputs), number=args.repeat) / args.repeat * 1e3
        if NUMBA_AVAILABLE:
            out = fn_nb(*inputs)  # warm-up compiles
            if not _same(ref, out):
                raise SystemExit(f"{name}: numba and numpy variants disagree")
            t_nb = timeit.timeit(lambda: fn_nb(*inputs), number=args.repeat) / args.repeat * 1e3
            print(f"{label:32s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:7.1f}x")
        else:
            print(f"{label:32s} {t_np:10.3f} {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()
