"""Time the numba and numpy versions of each hot kernel on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both versions are called directly (the env flag only picks the default), so
one process measures both.  Outputs are checked for exact agreement.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from bruijnregret._kernels import NUMBA_KERNELS, NUMPY_KERNELS
from bruijnregret.debruijn import successor_table


def lattice_case(rng, d=3, cells=400_000):
    M = 1 << d
    succ = successor_table(d)
    W = rng.normal(size=(M, cells + 200))
    base = np.arange(100, cells + 100, dtype=np.int64)
    off = rng.integers(-50, 51, size=M).astype(np.int64)
    qn = rng.uniform(-1, 1, size=M)
    return (W, succ[:, 0].copy(), succ[:, 1].copy(), qn, base, off)


def minmax_case(rng, Hp=200_000, K=1000):
    Hc = Hp + K
    grid = np.arange(-Hc, Hc + 1, dtype=float)
    Vp = -0.001 * grid + 0.3 * np.tanh(grid / 500.0) * 0.001
    Vm = -0.0007 * grid + 0.2  # both nonincreasing, as the kernel requires
    return (Vp, Vm, Hc, Hp, -K, K)


def exhaustive_case(rng, Hp=4000, K=200):
    Hc = Hp + K
    Vp = rng.normal(size=2 * Hc + 1)
    Vm = rng.normal(size=2 * Hc + 1)
    return (Vp, Vm, Hc, Hp, -K, K)


def best_time(fn, args, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    cases = {
        "lattice_level": lattice_case(rng),
        "crossing_minmax": minmax_case(rng),
        "exhaustive_minmax": exhaustive_case(rng),
    }
    rows = []
    print(f"{'kernel':<20}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}  match")
    for name, case in cases.items():
        NUMBA_KERNELS[name](*case)  # compile outside the timing
        tn, on = best_time(NUMBA_KERNELS[name], case, args.repeat)
        tp, op = best_time(NUMPY_KERNELS[name], case, args.repeat)
        ok = same(on, op)
        rows.append({"kernel": name, "numba": tn, "numpy": tp, "speedup": tp / tn, "match": ok})
        print(f"{name:<20}{tn:>12.4f}{tp:>12.4f}{tp / tn:>10.1f}  {ok}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0 if all(r["match"] for r in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
