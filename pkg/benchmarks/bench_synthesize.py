"""Timing comparison of the two synthesis engines.

The per-point jit kernel and the grid-vectorized numpy fallback share
one contract, so either can serve the whole pipeline. This script runs
the full synthesize() call with each engine on the same potential and
prints wall times and the speedup. The numba engine is skipped when the
import fails or SOLVHARM_DISABLE_NUMBA=1 (the same switch the library
honours at import time).

Usage:
    python benchmarks/bench_synthesize.py [n]

n is the grid resolution per side (default 129).
"""

import sys
import time

import numpy as np

from solvharm._kernels import numba_enabled
from solvharm.dpw import HoloPoly, PotentialSpec, default_lambdas, synthesize
from solvharm.liegroup import SolvParams

POT = PotentialSpec(
    HoloPoly((-0.25, 0.1, 0.05j)),
    HoloPoly((0.25j, 0.05j, -0.02)),
    HoloPoly((0.05, 0.02)),
    SolvParams(1.0, -0.5),
    band=16,
)


def run_once(engine, n):
    t0 = time.perf_counter()
    res = synthesize(POT, (-1, 1, -1, 1), n, n, lambdas=list(default_lambdas()), engine=engine)
    dt = time.perf_counter() - t0
    return dt, res


def best_of(engine, n, repeats=3):
    times = []
    res = None
    for _ in range(repeats):
        dt, res = run_once(engine, n)
        times.append(dt)
    return min(times), res


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 129
    lam_count = len(default_lambdas())
    print(f"grid {n}x{n}, {lam_count} lambda slices, band {POT.band}")

    t_np, res_np = best_of("numpy", n)
    print(f"numpy  fallback: {t_np * 1000:8.1f} ms")

    if not numba_enabled():
        print("numba  engine:   skipped (unavailable or SOLVHARM_DISABLE_NUMBA=1)")
        return

    run_once("numba", 9)  # compile outside the timed region
    t_nb, res_nb = best_of("numba", n)
    print(f"numba  kernel:   {t_nb * 1000:8.1f} ms")
    print(f"speedup: {t_np / t_nb:.2f}x")

    gap = max(
        float(np.max(np.abs(a[1] - b[1])))
        for a, b in zip(res_np.grid.lambda_slices, res_nb.grid.lambda_slices)
    )
    print(f"max engine disagreement: {gap:.3e}")


if __name__ == "__main__":
    main()
