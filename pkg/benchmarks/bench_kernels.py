"""Time the numba and pure-numpy kernels on the same inputs.

    python benchmarks/bench_kernels.py [--steps 200 1000] [--matrices 100000] [--repeat 5]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from qwtopo import _kernels
from qwtopo._accel import HAVE_NUMBA
from qwtopo.bands import bloch_operators
from qwtopo.walk import QWP_MATRIX, StepParams


def best_of(func, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        times.append(time.perf_counter() - t0)
    return min(times)


def walk_case(nsteps: int):
    a = np.zeros((2 * nsteps + 1, 2), dtype=np.complex128)
    a[nsteps] = (1 / math.sqrt(2), 1 / math.sqrt(2))
    p = StepParams(2.95)
    args = (a, QWP_MATRIX, p.cos_half, p.sin_half, p.shift, nsteps)
    return (lambda: _kernels.walk_final_np(*args)), (lambda: _kernels.walk_final_nb(*args))


def su2_case(count: int):
    ks = -math.pi + 2 * math.pi * np.arange(count) / count
    us = bloch_operators(StepParams(1.3), ks)
    return (lambda: _kernels.su2_decompose_np(us)), (lambda: _kernels.su2_decompose_nb(us))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, nargs="+", default=[50, 200, 1000])
    parser.add_argument("--matrices", type=int, nargs="+", default=[4096, 100_000])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1

    cases = [(f"walk n={n}", *walk_case(n)) for n in args.steps]
    cases += [(f"su2 x{m}", *su2_case(m)) for m in args.matrices]
    print(f"{'case':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, np_fn, nb_fn in cases:
        nb_fn()  # compile (or load from cache) outside the timing
        t_np = best_of(np_fn, args.repeat)
        t_nb = best_of(nb_fn, args.repeat)
        print(f"{name:<16}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
