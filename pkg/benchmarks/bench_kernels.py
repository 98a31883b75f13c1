#!/usr/bin/env python3
"""Benchmark the jet multiply kernel: numba @njit loop vs pure numpy.

The truncated-polynomial product is the hot inner operation of every
verification pipeline, so this times raw jet products across context sizes
and batch widths, plus one representative end-to-end identity check.

    python benchmarks/bench_kernels.py [--repeat 5]

Force-disable the jit path globally with LIEJET_NO_NUMBA=1 (this script
switches backends in process instead).
"""

import argparse
import time

import numpy as np

from liejet import _kernels
from liejet.bundles import FunctorSpec
from liejet.calculus import Tolerances, verify_pullback_derivative
from liejet.jet import JetContext, jet_var
from liejet.maps import DiffeoCurve, Domain
from liejet.sections import Section


def time_best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_mul(m: int, order: int, batch: int, n_ops: int, repeat: int) -> float:
    ctx = JetContext.get(m, order)
    rng = np.random.default_rng(0)
    a = jet_var(0, rng.uniform(-1, 1, size=batch), ctx)
    a.coeffs[:] = rng.uniform(-1, 1, size=a.coeffs.shape)
    b = jet_var(0, rng.uniform(-1, 1, size=batch), ctx)
    b.coeffs[:] = rng.uniform(-1, 1, size=b.coeffs.shape)

    def run():
        acc = a
        for _ in range(n_ops):
            acc = a * b
        return acc

    run()  # warm any jit compilation out of the timing
    return time_best(run, repeat) / n_ops


def bench_pipeline(repeat: int) -> float:
    dom = Domain([(-1.2, 1.2), (-1.2, 1.2)])
    curve = DiffeoCurve.from_strings(
        ["x1 + t*(0.15*sin(x2) + 0.05*x1)", "x2 + t*(0.1*cos(x1) - 0.08*x2^2)"],
        2, dom,
    )
    section = Section.from_strings(
        FunctorSpec(1, 1, 0.0), ["x1", "0.3 + 0.2*x2", "sin(x1)", "1 + x1*x2"], 2, dom
    )
    pts = np.random.default_rng(5).uniform(-0.7, 0.7, size=(20, 2))

    def run():
        verify_pullback_derivative(curve, section, 0.1, pts, Tolerances(abs_tol=1e-7))

    run()
    return time_best(run, repeat)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = ["numpy"]
    try:
        _kernels.select_backend("numba")
        backends.insert(0, "numba")
    except RuntimeError:
        print("numba backend unavailable; timing numpy only")

    cases = [(1, 2, 1), (2, 3, 20), (3, 4, 20), (3, 5, 50)]
    results: dict[str, dict] = {}
    for backend in backends:
        _kernels.select_backend(backend)
        rows = {}
        for m, order, batch in cases:
            rows[(m, order, batch)] = bench_mul(m, order, batch, n_ops=200, repeat=args.repeat)
        rows["pipeline"] = bench_pipeline(args.repeat)
        results[backend] = rows

    header = f"{'case':>24} " + " ".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    for m, order, batch in cases:
        label = f"mul m={m} K={order} B={batch}"
        vals = [results[b][(m, order, batch)] for b in backends]
        line = f"{label:>24} " + " ".join(f"{v * 1e6:>10.2f}us" for v in vals)
        if len(vals) == 2:
            line += f" {vals[1] / vals[0]:>8.2f}x"
        print(line)
    vals = [results[b]["pipeline"] for b in backends]
    line = f"{'eq1 verify (20 pts)':>24} " + " ".join(f"{v * 1e3:>10.2f}ms" for v in vals)
    if len(vals) == 2:
        line += f" {vals[1] / vals[0]:>8.2f}x"
    print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
