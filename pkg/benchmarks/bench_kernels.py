#!/usr/bin/env python3
"""Time the numba kernels against the pure-numpy fallback.

Covers the two hot paths: the IIR second-order-section recursion (dominates
preprocessing of long multichannel recordings) and the O(n^2) swarm
steering loop. Run after install:

    python benchmarks/bench_kernels.py [--channels 64] [--samples 500000]
"""

import argparse
import time

import numpy as np

from mindswarm import _kernels
from mindswarm.filtering import FilterSpec, design_butterworth


def time_call(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_sosfilt(n_channels, n_samples):
    coeffs = design_butterworth(
        FilterSpec(kind="bandpass", band=(8.0, 30.0), order=2), 1000.0
    )
    rng = np.random.default_rng(0)
    x = rng.standard_normal((n_channels, n_samples))
    zi = np.zeros((coeffs.sos.shape[0], n_channels, 2))

    results = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and not _kernels.HAVE_NUMBA:
            continue
        # warm up (JIT compile / cache load)
        _kernels.sosfilt_inplace(coeffs.sos, x[:2, :1000].copy(),
                                 zi[:, :2].copy(), backend=backend)
        results[backend] = time_call(
            lambda b=backend: _kernels.sosfilt_inplace(
                coeffs.sos, x.copy(), zi.copy(), backend=b
            )
        )
    return results


def bench_swarm(n_agents, n_ticks):
    rng = np.random.default_rng(1)
    pos = rng.uniform(0, 50, (n_agents, 3))
    vel = rng.uniform(-2, 2, (n_agents, 3))
    groups = (np.arange(n_agents) % 2).astype(np.int8)
    setpoint = np.array([0.5, 0.0, 0.0])
    goal = np.array([10.0, 10.0, 10.0])

    def run(backend):
        for _ in range(n_ticks):
            _kernels.swarm_accel(pos, vel, groups, True, 4.2, 6.0,
                                 1.0, 2.5, 0.8, 1.0, 1.2, 2.0, 2.0,
                                 setpoint, goal, True, backend=backend)

    results = {}
    for backend in ("numba", "numpy"):
        if backend == "numba" and not _kernels.HAVE_NUMBA:
            continue
        run(backend)  # warm up
        results[backend] = time_call(lambda b=backend: run(b), repeats=2)
    return results


def report(name, results, work_desc):
    print(f"\n{name}  ({work_desc})")
    for backend, seconds in results.items():
        print(f"  {backend:>6}: {seconds * 1000:9.1f} ms")
    if "numba" in results and "numpy" in results:
        print(f"  speedup: {results['numpy'] / results['numba']:.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--channels", type=int, default=64)
    parser.add_argument("--samples", type=int, default=500_000)
    parser.add_argument("--agents", type=int, default=64)
    parser.add_argument("--ticks", type=int, default=2000)
    args = parser.parse_args()

    print(f"active backend: {_kernels.active_backend()} "
          f"(numba available: {_kernels.HAVE_NUMBA})")

    report(
        "sosfilt (2-section bandpass, single pass)",
        bench_sosfilt(args.channels, args.samples),
        f"{args.channels} channels x {args.samples} samples",
    )
    report(
        "swarm_accel",
        bench_swarm(args.agents, args.ticks),
        f"{args.agents} agents x {args.ticks} ticks",
    )


if __name__ == "__main__":
    main()
