#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the four backend entry points on optimizer-scale workloads and prints
a table with the speedup. Run from the repo root:

    python3 benchmarks/bench_backends.py [--nodes N] [--samples N] [--repeat R]
"""

import argparse
import time

import numpy as np

from hopfbound._backend import available_backends
from hopfbound.fields import BumpProfile, FieldSpec, backend_params
from hopfbound.sphere import canonical_center, random_points


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=8192,
                        help="points per field/shape workload")
    parser.add_argument("--samples", type=int, default=200_000,
                        help="matrices per identity workload")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--k", type=int, default=1, choices=(1, 2))
    args = parser.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not available; nothing to compare")

    rng = np.random.default_rng(0)
    k = args.k
    X = random_points(k, args.nodes, rng)
    bump = BumpProfile(1.0, canonical_center(k))
    spec = FieldSpec.perturbed(k, rng.uniform(-0.2, 0.2, 6 * (k + 1)), bump)
    params = backend_params(spec)
    hopf_params = backend_params(FieldSpec.hopf(k))
    M = rng.uniform(-1.0, 1.0, (args.samples, 6, 6))

    workloads = [
        (f"eval_field ({args.nodes} pts, k={k})",
         lambda mod: mod.eval_field(X, *params)),
        (f"frames ({args.nodes} pts)",
         lambda mod: mod.frames(X, mod.eval_field(X, *params))),
        (f"shape_parts analytic ({args.nodes} pts)",
         lambda mod: mod.shape_parts(X, *hopf_params, 0, 1e-5)),
        (f"shape_parts fd ({args.nodes} pts)",
         lambda mod: mod.shape_parts(X, *params, 1, 1e-5)),
        (f"inequality_stats ({args.samples} dim-6 samples)",
         lambda mod: mod.inequality_stats(M)),
    ]

    name_w = max(len(name) for name, _ in workloads)
    header = f"{'workload':<{name_w}}  {'pure ms':>10}  {'compiled ms':>12}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, fn in workloads:
        pure = best_of(lambda: fn(backends["pure-python"]), args.repeat)
        row = f"{name:<{name_w}}  {1e3 * pure:>10.2f}"
        if "compiled" in backends:
            comp = best_of(lambda: fn(backends["compiled"]), args.repeat)
            row += f"  {1e3 * comp:>12.2f}  {pure / comp:>7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
