"""Throughput comparison of the compiled and numpy batch-simulation backends.

Both backends consume the generator identically, so the comparison also
re-checks that they produce the same counts from the same seed.

Usage: python3 benchmarks/bench_kernel.py [--arms 3] [--events 2000000]
"""

import argparse
import time

import numpy as np

from batchbandit.kernel import get_backend, has_native
from batchbandit.rng import derive_rng

BATCH_SIZES = (100, 1_000, 10_000, 100_000)


def run_backend(name: str, batch_size: int, n_arms: int, target_events: int, seed: int):
    kernel = get_backend(name)
    alpha = np.linspace(1.0, 40.0, n_arms)
    beta = np.linspace(1.0, 400.0, n_arms)
    theta = np.linspace(0.02, 0.10, n_arms)
    repeats = max(1, target_events // batch_size)
    kernel(derive_rng(seed, "bench", "warmup"), alpha, beta, theta, batch_size)
    rng = derive_rng(seed, "bench", batch_size)
    start = time.perf_counter()
    for _ in range(repeats):
        counts = kernel(rng, alpha, beta, theta, batch_size)
    elapsed = time.perf_counter() - start
    return repeats * batch_size / elapsed, counts


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--arms", type=int, default=3)
    parser.add_argument("--events", type=int, default=2_000_000,
                        help="approximate events per (backend, batch size) cell")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = ["numpy"] + (["native"] if has_native() else [])
    if len(backends) == 1:
        print("native kernel not built; benchmarking the numpy backend only")

    print(f"{args.arms} arms, ~{args.events:,} events per cell")
    header = f"{'batch size':>12}" + "".join(f"{b + ' ev/s':>16}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for batch_size in BATCH_SIZES:
        rates = {}
        counts = {}
        for backend in backends:
            rates[backend], counts[backend] = run_backend(
                backend, batch_size, args.arms, args.events, args.seed
            )
        row = f"{batch_size:>12,}" + "".join(f"{rates[b]:>16,.0f}" for b in backends)
        if len(backends) == 2:
            if not all(
                np.array_equal(counts["numpy"][i], counts["native"][i]) for i in (0, 1)
            ):
                raise AssertionError(
                    f"backends disagree on the same stream at batch size {batch_size}"
                )
            row += f"{rates['native'] / rates['numpy']:>9.2f}x"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
