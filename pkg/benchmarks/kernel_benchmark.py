#!/usr/bin/env python3
"""Compare the compiled and pure-NumPy dispersion kernels.

Times ``apc_dispersion_batch`` on batches of column-aligned tables for a
few layouts, checks that both backends return bit-identical results on
the same inputs, and prints per-table throughput with the speedup of the
compiled kernel over the NumPy one.

Usage: python3 benchmarks/kernel_benchmark.py [--batch N] [--repeats R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from apcss._backend import available_backends
from apcss.model import AlignmentMethod, Axis, DataTable, LayoutDims, _centered_values

LAYOUTS = [(3, 3, 3), (3, 4, 2), (4, 4, 2), (5, 5, 4), (8, 8, 5)]


def _aligned_batch(dims: LayoutDims, batch: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    tables = rng.standard_normal((batch, *dims.shape))
    return _centered_values(tables, Axis.COLUMNS, AlignmentMethod.AVERAGE)


def _time(func, aligned: np.ndarray, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        func(aligned)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=4096, help="tables per batch")
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats")
    args = parser.parse_args()

    backends = available_backends()
    names = sorted(backends)
    print(f"backends: {', '.join(names)}   batch={args.batch}  repeats={args.repeats}\n")
    header = "layout    " + "".join(f"{name:>14}" for name in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header + "   (µs per table, best of repeats)")

    for I, J, K in LAYOUTS:
        dims = LayoutDims(I, J, K)
        aligned = _aligned_batch(dims, args.batch, seed=I * 100 + J * 10 + K)
        results = {name: backends[name](aligned) for name in names}
        first = results[names[0]]
        for name in names[1:]:
            if not np.array_equal(first, results[name]):
                raise SystemExit(f"backend mismatch on {I}x{J}x{K}: {names[0]} vs {name}")
        per_table = {
            name: _time(backends[name], aligned, args.repeats) / args.batch * 1e6
            for name in names
        }
        row = f"{I}x{J}x{K:<6}" + "".join(f"{per_table[name]:>14.2f}" for name in names)
        if len(names) == 2:
            slow = max(per_table.values())
            fast = min(per_table.values())
            row += f"{slow / fast:>9.1f}x"
        print(row)
    print("\nbit-identical results across backends on every benchmark batch")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
