#!/usr/bin/env python3
"""Regenerate the calibration files shipped inside the package.

Each shipped layout gets a two-phase null calibration with 100,000
replicates per phase under both alignment methods.  Seeds are fixed so a
rerun reproduces the committed files byte for byte; pass ``--check`` to
verify that without rewriting anything.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from apcss.calibration import (
    calibrate_null,
    load_calibration,
    save_calibration,
    shipped_calibration_path,
)
from apcss.model import AlignmentMethod, LayoutDims

N_PHASE1 = 100_000
N_PHASE2 = 100_000

# seed = layout code * 10 + method code, purely so every file differs
SHIPPED = [
    (LayoutDims(3, 3, 3), AlignmentMethod.AVERAGE, 110),
    (LayoutDims(3, 3, 3), AlignmentMethod.MEDIAN, 111),
    (LayoutDims(3, 4, 2), AlignmentMethod.AVERAGE, 120),
    (LayoutDims(3, 4, 2), AlignmentMethod.MEDIAN, 121),
    (LayoutDims(4, 4, 2), AlignmentMethod.AVERAGE, 130),
    (LayoutDims(4, 4, 2), AlignmentMethod.MEDIAN, 131),
]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--check",
        action="store_true",
        help="recompute and compare against the committed files instead of writing",
    )
    parser.add_argument(
        "--workers", type=int, default=1, help="worker processes (default 1)"
    )
    args = parser.parse_args()

    failures = 0
    for dims, method, seed in SHIPPED:
        path = shipped_calibration_path(dims, method) if args.check else None
        if path is None:
            path = (
                Path(__file__).resolve().parents[1]
                / "src"
                / "apcss"
                / "calibrations"
                / f"cal_{dims.I}x{dims.J}x{dims.K}_{method.value}.json"
            )
            path.parent.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        cal = calibrate_null(
            dims, method, N_PHASE1, N_PHASE2, seed=seed, workers=args.workers
        )
        elapsed = time.perf_counter() - start
        if args.check:
            committed = load_calibration(path)
            same = (
                committed.e0_crad == cal.e0_crad
                and committed.v0_crad == cal.v0_crad
                and committed.e0_rcad == cal.e0_rcad
                and committed.v0_rcad == cal.v0_rcad
                and (committed.null_sample == cal.null_sample).all()
            )
            status = "ok" if same else "MISMATCH"
            failures += not same
        else:
            save_calibration(cal, path)
            status = "wrote"
        print(
            f"{status} {path.name}  seed={seed}  "
            f"e0=({cal.e0_crad:.4f}, {cal.e0_rcad:.4f})  "
            f"v0=({cal.v0_crad:.4f}, {cal.v0_rcad:.4f})  [{elapsed:.1f}s]"
        )
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
