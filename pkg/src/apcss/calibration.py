"""Monte Carlo null calibration for the symmetrized crossed-comparison tests.

The null distribution is simulated in two phases from pure standard
normal noise with no main effects or interaction.  Phase 1 estimates the
null mean and variance of each scaled dispersion (APCCRAD, APCRCAD);
phase 2 simulates fresh tables, forms the symmetrized statistic with the
phase-1 constants, and stores the sorted sample, from which critical
values and Monte Carlo p-values are read off.

Replicate r draws its noise from a generator seeded with
SeedSequence(seed, spawn_key=(r,)), so results are deterministic for a
given seed and independent of how replicates are distributed across
worker processes.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._util import atomic_write_text, check_seed, resolve_workers
from .crossed import dispersion_pair_batch, standardized_max
from .errors import CorruptCalibrationError
from .model import AlignmentMethod, LayoutDims

__all__ = [
    "NullCalibration",
    "CalibrationVersionError",
    "CalibrationChecksumError",
    "calibrate_null",
    "critical_value",
    "p_value",
    "save_calibration",
    "load_calibration",
    "shipped_calibration_path",
]

FORMAT_NAME = "apcss-null-calibration"
FORMAT_VERSION = 1

# Replicates per worker task; fixed so results never depend on worker count.
_CHUNK = 2048


class CalibrationVersionError(CorruptCalibrationError):
    """Calibration file declares an unsupported format version."""


class CalibrationChecksumError(CorruptCalibrationError):
    """Calibration file content does not match its checksum."""


@dataclass(frozen=True, eq=False)
class NullCalibration:
    """Simulated null moments and null sample for one layout and method.

    ``null_sample`` holds the sorted phase-2 values of the symmetrized
    statistic; ``e0_*``/``v0_*`` are the phase-1 null mean and variance
    of each scaled dispersion.
    """

    dims: LayoutDims
    method: AlignmentMethod
    e0_crad: float
    v0_crad: float
    e0_rcad: float
    v0_rcad: float
    null_sample: np.ndarray
    n_phase1: int
    n_phase2: int
    seed: int
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.v0_crad <= 0.0 or self.v0_rcad <= 0.0:
            raise CorruptCalibrationError("null variances must be positive")
        sample = np.asarray(self.null_sample, dtype=np.float64)
        if sample.ndim != 1 or sample.size != self.n_phase2:
            raise CorruptCalibrationError(
                f"null sample length {sample.size} != declared n_phase2 {self.n_phase2}"
            )
        if not np.all(np.isfinite(sample)):
            raise CorruptCalibrationError("null sample must be finite")
        if np.any(sample[1:] < sample[:-1]):
            raise CorruptCalibrationError("null sample must be sorted ascending")
        if self.n_phase1 < 2 or self.n_phase2 < 2:
            raise CorruptCalibrationError("phase sizes must be at least 2")
        sample.flags.writeable = False
        object.__setattr__(self, "null_sample", sample)


def _null_dispersion_chunk(dims_shape, method_value, seed, start, stop) -> np.ndarray:
    """Dispersion pairs for null replicates [start, stop); worker entry point."""
    I, J, K = dims_shape
    tables = np.empty((stop - start, I, J, K))
    for r in range(start, stop):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
        tables[r - start] = rng.standard_normal((I, J, K))
    return dispersion_pair_batch(tables, AlignmentMethod(method_value))


def _null_dispersions(
    dims: LayoutDims, method: AlignmentMethod, seed: int, start: int, count: int, workers: int
) -> np.ndarray:
    """Dispersion pairs for ``count`` null replicates starting at index ``start``."""
    spans = [(s, min(s + _CHUNK, start + count)) for s in range(start, start + count, _CHUNK)]
    out = np.empty((count, 2))
    if workers <= 1 or len(spans) <= 1:
        for s, e in spans:
            out[s - start : e - start] = _null_dispersion_chunk(
                dims.shape, method.value, seed, s, e
            )
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_null_dispersion_chunk, dims.shape, method.value, seed, s, e)
            for s, e in spans
        ]
        for (s, e), fut in zip(spans, futures):
            out[s - start : e - start] = fut.result()
    return out


def calibrate_null(
    dims: LayoutDims,
    method: AlignmentMethod,
    n_phase1: int,
    n_phase2: int,
    seed: int,
    workers: int | None = 1,
) -> NullCalibration:
    """Two-phase null calibration from standard normal noise.

    Phase 1 simulates ``n_phase1`` pure-noise tables and estimates the
    null mean and variance (denominator n-1) of each scaled dispersion.
    Phase 2 simulates ``n_phase2`` fresh tables (replicate indices
    continue after phase 1), forms the symmetrized statistic with the
    phase-1 constants, and stores the sorted sample.
    """
    if n_phase1 < 2 or n_phase2 < 2:
        raise ValueError("n_phase1 and n_phase2 must be at least 2")
    seed = check_seed(seed)
    workers = resolve_workers(workers)

    phase1 = _null_dispersions(dims, method, seed, 0, n_phase1, workers)
    e0_crad = float(phase1[:, 0].mean())
    v0_crad = float(phase1[:, 0].var(ddof=1))
    e0_rcad = float(phase1[:, 1].mean())
    v0_rcad = float(phase1[:, 1].var(ddof=1))
    if v0_crad <= 0.0 or v0_rcad <= 0.0:
        raise CorruptCalibrationError(
            "degenerate null variance; increase n_phase1 or check the layout"
        )

    phase2 = _null_dispersions(dims, method, seed, n_phase1, n_phase2, workers)
    _, _, stats = standardized_max(
        phase2[:, 0], phase2[:, 1], e0_crad, v0_crad, e0_rcad, v0_rcad
    )
    return NullCalibration(
        dims=dims,
        method=method,
        e0_crad=e0_crad,
        v0_crad=v0_crad,
        e0_rcad=e0_rcad,
        v0_rcad=v0_rcad,
        null_sample=np.sort(stats),
        n_phase1=n_phase1,
        n_phase2=n_phase2,
        seed=seed,
    )


def critical_value(cal: NullCalibration, alpha: float) -> float:
    """Empirical critical value: the ceil((1-alpha) n)-th smallest null value.

    The test rejects when the statistic strictly exceeds this value.
    The rank is computed in exact rational arithmetic so that grid
    values such as alpha = 0.10 land on the mathematically intended
    order statistic.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    n = cal.n_phase2
    m = math.ceil((1 - Fraction(alpha)) * n)
    return float(cal.null_sample[m - 1])


def p_value(cal: NullCalibration, statistic: float) -> float:
    """Add-one Monte Carlo p-value: (1 + #{null >= statistic}) / (n + 1)."""
    n = cal.n_phase2
    n_ge = n - int(np.searchsorted(cal.null_sample, statistic, side="left"))
    return (1 + n_ge) / (n + 1)


def _payload(cal: NullCalibration) -> dict:
    return {
        "format": FORMAT_NAME,
        "format_version": cal.format_version,
        "I": cal.dims.I,
        "J": cal.dims.J,
        "K": cal.dims.K,
        "method": cal.method.value,
        "n_phase1": cal.n_phase1,
        "n_phase2": cal.n_phase2,
        "seed": cal.seed,
        "e0_crad": cal.e0_crad,
        "v0_crad": cal.v0_crad,
        "e0_rcad": cal.e0_rcad,
        "v0_rcad": cal.v0_rcad,
        "null_sample": cal.null_sample.tolist(),
    }


def _checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canonical.encode()).hexdigest()


def save_calibration(cal: NullCalibration, path) -> None:
    """Write a calibration to a self-describing JSON file with a checksum."""
    payload = _payload(cal)
    doc = dict(payload)
    doc["checksum"] = _checksum(payload)
    atomic_write_text(path, json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_calibration(path) -> NullCalibration:
    """Load and validate a calibration file.

    Raises CalibrationVersionError on a version mismatch,
    CalibrationChecksumError on checksum failure (including truncation),
    and CorruptCalibrationError on invariant violations.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptCalibrationError(f"calibration file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise CorruptCalibrationError("calibration file must hold a JSON object")
    if doc.get("format") != FORMAT_NAME:
        raise CorruptCalibrationError(
            f"not a calibration file (format marker {doc.get('format')!r})"
        )
    if doc.get("format_version") != FORMAT_VERSION:
        raise CalibrationVersionError(
            f"unsupported format_version {doc.get('format_version')!r}, "
            f"expected {FORMAT_VERSION}"
        )
    declared = doc.get("checksum")
    payload = {k: v for k, v in doc.items() if k != "checksum"}
    if declared != _checksum(payload):
        raise CalibrationChecksumError("calibration file failed its checksum")
    required = {
        "I", "J", "K", "method", "n_phase1", "n_phase2", "seed",
        "e0_crad", "v0_crad", "e0_rcad", "v0_rcad", "null_sample",
    }
    missing = required - payload.keys()
    if missing:
        raise CorruptCalibrationError(f"calibration file missing fields {sorted(missing)}")
    try:
        dims = LayoutDims(payload["I"], payload["J"], payload["K"])
        method = AlignmentMethod(payload["method"])
    except ValueError as exc:
        raise CorruptCalibrationError(f"invalid calibration header: {exc}") from None
    return NullCalibration(
        dims=dims,
        method=method,
        e0_crad=float(payload["e0_crad"]),
        v0_crad=float(payload["v0_crad"]),
        e0_rcad=float(payload["e0_rcad"]),
        v0_rcad=float(payload["v0_rcad"]),
        null_sample=np.asarray(payload["null_sample"], dtype=np.float64),
        n_phase1=int(payload["n_phase1"]),
        n_phase2=int(payload["n_phase2"]),
        seed=int(payload["seed"]),
    )


def shipped_calibration_path(dims: LayoutDims, method: AlignmentMethod) -> Path:
    """Path of the calibration file shipped with the package, if any."""
    name = f"cal_{dims.I}x{dims.J}x{dims.K}_{method.value}.json"
    path = Path(__file__).parent / "calibrations" / name
    if not path.exists():
        raise FileNotFoundError(
            f"no shipped calibration for {dims} / {method.value}; "
            f"generate one with the 'apcss calibrate' command"
        )
    return path
