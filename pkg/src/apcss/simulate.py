"""Data generation and power studies for balanced two-way layouts.

Datasets follow the additive model with interaction,
Y_{ijk} = alpha_i + beta_j + gamma_{ij} + eps_{ijk}, with the
interaction either absent, a product form gamma_{ij} = lam * a_i * b_j,
or a specific 2x2 block [[c, -c], [-c, c]] embedded at configurable
offsets.  The power-study runner simulates a grid of interaction
magnitudes, evaluates every requested test on the *same* datasets
(paired comparison), and reports rejection rates per test.

Replicate r at grid point p draws its errors from a generator seeded
with SeedSequence(seed, spawn_key=(p, r)), so every rejection decision
is reproducible and independent of worker count.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from ._util import atomic_write_text, check_seed, resolve_workers
from .calibration import NullCalibration, critical_value
from .competitors import (
    _interaction_f_batch,
    aligned_residuals,
    f_critical,
    joint_midranks,
)
from .crossed import dispersion_pair_batch, standardized_max
from .errors import (
    CalibrationMismatchError,
    CalibrationMissingError,
    UnsupportedDesignError,
)
from .model import AlignmentMethod, DataTable, LayoutDims

__all__ = [
    "ErrorDistribution",
    "NoInteraction",
    "ProductInteraction",
    "SpecificInteraction",
    "EffectSpec",
    "PowerPoint",
    "PowerCurve",
    "PowerStudyConfig",
    "KNOWN_TESTS",
    "sample_error",
    "sample_errors",
    "interaction_matrix",
    "expected_mean",
    "generate_dataset",
    "load_power_config",
    "run_power_study",
    "write_power_csv",
]

#: Tests the power runner knows how to evaluate, in canonical output order.
KNOWN_TESTS = ("APCSSA", "APCSSM", "F", "RT", "ART")

_APC_METHODS = {"APCSSA": AlignmentMethod.AVERAGE, "APCSSM": AlignmentMethod.MEDIAN}
_F_FAMILY = ("F", "RT", "ART")

# Replicates per worker task; fixed so results never depend on worker count.
_CHUNK = 512

#: Magnitude grid used when a power config omits "magnitudes".
DEFAULT_MAGNITUDES = tuple(float(m) for m in np.linspace(0.0, 2.0, 9))


class ErrorDistribution(enum.Enum):
    """Error laws for the noise term, with all parameters fixed."""

    NORMAL = "normal"  # Normal(0, 1)
    UNIFORM = "uniform"  # Uniform(-2, 2)
    EXPONENTIAL = "exponential"  # Exponential(rate 1), used raw (uncentered)
    DOUBLE_EXPONENTIAL = "double_exponential"  # location 0, scale 1/sqrt(2)
    CAUCHY = "cauchy"  # location 0, scale 1


def sample_errors(dist: ErrorDistribution, rng, shape) -> np.ndarray:
    """Draw an array of errors of the given shape from ``dist``.

    The double exponential is a symmetrically signed exponential with
    scale 1/sqrt(2) (variance 1); the Cauchy is tan(pi*(U - 1/2)).
    """
    if dist is ErrorDistribution.NORMAL:
        return rng.standard_normal(shape)
    if dist is ErrorDistribution.UNIFORM:
        return rng.uniform(-2.0, 2.0, shape)
    if dist is ErrorDistribution.EXPONENTIAL:
        return rng.exponential(1.0, shape)
    if dist is ErrorDistribution.DOUBLE_EXPONENTIAL:
        signs = 2.0 * rng.integers(0, 2, shape) - 1.0
        return signs * rng.exponential(1.0 / math.sqrt(2.0), shape)
    if dist is ErrorDistribution.CAUCHY:
        return np.tan(np.pi * (rng.random(shape) - 0.5))
    raise ValueError(f"unknown error distribution {dist!r}")


def sample_error(dist: ErrorDistribution, rng) -> float:
    """Draw a single error value from ``dist``."""
    return float(sample_errors(dist, rng, ()))


@dataclass(frozen=True)
class NoInteraction:
    """gamma identically zero."""


@dataclass(frozen=True)
class ProductInteraction:
    """gamma_{ij} = lam * alpha_i * beta_j."""

    lam: float


@dataclass(frozen=True)
class SpecificInteraction:
    """gamma zero except a 2x2 block [[c, -c], [-c, c]] at the offsets.

    Offsets are 0-based; the block occupies rows row_offset..row_offset+1
    and columns col_offset..col_offset+1.
    """

    c: float
    row_offset: int = 0
    col_offset: int = 0


Interaction = Union[NoInteraction, ProductInteraction, SpecificInteraction]


@dataclass(frozen=True)
class EffectSpec:
    """Effects and noise defining one simulated data-generating process."""

    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    interaction: Interaction
    error: ErrorDistribution

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if not isinstance(
            self.interaction, (NoInteraction, ProductInteraction, SpecificInteraction)
        ):
            raise ValueError(f"unknown interaction type {self.interaction!r}")
        if not isinstance(self.error, ErrorDistribution):
            raise ValueError(f"error must be an ErrorDistribution, got {self.error!r}")


def _check_spec(dims: LayoutDims, spec: EffectSpec) -> None:
    if len(spec.alpha) != dims.I:
        raise ValueError(
            f"alpha has length {len(spec.alpha)}, expected I = {dims.I}"
        )
    if len(spec.beta) != dims.J:
        raise ValueError(f"beta has length {len(spec.beta)}, expected J = {dims.J}")
    inter = spec.interaction
    if isinstance(inter, SpecificInteraction):
        if not (0 <= inter.row_offset and inter.row_offset + 2 <= dims.I):
            raise ValueError(
                f"specific-interaction rows {inter.row_offset}..{inter.row_offset + 1} "
                f"do not fit in I = {dims.I}"
            )
        if not (0 <= inter.col_offset and inter.col_offset + 2 <= dims.J):
            raise ValueError(
                f"specific-interaction columns {inter.col_offset}..{inter.col_offset + 1} "
                f"do not fit in J = {dims.J}"
            )


def interaction_matrix(dims: LayoutDims, spec: EffectSpec) -> np.ndarray:
    """The (I, J) matrix of interaction terms gamma_{ij} for ``spec``."""
    _check_spec(dims, spec)
    inter = spec.interaction
    gamma = np.zeros((dims.I, dims.J))
    if isinstance(inter, ProductInteraction):
        gamma = inter.lam * np.outer(spec.alpha, spec.beta)
    elif isinstance(inter, SpecificInteraction):
        block = inter.c * np.array([[1.0, -1.0], [-1.0, 1.0]])
        gamma[inter.row_offset : inter.row_offset + 2,
              inter.col_offset : inter.col_offset + 2] = block
    return gamma


def expected_mean(dims: LayoutDims, spec: EffectSpec) -> np.ndarray:
    """The noiseless (I, J, K) table alpha_i + beta_j + gamma_{ij}."""
    gamma = interaction_matrix(dims, spec)
    cell = np.asarray(spec.alpha)[:, None] + np.asarray(spec.beta)[None, :] + gamma
    return np.broadcast_to(cell[:, :, None], dims.shape).copy()


def generate_dataset(dims: LayoutDims, spec: EffectSpec, rng) -> DataTable:
    """Simulate one table: Y_{ijk} = alpha_i + beta_j + gamma_{ij} + eps_{ijk}."""
    mean = expected_mean(dims, spec)
    return DataTable(dims, mean + sample_errors(spec.error, rng, dims.shape))


@dataclass(frozen=True)
class PowerPoint:
    """Rejection count for one test at one interaction magnitude."""

    magnitude: float
    n_sims: int
    rejections: int

    def __post_init__(self):
        if self.n_sims <= 0:
            raise ValueError(f"n_sims must be positive, got {self.n_sims}")
        if not 0 <= self.rejections <= self.n_sims:
            raise ValueError(
                f"rejections {self.rejections} outside [0, {self.n_sims}]"
            )

    @property
    def power(self) -> float:
        return self.rejections / self.n_sims


@dataclass(frozen=True)
class PowerCurve:
    """Empirical power of one test across an interaction-magnitude grid."""

    test: str
    dims: LayoutDims
    alpha: float
    error: ErrorDistribution
    interaction: str
    points: tuple[PowerPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    def power_at(self, magnitude: float) -> float:
        for point in self.points:
            if point.magnitude == magnitude:
                return point.power
        raise KeyError(f"no grid point at magnitude {magnitude}")


@dataclass(frozen=True)
class PowerStudyConfig:
    """Full specification of one power study.

    ``row_effects``/``col_effects`` are the base effect vectors; each
    grid magnitude scales the interaction only (lam for the product
    family, c for the specific family), so magnitude 0 is always the
    no-interaction null.  ``alpha`` is the significance level.
    """

    dims: LayoutDims
    row_effects: tuple[float, ...]
    col_effects: tuple[float, ...]
    interaction: str  # "product" or "specific"
    magnitudes: tuple[float, ...]
    error: ErrorDistribution
    tests: tuple[str, ...]
    alpha: float
    n_sims: int
    seed: int
    row_offset: int = 0
    col_offset: int = 0
    calibration_average: str | None = None
    calibration_median: str | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "row_effects", tuple(float(a) for a in self.row_effects)
        )
        object.__setattr__(
            self, "col_effects", tuple(float(b) for b in self.col_effects)
        )
        object.__setattr__(
            self, "magnitudes", tuple(float(m) for m in self.magnitudes)
        )
        object.__setattr__(self, "tests", tuple(str(t).upper() for t in self.tests))
        if self.interaction not in ("product", "specific"):
            raise ValueError(
                f"interaction must be 'product' or 'specific', got {self.interaction!r}"
            )
        if not self.magnitudes:
            raise ValueError("magnitudes must be a non-empty list")
        if not all(math.isfinite(m) for m in self.magnitudes):
            raise ValueError("magnitudes must be finite")
        if not self.tests:
            raise ValueError("tests must be a non-empty list")
        unknown = [t for t in self.tests if t not in KNOWN_TESTS]
        if unknown:
            raise ValueError(
                f"unknown tests {unknown}; supported: {', '.join(KNOWN_TESTS)}"
            )
        if len(set(self.tests)) != len(self.tests):
            raise ValueError(f"tests contains duplicates: {self.tests}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_sims < 1:
            raise ValueError(f"n_sims must be >= 1, got {self.n_sims}")
        check_seed(self.seed)
        # Reuse the generator-side checks for effect lengths and block fit.
        _check_spec(self.dims, self._spec_at(1.0))

    def _spec_at(self, magnitude: float) -> EffectSpec:
        if self.interaction == "product":
            inter: Interaction = ProductInteraction(magnitude)
        else:
            inter = SpecificInteraction(magnitude, self.row_offset, self.col_offset)
        return EffectSpec(self.row_effects, self.col_effects, inter, self.error)


_CONFIG_KEYS = {
    "I", "J", "K", "row_effects", "col_effects", "interaction",
    "row_offset", "col_offset", "magnitudes", "error", "tests",
    "alpha", "n_sims", "seed", "calibration_average", "calibration_median",
}
_REQUIRED_CONFIG_KEYS = {
    "I", "J", "K", "row_effects", "col_effects", "interaction",
    "error", "tests", "alpha", "n_sims", "seed",
}


def load_power_config(path) -> PowerStudyConfig:
    """Parse a JSON power-study config file.

    Calibration paths in the file are resolved relative to the file's
    own directory.  A missing "magnitudes" key falls back to
    DEFAULT_MAGNITUDES (nine evenly spaced values from 0 to 2).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"power config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValueError("power config must hold a JSON object")
    unknown = sorted(doc.keys() - _CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown power-config fields {unknown}")
    missing = sorted(_REQUIRED_CONFIG_KEYS - doc.keys())
    if missing:
        raise ValueError(f"power config missing fields {missing}")
    try:
        dims = LayoutDims(doc["I"], doc["J"], doc["K"])
        error = ErrorDistribution(doc["error"])
    except ValueError as exc:
        raise ValueError(f"invalid power config: {exc}") from None

    def _resolve(key):
        value = doc.get(key)
        return None if value is None else str((path.parent / value).resolve())

    return PowerStudyConfig(
        dims=dims,
        row_effects=doc["row_effects"],
        col_effects=doc["col_effects"],
        interaction=doc["interaction"],
        magnitudes=doc.get("magnitudes", DEFAULT_MAGNITUDES),
        error=error,
        tests=doc["tests"],
        alpha=doc["alpha"],
        n_sims=doc["n_sims"],
        seed=doc["seed"],
        row_offset=doc.get("row_offset", 0),
        col_offset=doc.get("col_offset", 0),
        calibration_average=_resolve("calibration_average"),
        calibration_median=_resolve("calibration_median"),
    )


def _power_chunk(
    dims_shape,
    mean,
    error_value,
    seed,
    point_index,
    start,
    stop,
    tests,
    consts,
) -> np.ndarray:
    """Rejection counts over replicates [start, stop); worker entry point.

    ``consts`` holds, per APC test, (e0_crad, v0_crad, e0_rcad, v0_rcad,
    critical value), and under "F" the shared F critical value.
    """
    error = ErrorDistribution(error_value)
    tables = np.empty((stop - start,) + tuple(dims_shape))
    for r in range(start, stop):
        rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(point_index, r))
        )
        tables[r - start] = mean + sample_errors(error, rng, dims_shape)

    counts = np.zeros(len(tests), dtype=np.int64)
    for t, name in enumerate(tests):
        if name in _APC_METHODS:
            disp = dispersion_pair_batch(tables, _APC_METHODS[name])
            e0c, v0c, e0r, v0r, crit = consts[name]
            _, _, stats = standardized_max(disp[:, 0], disp[:, 1], e0c, v0c, e0r, v0r)
            counts[t] = np.count_nonzero(stats > crit)
        else:
            if name == "F":
                values = tables
            elif name == "RT":
                values = joint_midranks(tables)
            else:  # ART
                values = joint_midranks(aligned_residuals(tables))
            f = _interaction_f_batch(values)["f"]
            counts[t] = np.count_nonzero(f > consts["F"])
    return counts


def run_power_study(
    config: PowerStudyConfig,
    calibrations: Mapping[AlignmentMethod, NullCalibration] | None = None,
    workers: int | None = 1,
) -> dict[str, PowerCurve]:
    """Estimate power for every configured test across the magnitude grid.

    All tests are evaluated on the same simulated datasets at each
    replicate (a paired comparison), and every decision derives from
    ``config.seed``, so reruns — at any worker count — reproduce the
    results exactly.
    """
    workers = resolve_workers(workers)
    calibrations = dict(calibrations or {})

    consts: dict[str, tuple | float] = {}
    for name in config.tests:
        if name in _APC_METHODS:
            method = _APC_METHODS[name]
            cal = calibrations.get(method)
            if cal is None:
                raise CalibrationMissingError(
                    f"{name} requires a {method.value}-alignment calibration"
                )
            if cal.dims != config.dims:
                raise CalibrationMismatchError(
                    f"calibration is for {cal.dims}, study uses {config.dims}"
                )
            if cal.method is not method:
                raise CalibrationMismatchError(
                    f"calibration uses {cal.method.value} alignment, "
                    f"{name} needs {method.value}"
                )
            consts[name] = (
                cal.e0_crad,
                cal.v0_crad,
                cal.e0_rcad,
                cal.v0_rcad,
                critical_value(cal, config.alpha),
            )
        elif config.dims.K < 2:
            raise UnsupportedDesignError(
                f"{name} needs K >= 2 replications per cell (no error df at K=1)"
            )
    if any(name in _F_FAMILY for name in config.tests):
        I, J, K = config.dims.shape
        consts["F"] = f_critical(config.alpha, (I - 1) * (J - 1), I * J * (K - 1))

    n = config.n_sims
    spans = [(s, min(s + _CHUNK, n)) for s in range(0, n, _CHUNK)]
    totals = np.zeros((len(config.magnitudes), len(config.tests)), dtype=np.int64)

    def _jobs():
        for p, magnitude in enumerate(config.magnitudes):
            mean = expected_mean(config.dims, config._spec_at(magnitude))
            for s, e in spans:
                yield p, (
                    config.dims.shape, mean, config.error.value,
                    config.seed, p, s, e, config.tests, consts,
                )

    if workers <= 1:
        for p, args in _jobs():
            totals[p] += _power_chunk(*args)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(p, pool.submit(_power_chunk, *args)) for p, args in _jobs()]
            for p, fut in futures:
                totals[p] += fut.result()

    curves = {}
    for t, name in enumerate(config.tests):
        points = tuple(
            PowerPoint(magnitude, n, int(totals[p, t]))
            for p, magnitude in enumerate(config.magnitudes)
        )
        curves[name] = PowerCurve(
            test=name,
            dims=config.dims,
            alpha=config.alpha,
            error=config.error,
            interaction=config.interaction,
            points=points,
        )
    return curves


def write_power_csv(curves: Mapping[str, PowerCurve], path) -> None:
    """Write power curves as CSV: test,magnitude,n_sims,rejections,power."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["test", "magnitude", "n_sims", "rejections", "power"])
    for name, curve in curves.items():
        for point in curve.points:
            writer.writerow(
                [name, repr(point.magnitude), point.n_sims, point.rejections,
                 repr(point.power)]
            )
    atomic_write_text(path, buf.getvalue())
