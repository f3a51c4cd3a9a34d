"""Classical interaction tests: ANOVA F, rank transform, aligned rank transform.

All three reduce to the balanced two-way ANOVA F statistic for
interaction, applied to raw values (F), joint midranks (RT), or joint
midranks of additively aligned values (ART).  The F tail probability is
computed from scratch via the regularized incomplete beta function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedDesignError
from .model import DataTable, _midranks_last_axis

__all__ = [
    "FTestResult",
    "anova_f_interaction",
    "rt_test",
    "art_test",
    "f_upper_tail",
]

_CF_EPS = 3e-16
_CF_FPMIN = 1e-300
_CF_MAX_ITER = 500


@dataclass(frozen=True)
class FTestResult:
    """F test outcome for the interaction hypothesis at a given level."""

    statistic: float
    df_num: int
    df_den: int
    p_value: float
    reject: bool
    alpha: float

    def __post_init__(self):
        if self.statistic < 0.0:
            raise ValueError("F statistic must be nonnegative")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value must lie in [0, 1]")


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_FPMIN:
        d = _CF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def _reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) with the usual symmetry switch."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_upper_tail(x: float, d1: int, d2: int) -> float:
    """P(F(d1, d2) > x) for x >= 0, to absolute accuracy better than 1e-10."""
    if d1 < 1 or d2 < 1:
        raise ValueError("degrees of freedom must be positive integers")
    if math.isnan(x) or x < 0.0:
        raise ValueError(f"F statistic must be nonnegative, got {x}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    u = d2 / (d2 + d1 * x)
    return _reg_inc_beta(d2 / 2.0, d1 / 2.0, u)


def f_critical(alpha: float, d1: int, d2: int) -> float:
    """Upper critical value: the x with f_upper_tail(x, d1, d2) == alpha."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    hi = 1.0
    while f_upper_tail(hi, d1, d2) > alpha:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("failed to bracket the F critical value")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f_upper_tail(mid, d1, d2) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _interaction_f_batch(values: np.ndarray) -> dict:
    """Two-way ANOVA decomposition for a batch of tables, shape (n, I, J, K).

    Returns the interaction F statistics plus all sums of squares.  The
    degenerate 0/0 case (no within-cell and no interaction variability)
    maps to F = 0; zero error variance with nonzero interaction maps to
    F = inf.
    """
    n, I, J, K = values.shape
    grand = values.mean(axis=(1, 2, 3))
    cell = values.mean(axis=3)
    row = values.mean(axis=(2, 3))
    col = values.mean(axis=(1, 3))
    dev_int = cell - row[:, :, None] - col[:, None, :] + grand[:, None, None]
    ss_int = K * np.square(dev_int).sum(axis=(1, 2))
    ss_err = np.square(values - cell[:, :, :, None]).sum(axis=(1, 2, 3))
    ss_rows = J * K * np.square(row - grand[:, None]).sum(axis=1)
    ss_cols = I * K * np.square(col - grand[:, None]).sum(axis=1)
    df_num = (I - 1) * (J - 1)
    df_den = I * J * (K - 1)
    ms_int = ss_int / df_num
    ms_err = ss_err / df_den
    with np.errstate(divide="ignore", invalid="ignore"):
        f = ms_int / ms_err
    f = np.where(ms_err == 0.0, np.where(ms_int == 0.0, 0.0, np.inf), f)
    return {
        "f": f,
        "df_num": df_num,
        "df_den": df_den,
        "ss_rows": ss_rows,
        "ss_cols": ss_cols,
        "ss_int": ss_int,
        "ss_err": ss_err,
    }


def _require_error_df(table: DataTable, test_name: str) -> None:
    if table.dims.K < 2:
        raise UnsupportedDesignError(
            f"{test_name} needs K >= 2 replications per cell (no error df at K=1)"
        )


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _f_result(values: np.ndarray, alpha: float) -> FTestResult:
    parts = _interaction_f_batch(values[None, ...])
    f = float(parts["f"][0])
    p = f_upper_tail(f, parts["df_num"], parts["df_den"])
    return FTestResult(
        statistic=f,
        df_num=parts["df_num"],
        df_den=parts["df_den"],
        p_value=p,
        reject=p < alpha,
        alpha=alpha,
    )


def anova_f_interaction(table: DataTable, alpha: float = 0.05) -> FTestResult:
    """Balanced two-way ANOVA F test for interaction."""
    _require_error_df(table, "the ANOVA F test")
    _check_alpha(alpha)
    return _f_result(table.values, alpha)


def joint_midranks(values: np.ndarray) -> np.ndarray:
    """Midranks of all entries pooled together, same shape as the input."""
    flat_shape = (-1, values[0].size) if values.ndim == 4 else (1, values.size)
    return _midranks_last_axis(values.reshape(flat_shape)).reshape(values.shape)


def rt_test(table: DataTable, alpha: float = 0.05) -> FTestResult:
    """Rank transform test: the ANOVA F test applied to joint midranks."""
    _require_error_df(table, "the rank transform test")
    _check_alpha(alpha)
    return _f_result(joint_midranks(table.values), alpha)


def aligned_residuals(values: np.ndarray) -> np.ndarray:
    """Remove additive structure: value - row mean - column mean + grand mean.

    Batch aware: accepts (I, J, K) or (n, I, J, K).
    """
    row = values.mean(axis=(-2, -1))[..., :, None, None]
    col = values.mean(axis=(-3, -1))[..., None, :, None]
    grand = values.mean(axis=(-3, -2, -1))[..., None, None, None]
    return values - row - col + grand


def art_test(table: DataTable, alpha: float = 0.05) -> FTestResult:
    """Aligned rank transform test for interaction.

    Row and column averages are subtracted from every entry (the grand
    mean is re-added, which leaves the joint ranks unchanged), the
    residuals are jointly midranked, and the ANOVA F test is applied.
    """
    _require_error_df(table, "the aligned rank transform test")
    _check_alpha(alpha)
    return _f_result(joint_midranks(aligned_residuals(table.values)), alpha)
