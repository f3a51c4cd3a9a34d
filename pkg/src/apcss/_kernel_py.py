"""Pure-NumPy evaluation of the crossed-comparison dispersion statistic.

Fallback backend used when the compiled extension is unavailable (or
disabled via APCSS_PURE_PYTHON=1).  Produces bit-identical output to the
compiled kernel: ranks are exact multiples of 0.5 and every intermediate
is a dyadic rational far below 2**53 at supported layout sizes, so the
summation order cannot change the result.
"""

from __future__ import annotations

import numpy as np

from .model import _midranks_last_axis

BACKEND_NAME = "python"


def apc_dispersion_batch(aligned: np.ndarray) -> np.ndarray:
    """Scaled maximum crossed comparison for a batch of aligned tables.

    ``aligned`` has shape (n, I, J, K).  Each table is ranked within its
    rows, the crossed comparison V is evaluated for every column pair
    (j, j') from per-cell rank sums S and rank square sums Q, and the
    maximum V is divided by K^4 * I(I-1)/2, the number of summands per
    pair.  Returns shape (n,).
    """
    n, I, J, K = aligned.shape
    ranks = _midranks_last_axis(aligned.reshape(n, I, J * K)).reshape(n, I, J, K)
    S = ranks.sum(axis=3)
    Q = np.square(ranks).sum(axis=3)

    row_lo, row_hi = np.triu_indices(I, 1)
    col_lo, col_hi = np.triu_indices(J, 1)
    ri = row_lo[:, None]
    rp = row_hi[:, None]
    cj = col_lo[None, :]
    cp = col_hi[None, :]
    # cells of the tetrad: a=(i,j), b=(i',j'), c=(i',j), d=(i,j')
    Sa, Qa = S[:, ri, cj], Q[:, ri, cj]
    Sb, Qb = S[:, rp, cp], Q[:, rp, cp]
    Sc, Qc = S[:, rp, cj], Q[:, rp, cj]
    Sd, Qd = S[:, ri, cp], Q[:, ri, cp]

    kd = float(K)
    k2 = kd * kd
    k3 = k2 * kd
    cross = Sa * Sb - Sa * Sc - Sa * Sd - Sb * Sc - Sb * Sd + Sc * Sd
    terms = k3 * (Qa + Qb + Qc + Qd) + (2.0 * k2) * cross
    v = terms.sum(axis=1)  # (n, column pairs)
    divisor = (k2 * k2) * I * (I - 1) * 0.5
    return v.max(axis=1) / divisor
