# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation of the crossed-comparison dispersion statistic.

Hot kernel for Monte Carlo calibration and power studies.  Semantics are
identical to apcss._kernel_py (the pure-NumPy fallback); every
intermediate is an exact dyadic rational at supported layout sizes, so
the two backends return bit-identical arrays.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


def apc_dispersion_batch(double[:, :, :, ::1] aligned not None):
    """Scaled maximum crossed comparison for a batch of aligned tables.

    ``aligned`` has shape (n, I, J, K).  Each table is ranked within its
    rows with midranks, the crossed comparison V is evaluated for every
    column pair from per-cell rank sums and rank square sums, and the
    maximum V is divided by K^4 * I(I-1)/2.  Returns shape (n,).
    """
    cdef Py_ssize_t n = aligned.shape[0]
    cdef Py_ssize_t I = aligned.shape[1]
    cdef Py_ssize_t J = aligned.shape[2]
    cdef Py_ssize_t K = aligned.shape[3]
    cdef Py_ssize_t m = J * K

    out_arr = np.empty(n, dtype=np.float64)
    buf_arr = np.empty(m, dtype=np.float64)
    ranks_arr = np.empty((I, m), dtype=np.float64)
    s_arr = np.empty((I, J), dtype=np.float64)
    q_arr = np.empty((I, J), dtype=np.float64)

    cdef double[::1] out = out_arr
    cdef double[::1] buf = buf_arr
    cdef double[:, ::1] ranks = ranks_arr
    cdef double[:, ::1] s = s_arr
    cdef double[:, ::1] q = q_arr

    cdef double kd = <double> K
    cdef double k2 = kd * kd
    cdef double k3 = k2 * kd
    cdef double two_k2 = 2.0 * k2
    cdef double divisor = (k2 * k2) * <double> I * (<double> I - 1.0) * 0.5

    cdef Py_ssize_t t, i, ip, j, jp, k, p, pq
    cdef Py_ssize_t below, tied
    cdef double v, val, acc, acc2, r
    cdef double sa, sb, sc, sd, qa, qb, qc, qd, cross, term, vmax

    with nogil:
        for t in range(n):
            # midranks within each row, ties averaged
            for i in range(I):
                for j in range(J):
                    for k in range(K):
                        buf[j * K + k] = aligned[t, i, j, k]
                for p in range(m):
                    val = buf[p]
                    below = 0
                    tied = 0
                    for pq in range(m):
                        if buf[pq] < val:
                            below += 1
                        elif buf[pq] == val:
                            tied += 1
                    ranks[i, p] = <double> below + (<double> tied + 1.0) * 0.5
            # per-cell rank sums and rank square sums
            for i in range(I):
                for j in range(J):
                    acc = 0.0
                    acc2 = 0.0
                    for k in range(K):
                        r = ranks[i, j * K + k]
                        acc += r
                        acc2 += r * r
                    s[i, j] = acc
                    q[i, j] = acc2
            # maximum crossed comparison over column pairs
            vmax = -1.0
            for j in range(J - 1):
                for jp in range(j + 1, J):
                    v = 0.0
                    for i in range(I - 1):
                        for ip in range(i + 1, I):
                            sa = s[i, j]
                            sb = s[ip, jp]
                            sc = s[ip, j]
                            sd = s[i, jp]
                            qa = q[i, j]
                            qb = q[ip, jp]
                            qc = q[ip, j]
                            qd = q[i, jp]
                            cross = sa * sb - sa * sc - sa * sd - sb * sc - sb * sd + sc * sd
                            term = k3 * (((qa + qb) + qc) + qd) + two_k2 * cross
                            v += term
                    if v > vmax:
                        vmax = v
            out[t] = vmax / divisor

    return out_arr
