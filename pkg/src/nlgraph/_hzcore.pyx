# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled bivariate Henze-Zirkler scores for many column pairs."""
import numpy as np

from cython.parallel cimport prange
from libc.math cimport exp, sqrt


cdef double _pair(const double[:, ::1] zs, Py_ssize_t a, Py_ssize_t b,
                  double beta, double degenerate_tol, bint whiten) noexcept nogil:
    cdef Py_ssize_t n = zs.shape[1]
    cdef Py_ssize_t k, l
    cdef double r = 0.0, s, du, dv, dw, w2, acc_pair = 0.0, acc_one = 0.0
    cdef double b2 = beta * beta
    cdef double half_b2 = 0.5 * b2
    cdef double c1 = b2 / (2.0 * (1.0 + b2))
    cdef double uk, vk, nn = <double> n
    for k in range(n):
        r = r + zs[a, k] * zs[b, k]
    r = r / nn
    if not whiten or 1.0 - r * r < degenerate_tol:
        # collinear pairs cannot be whitened; score them on the raw scale
        r = 0.0
    s = 1.0 / sqrt(1.0 - r * r)
    for k in range(n):
        uk = zs[a, k]
        vk = zs[b, k]
        w2 = (vk - r * uk) * s
        acc_one = acc_one + exp(-c1 * (uk * uk + w2 * w2))
        for l in range(k + 1, n):
            du = uk - zs[a, l]
            dv = vk - zs[b, l]
            dw = (dv - r * du) * s
            acc_pair = acc_pair + exp(-half_b2 * (du * du + dw * dw))
    acc_pair = 2.0 * acc_pair + nn
    # d = 2: (1 + b2)^(-d/2) = 1 / (1 + b2)
    return nn * (acc_pair / (nn * nn)
                 - 2.0 / (1.0 + b2) * acc_one / nn
                 + 1.0 / (1.0 + 2.0 * b2))


def hz_pair_scores(const double[:, ::1] zs, const Py_ssize_t[:, ::1] pairs,
                   double beta, int num_threads=1, double degenerate_tol=1e-10,
                   bint whiten=True):
    """HZ statistic of each (zs[a], zs[b]) pair; rows of zs are standardized.

    With ``whiten`` the pair is decorrelated first, except for collinear
    pairs (1 - corr^2 below ``degenerate_tol``), which are scored as given.
    """
    cdef Py_ssize_t m = pairs.shape[0]
    cdef Py_ssize_t t
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] res = out
    if num_threads < 1:
        num_threads = 1
    for t in prange(m, nogil=True, schedule="dynamic", num_threads=num_threads):
        res[t] = _pair(zs, pairs[t, 0], pairs[t, 1], beta, degenerate_tol, whiten)
    return out
