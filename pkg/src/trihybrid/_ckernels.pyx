# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, fabs, M_PI
from scipy.special.cython_special cimport j0, y0, i0e, k0e

cnp.import_array()


def lorentzian_chain(z, double nu, Py_ssize_t n_sub):
    cdef const double[:, ::1] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t B = zz.shape[0], N = zz.shape[1], P = N // n_sub
    w_arr = np.empty((B, N), dtype=np.complex128)
    s_arr = np.empty((B, P), dtype=np.complex128)
    cdef double complex[:, ::1] w = w_arr
    cdef double complex[:, ::1] s = s_arr
    cdef Py_ssize_t b, p, m, i
    cdef double complex acc, e
    for b in range(B):
        for p in range(P):
            acc = 1.0
            for m in range(n_sub):
                i = p * n_sub + m
                if fabs(zz[b, i]) == M_PI:
                    e = 0.0
                else:
                    e = (1.0 + cos(zz[b, i])) + 1j * sin(zz[b, i])
                w[b, i] = (-0.5j * e) * acc
                acc = acc * (1.0 - 0.5 * nu * e)
            s[b, p] = acc
    return w_arr, s_arr


def pinch_amplitudes(delta):
    cdef const double[:, ::1] d = np.ascontiguousarray(delta, dtype=np.float64)
    cdef Py_ssize_t B = d.shape[0], M = d.shape[1], b, m
    out_arr = np.empty((B, M), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double acc
    for b in range(B):
        acc = 1.0
        for m in range(M):
            out[b, m] = d[b, m] * acc
            acc = acc * sqrt(1.0 - d[b, m] * d[b, m])
    return out_arr


cdef inline double _sinc2(double x) noexcept nogil:
    cdef double s
    if x == 0.0:
        return 1.0
    s = sin(x) / x
    return s * s


def phi_sum(alpha, double k0, double a, double spacing, double gap, Py_ssize_t L):
    cdef const double[::1] al = np.ascontiguousarray(alpha, dtype=np.float64).ravel()
    cdef Py_ssize_t n = al.shape[0], i, l
    out_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double per = 2.0 * M_PI / spacing, k2 = k0 * k0
    cdef double a_l, d2, b, g, x, jj, yy, wgt
    cdef double complex acc, h
    with nogil:
        for i in range(n):
            acc = 0.0
            for l in range(-L + 1, L + 1):
                a_l = al[i] - per * l
                d2 = k2 - a_l * a_l
                wgt = _sinc2(0.5 * a_l * gap) if gap > 0 else 1.0
                if d2 > 0:
                    b = sqrt(d2)
                    x = b * a
                    jj = j0(x)
                    yy = y0(x)
                    h = jj - 1j * yy
                    acc = acc + wgt / (b * b * jj * h)
                else:
                    g = sqrt(-d2)
                    x = g * a
                    acc = acc + wgt * (1j * M_PI / (2.0 * g * g * i0e(x) * k0e(x)))
            out[i] = acc
    return out_arr
