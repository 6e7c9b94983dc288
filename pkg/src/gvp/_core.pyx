# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path recurrences; mirrors gvp._core_py."""
import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef enum:
    EH = 0
    PH = 1
    A0 = 2
    A1 = 3
    A2 = 4
    B0 = 5
    B1 = 6
    EJ = 7
    EMH = 8
    FH = 9
    GH = 10
    C01 = 11
    C11 = 12
    C02 = 13
    C12 = 14
    SPHI = 15
    H = 16

N_CONST = 17
N_OUT = 6


def linear_recurrence(x, growth, drive):
    """``z[:, j+1] = growth[j] * z[:, j] + drive[j] * (x[:, j+1] - x[:, j])``, ``z[:, 0] = 0``."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] g = np.ascontiguousarray(growth, dtype=np.float64)
    cdef double[::1] dr = np.ascontiguousarray(drive, dtype=np.float64)
    cdef Py_ssize_t npath = xv.shape[0], npts = xv.shape[1], i, j
    z = np.zeros((npath, npts))
    cdef double[:, ::1] zv = z
    cdef double acc
    with nogil:
        for i in range(npath):
            acc = 0.0
            for j in range(npts - 1):
                acc = g[j] * acc + dr[j] * (xv[i, j + 1] - xv[i, j])
                zv[i, j + 1] = acc
    return z


def path_functionals(x, consts, out_idx):
    """See ``gvp._core_py.path_functionals``."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(consts, dtype=np.float64)
    cdef cnp.intp_t[::1] idx = np.ascontiguousarray(out_idx, dtype=np.intp)
    cdef Py_ssize_t npath = xv.shape[0], npts = xv.shape[1], m = idx.shape[0]
    out = np.zeros((npath, m, N_OUT))
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t i, j, k, k0 = 0
    cdef double z, d2, eta, s, q, jj, y, h, x0, dx, d, lin
    while k0 < m and idx[k0] == 0:
        k0 += 1
    with nogil:
        for i in range(npath):
            z = d2 = eta = s = q = jj = y = 0.0
            k = k0
            for j in range(npts - 1):
                h = c[j, H]
                x0 = xv[i, j]
                dx = xv[i, j + 1] - x0
                d = dx / h
                d2 = d2 + z * z * c[j, A0] + 2.0 * z * d * c[j, A1] + d * d * c[j, A2]
                lin = x0 * c[j, B0] + d * c[j, B1]
                eta = eta + c[j, EJ] * lin
                q = q + h * (x0 * x0 + x0 * d * h + d * d * h * h / 3.0)
                jj = jj + y * lin + x0 * x0 * c[j, C01] + x0 * d * (c[j, C02] + c[j, C11]) + d * d * c[j, C12]
                y = c[j, EMH] * y + x0 * c[j, FH] + d * c[j, GH]
                z = c[j, EH] * z + dx * c[j, PH]
                s = c[j, EMH] * s + dx * c[j, SPHI]
                while k < m and idx[k] == j + 1:
                    o[i, k, 0] = z
                    o[i, k, 1] = d2
                    o[i, k, 2] = eta
                    o[i, k, 3] = s
                    o[i, k, 4] = q
                    o[i, k, 5] = jj
                    k += 1
    return out
