"""Pure numpy implementation of the path recurrences.

Loops run over grid cells; every operation is vectorised over paths.
The compiled module ``gvp._core`` exposes the same functions.
"""
from __future__ import annotations

import numpy as np

# column layout of the per-cell constant table, see gvp.core.cell_constants
EH, PH, A0, A1, A2, B0, B1, EJ, EMH, FH, GH, C01, C11, C02, C12, SPHI, H = range(17)
N_CONST = 17
N_OUT = 6


def linear_recurrence(x, growth, drive):
    """``z[:, j+1] = growth[j] * z[:, j] + drive[j] * (x[:, j+1] - x[:, j])``, ``z[:, 0] = 0``."""
    x = np.ascontiguousarray(x, dtype=float)
    z = np.zeros_like(x)
    dx = np.diff(x, axis=1)
    for j in range(x.shape[1] - 1):
        z[:, j + 1] = growth[j] * z[:, j] + drive[j] * dx[:, j]
    return z


def path_functionals(x, consts, out_idx):
    """Running functionals of the piecewise-linear interpolant of each path.

    Returns an array of shape ``(paths, len(out_idx), 6)`` holding, at each
    requested grid index ``k``: ``Z_t``, ``int Z^2``, ``int e^(-theta s) X ds``,
    ``e^(-theta t) int e^(theta s) dX``, ``int X^2`` and
    ``int_0^t int_0^s X_s X_r e^(-theta (s-r)) dr ds`` with ``t = grid[k]``.
    """
    x = np.ascontiguousarray(x, dtype=float)
    c = np.ascontiguousarray(consts, dtype=float)
    out_idx = np.asarray(out_idx, dtype=np.intp)
    npath, npts = x.shape
    out = np.zeros((npath, out_idx.size, N_OUT))
    z = np.zeros(npath)
    d2 = np.zeros(npath)
    eta = np.zeros(npath)
    s = np.zeros(npath)
    q = np.zeros(npath)
    jj = np.zeros(npath)
    y = np.zeros(npath)
    k = 0
    while k < out_idx.size and out_idx[k] == 0:
        k += 1
    for j in range(npts - 1):
        cj = c[j]
        h = cj[H]
        x0 = x[:, j]
        dx = x[:, j + 1] - x0
        d = dx / h
        d2 += z * z * cj[A0] + 2.0 * z * d * cj[A1] + d * d * cj[A2]
        lin = x0 * cj[B0] + d * cj[B1]
        eta += cj[EJ] * lin
        q += h * (x0 * x0 + x0 * d * h + d * d * h * h / 3.0)
        jj += y * lin + x0 * x0 * cj[C01] + x0 * d * (cj[C02] + cj[C11]) + d * d * cj[C12]
        y = cj[EMH] * y + x0 * cj[FH] + d * cj[GH]
        z = cj[EH] * z + dx * cj[PH]
        s = cj[EMH] * s + dx * cj[SPHI]
        while k < out_idx.size and out_idx[k] == j + 1:
            out[:, k] = np.stack([z, d2, eta, s, q, jj], axis=1)
            k += 1
    return out
