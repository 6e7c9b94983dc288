"""Backend selection for the path recurrences.

The compiled extension ``gvp._core`` is used when it was built; otherwise
the numpy module ``gvp._core_py`` is loaded.  Setting ``GVP_PURE_PYTHON=1``
forces the numpy backend.
"""
from __future__ import annotations

import importlib
import os

import numpy as np

from gvp.quadrature import gauss_legendre

_NODES = 16


def load_backend(name: str):
    """Import a backend module by name (``"cython"`` or ``"python"``)."""
    if name == "cython":
        return importlib.import_module("gvp._core")
    if name == "python":
        return importlib.import_module("gvp._core_py")
    raise ValueError(f"unknown backend {name!r}")


def _select():
    if os.environ.get("GVP_PURE_PYTHON", "") not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", load_backend("python")


BACKEND, _impl = _select()


def _phi1(x):
    """``(e^x - 1) / x``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.expm1(x) / x
    return np.where(x == 0.0, 1.0, out)


def _psi(x):
    """``(e^x - 1 - x) / x^2 = int_0^1 v e^(x (1 - v)) dv``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.1
    series = np.zeros_like(x)
    fact = 2.0
    for k in range(10):
        series += x**k / fact
        fact *= k + 3
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (np.expm1(x) - x) / (x * x)
    return np.where(small, series, direct)


def cell_constants(grid, theta: float) -> np.ndarray:
    """Per-cell constants for :func:`path_functionals`.

    On a cell of length ``h`` the interpolated path is ``X_j + d tau``; the
    OU solution, the discounted integrals and the auxiliary process
    ``Y' = -theta Y + X`` are then explicit in ``tau``, and their cellwise
    integrals reduce to the fixed moments tabulated here.  The moments are
    computed with a Gauss-Legendre rule sized to ``max(theta h)``, exact to
    rounding.
    """
    grid = np.asarray(grid, dtype=float)
    h = np.diff(grid)
    t0 = grid[:-1]
    nodes = _NODES + 8 * int(np.ceil(min(abs(theta) * float(h.max(initial=0.0)), 40.0)))
    v, w = gauss_legendre(nodes)
    tau = h[:, None] * v[None, :]
    hw = h[:, None] * w[None, :]
    e = np.exp(theta * tau)
    em = np.exp(-theta * tau)
    p = tau * _phi1(theta * tau)
    f = tau * _phi1(-theta * tau)
    g = tau * tau * _psi(-theta * tau)
    th = theta * h
    out = np.empty((h.size, _impl.N_CONST))
    out[:, 0] = np.exp(th)
    out[:, 1] = _phi1(th)
    out[:, 2] = (hw * e * e).sum(1)
    out[:, 3] = (hw * e * p).sum(1)
    out[:, 4] = (hw * p * p).sum(1)
    out[:, 5] = (hw * em).sum(1)
    out[:, 6] = (hw * tau * em).sum(1)
    out[:, 7] = np.exp(-theta * t0)
    out[:, 8] = np.exp(-th)
    out[:, 9] = h * _phi1(-th)
    out[:, 10] = h * h * _psi(-th)
    out[:, 11] = (hw * f).sum(1)
    out[:, 12] = (hw * tau * f).sum(1)
    out[:, 13] = (hw * g).sum(1)
    out[:, 14] = (hw * tau * g).sum(1)
    out[:, 15] = np.exp(-th) * _phi1(th)
    out[:, 16] = h
    return out


def linear_recurrence(x, growth, drive) -> np.ndarray:
    return _impl.linear_recurrence(np.atleast_2d(x), growth, drive)


def path_functionals(x, consts, out_idx) -> np.ndarray:
    return _impl.path_functionals(np.atleast_2d(x), consts, out_idx)


FUNCTIONAL_NAMES = ("z", "int_z2", "eta", "exp_int", "int_x2", "double_int")

__all__ = [
    "BACKEND",
    "FUNCTIONAL_NAMES",
    "cell_constants",
    "linear_recurrence",
    "load_backend",
    "path_functionals",
]
