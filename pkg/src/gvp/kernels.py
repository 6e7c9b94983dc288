"""Vectorised evaluation of the inner kernel integrals.

``inner_kernel(p, s, L)`` returns ``int_s^(s+L) u^beta (u-s)^gamma du``.
Writing ``u = s + L v`` gives ``L^(beta+gamma+1) I(s/L)`` with

    I(eps) = int_0^1 v^gamma (eps + v)^beta dv,

whose factor ``(eps + v)^beta`` is nearly singular at ``v = -eps``.  For
moderate ``eps`` a graded composite rule is used; for ``eps < 1e-9`` the
convergent expansion

    I(eps) = sum_k C(beta, k) eps^k / (c - k)
             + Gamma(gamma+1) Gamma(-c) / Gamma(-beta) eps^c,   c = beta+gamma+1,

truncated after ``k = 2``, unless ``c`` is within 1e-6 of 0, 1 or 2.
"""
from __future__ import annotations

import numpy as np

from gvp.quadrature import graded_offsets
from gvp.specfun import gamma_fn, rgamma

SMALL_EPS = 1e-9
_CHUNK = 4096


def _chunked(fn, *arrays):
    n = arrays[0].size
    if n <= _CHUNK:
        return fn(*arrays)
    out = np.empty(n)
    for i in range(0, n, _CHUNK):
        out[i : i + _CHUNK] = fn(*(a[i : i + _CHUNK] for a in arrays))
    return out


def _resonant(c: float) -> bool:
    return min(abs(c), abs(c - 1.0), abs(c - 2.0)) < 1e-6


def scaled_kernel(beta: float, gamma: float, eps):
    """``I(eps) = int_0^1 v^gamma (eps + v)^beta dv`` for ``eps >= 0``."""
    eps = np.asarray(eps, dtype=float).ravel()
    out = np.empty(eps.shape)
    if beta == 0.0:
        out[:] = 1.0 / (gamma + 1.0)
        return out
    c = beta + gamma + 1.0
    small = eps < SMALL_EPS
    if _resonant(c):
        small[:] = False
    if np.any(small):
        e = eps[small]
        series = 1.0 / c + beta * e / (c - 1.0) + 0.5 * beta * (beta - 1.0) * e * e / (c - 2.0)
        coef = gamma_fn(gamma + 1.0) * gamma_fn(-c) * rgamma(-beta)
        with np.errstate(divide="ignore", invalid="ignore"):
            sing = np.where(e > 0, coef * e**c, 0.0 if c > 0 else np.inf)
        out[small] = series + sing
    big = ~small
    if np.any(big):

        def block(e):
            off, w = graded_offsets(np.ones(e.shape), e, power=gamma)
            return ((e[:, None] + off) ** beta * w).sum(axis=1)

        out[big] = _chunked(block, eps[big])
    return out


def inner_kernel(p, s, length):
    """``int_s^(s+length) u^beta (u-s)^gamma du`` (arrays broadcast)."""
    s, length = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(length, dtype=float))
    shape = s.shape
    s = s.ravel()
    length = length.ravel()
    c = p.beta + p.gamma + 1.0
    out = np.zeros(s.shape)
    pos = length > 0
    if np.any(pos):
        out[pos] = length[pos] ** c * scaled_kernel(p.beta, p.gamma, s[pos] / length[pos])
    return out.reshape(shape)


def partial_kernel(p, lo, hi, s):
    """``int_max(s,lo)^hi u^beta (u-s)^gamma du`` for ``s < hi`` (broadcast).

    When ``s < lo`` the singular point lies a distance ``d = lo - s``
    outside the interval and the rule is graded with scale ``d``.
    """
    lo, hi, s = np.broadcast_arrays(
        np.asarray(lo, dtype=float), np.asarray(hi, dtype=float), np.asarray(s, dtype=float)
    )
    shape = s.shape
    lo, hi, s = lo.ravel(), hi.ravel(), s.ravel()
    out = np.zeros(s.shape)
    inside = (s >= lo) & (s < hi)
    if np.any(inside):
        out[inside] = inner_kernel(p, s[inside], hi[inside] - s[inside])
    outside = s < lo
    if np.any(outside):
        b, g = p.beta, p.gamma

        def block(lo_, hi_, s_):
            d = lo_ - s_
            off, w = graded_offsets(hi_ - lo_, d)
            vals = (lo_[:, None] + off) ** b * (d[:, None] + off) ** g
            return (vals * w).sum(axis=1)

        out[outside] = _chunked(block, lo[outside], hi[outside], s[outside])
    return out.reshape(shape)
