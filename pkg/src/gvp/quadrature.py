"""Quadrature rules for integrands with algebraic endpoint singularities.

Three families are provided:

* Gauss-Jacobi rules on [0, 1] for the weight ``x^p (1-x)^q``;
* tanh-sinh (double exponential) rules, with the known endpoint powers
  removed by a power substitution so that exponents close to -1 do not
  suffer from truncation of the node set;
* geometrically graded composite Gauss rules, used where an integrable
  singularity sits just outside the interval (``(eps + v)^beta`` with a
  small ``eps``).  These are the work horse of :mod:`gvp.kernels`.

Node-doubling error control is used by :func:`integrate_weighted` and
:func:`integrate_iterated`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from gvp.errors import DomainError, QuadratureError

DEFAULT_RTOL = 1e-10
MAX_NODES = 1024
TS_TMAX = 6.0


class RuleKind(str, enum.Enum):
    GAUSS_JACOBI = "gauss_jacobi"
    GAUSS_LEGENDRE = "gauss_legendre"
    TANH_SINH = "tanh_sinh"


@dataclass(frozen=True)
class QuadRule:
    """Specification of a rule on [0, 1] with weight ``x^p (1-x)^q``.

    For tanh-sinh, ``nodes`` is the approximate number of abscissae of the
    starting level.
    """

    kind: RuleKind = RuleKind.GAUSS_JACOBI
    nodes: int = 64
    p_weight: float = 0.0
    q_weight: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if int(self.nodes) != self.nodes or self.nodes < 2:
            raise DomainError(f"nodes must be an integer >= 2, got {self.nodes}")
        if not (self.p_weight > -1 and self.q_weight > -1):
            raise DomainError(
                f"weight exponents must exceed -1, got p={self.p_weight}, q={self.q_weight}"
            )


@dataclass(frozen=True)
class QuadResult:
    value: float
    est_error: float
    evaluations: int


# ---------------------------------------------------------------------------
# basic node sets on [0, 1]


@lru_cache(maxsize=64)
def _gl_cached(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    return _gl_cached(int(n))


@lru_cache(maxsize=256)
def _gj_cached(n: int, p: float, q: float):
    y, w = roots_jacobi(n, q, p)
    x = 0.5 * (1.0 + y)
    w = w * 2.0 ** (-(p + q + 1.0))
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_jacobi(n: int, p: float, q: float = 0.0):
    """Gauss-Jacobi nodes and weights on [0, 1] for ``x^p (1-x)^q``."""
    if not (p > -1 and q > -1):
        raise DomainError("Jacobi exponents must exceed -1")
    if p == 0.0 and q == 0.0:
        return gauss_legendre(n)
    return _gj_cached(int(n), float(p), float(q))


@lru_cache(maxsize=32)
def _ts_level(level: int):
    """New tanh-sinh abscissae of a level (all of them for level 0).

    Returns ``(x, xc, w)`` with ``xc = 1 - x`` computed without
    cancellation.  Weights already include the step ``h``.
    """
    h = 2.0 ** (-level)
    n = int(math.ceil(TS_TMAX / h))
    j = np.arange(-n, n + 1)
    if level > 0:
        j = j[j % 2 != 0]
    t = j * h
    u = 0.5 * math.pi * np.sinh(t)
    e = np.exp(-2.0 * np.abs(u))
    small = e / (1.0 + e)  # distance to the nearer endpoint
    big = 1.0 / (1.0 + e)
    x = np.where(u < 0, small, big)
    xc = np.where(u < 0, big, small)
    w = h * math.pi * np.cosh(t) * e / (1.0 + e) ** 2
    keep = (x > 0) & (xc > 0) & (w > 0)
    return x[keep], xc[keep], w[keep]


def _ts_weighted_level(level: int, p: float, q: float):
    """Tanh-sinh nodes for the weight ``x^p (1-x)^q`` on [0, 1].

    The interval is split at 1/2 and each endpoint power is absorbed by
    the substitution ``x = y^(1/(p+1)) / 2``.
    """
    y, yc, wy = _ts_level(level)
    xl = 0.5 * y ** (1.0 / (p + 1.0))
    wl = wy * 0.5 ** (p + 1.0) / (p + 1.0) * (1.0 - xl) ** q
    xr_c = 0.5 * y ** (1.0 / (q + 1.0))
    wr = wy * 0.5 ** (q + 1.0) / (q + 1.0) * (1.0 - xr_c) ** p
    x = np.concatenate([xl, 1.0 - xr_c])
    xc = np.concatenate([1.0 - xl, xr_c])
    w = np.concatenate([wl, wr])
    keep = (x > 0) & (xc > 0)
    return x[keep], xc[keep], w[keep]


# ---------------------------------------------------------------------------
# node doubling drivers


def _converged(prev: float, cur: float, rtol: float) -> bool:
    return abs(cur - prev) <= rtol * max(abs(cur), 1e-300)


def integrate_weighted(
    f: Callable[[np.ndarray], np.ndarray],
    rule: QuadRule = QuadRule(),
    *,
    rtol: float = DEFAULT_RTOL,
) -> QuadResult:
    """Approximate ``int_0^1 x^p (1-x)^q f(x) dx``.

    The node count is doubled (Gauss rules, up to 1024 nodes) or the
    step halved (tanh-sinh, up to level 9) until two successive values
    agree to ``rtol``.

    Raises
    ------
    QuadratureError
        If the tolerance is not met within the refinement budget.
    """
    p, q = rule.p_weight, rule.q_weight
    evals = 0
    if rule.kind is RuleKind.TANH_SINH:
        # level whose node count is closest to the requested one
        level = max(0, int(round(math.log2(max(rule.nodes, 2) / (4 * TS_TMAX)))) + 1)
        total, prev = None, None
        for lev in range(0, 10):
            x, _, w = _ts_weighted_level(lev, p, q)
            s = float(np.dot(w, f(x)))
            evals += x.size
            total = s if total is None else 0.5 * total + s
            if lev >= level and prev is not None and _converged(prev, total, rtol):
                return QuadResult(total, abs(total - prev), evals)
            prev = total
        raise QuadratureError(f"tanh-sinh did not reach rtol={rtol}")
    n = int(rule.nodes)
    prev = None
    while n <= MAX_NODES:
        if rule.kind is RuleKind.GAUSS_JACOBI:
            x, w = gauss_jacobi(n, p, q)
        else:
            x, w = gauss_legendre(n)
            w = w * x**p * (1.0 - x) ** q
        cur = float(np.dot(w, f(x)))
        evals += n
        if prev is not None and _converged(prev, cur, rtol):
            return QuadResult(cur, abs(cur - prev), evals)
        prev = cur
        n *= 2
    raise QuadratureError(f"{rule.kind.value} did not reach rtol={rtol} with {MAX_NODES} nodes")


def integrate_iterated(
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    p,
    t: float,
    *,
    nodes: int = 32,
    rtol: float = DEFAULT_RTOL,
) -> QuadResult:
    """Approximate ``int_0^t u^beta int_0^u s^(2 alpha) (u-s)^gamma g(s, u) ds du``.

    ``g`` must accept broadcastable arrays ``(s, u)``.  The inner variable
    is scaled to ``s = u x`` so both levels are Gauss-Jacobi rules with
    exact weights; the result scales like ``t^(2 alpha + beta + gamma + 2)``
    when ``g`` is constant.
    """
    from gvp.model import _as_params

    p = _as_params(p)
    if not t > 0:
        raise DomainError("t must be positive")
    a2 = 2.0 * p.alpha
    outer_pow = a2 + p.beta + p.gamma + 1.0
    n = int(nodes)
    prev, evals = None, 0
    while n <= MAX_NODES // 4:
        xi, wi = gauss_jacobi(n, a2, p.gamma)
        yo, wo = gauss_jacobi(n, outer_pow, 0.0)
        u = t * yo[:, None]
        s = u * xi[None, :]
        vals = np.asarray(g(s, u), dtype=float) * np.ones_like(s)
        cur = float(t ** (outer_pow + 1.0) * wo @ (vals @ wi))
        evals += n * n
        if prev is not None and _converged(prev, cur, rtol):
            return QuadResult(cur, abs(cur - prev), evals)
        prev = cur
        n *= 2
    raise QuadratureError(f"iterated rule did not reach rtol={rtol}")


# ---------------------------------------------------------------------------
# batched adaptive tanh-sinh on intervals


def integrate_intervals(
    f: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    a,
    b,
    *,
    p_left: float = 0.0,
    q_right: float = 0.0,
    rtol: float = 1e-11,
    min_level: int = 3,
    max_level: int = 8,
    strict: bool = True,
):
    """Integrate ``(x-a)^p_left (b-x)^q_right f(x)`` over a batch of intervals.

    ``f(x, dl, dr)`` receives abscissae of shape ``(B, N)`` together with
    the accurately computed distances ``dl = x - a`` and ``dr = b - x``
    and must return values of the same shape.  Intervals of zero length
    give zero.

    Returns
    -------
    values, errors : ndarray
        Integrals and error estimates (difference of the last two levels).
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    length = b - a
    if np.any(length < 0):
        raise DomainError("intervals must satisfy a <= b")
    total = np.zeros(a.shape)
    prev = None
    err = np.full(a.shape, np.inf)
    for lev in range(0, max_level + 1):
        y, yc, w = _ts_weighted_level(lev, p_left, q_right)
        dl = length[:, None] * y[None, :]
        dr = length[:, None] * yc[None, :]
        x = np.where(y[None, :] <= 0.5, a[:, None] + dl, b[:, None] - dr)
        ok = (dl > 0) & (dr > 0)
        if not np.all(ok):
            mid = 0.5 * (a + b)[:, None] * np.ones_like(x)
            x = np.where(ok, x, mid)
            dl = np.where(ok, dl, 0.5 * length[:, None])
            dr = np.where(ok, dr, 0.5 * length[:, None])
        vals = np.asarray(f(x, dl, dr), dtype=float)
        vals = np.where(ok, vals, 0.0)
        s = (vals * w[None, :]).sum(axis=1)
        total = s if lev == 0 else 0.5 * total + s
        if prev is not None:
            err = np.abs(total - prev)
            scale = np.maximum(np.abs(total), 1e-300)
            if lev >= min_level and np.all(err <= rtol * scale):
                break
        prev = total
    scale_len = length ** (1.0 + p_left + q_right)
    values = total * scale_len
    errors = err * scale_len
    if strict and np.any(errors > 100.0 * rtol * np.maximum(np.abs(values), 1e-300)):
        raise QuadratureError("tanh-sinh interval rule did not converge")
    return values, errors


# ---------------------------------------------------------------------------
# geometrically graded composite rules


def graded_offsets(
    length,
    scale,
    *,
    power: float = 0.0,
    n: int = 10,
    max_panels: int = 60,
    max_width=None,
):
    """Composite rule on ``[0, length]`` graded toward 0.

    Panels double in size away from 0, starting below ``scale``; the
    first panel carries the Jacobi weight ``o^power`` and all weights
    represent the measure ``o^power do``.  A singularity of the integrand
    at distance ``>= scale`` to the left of 0 is then resolved to near
    machine precision with ``n = 10`` nodes per panel.  With
    ``max_width`` the doubling stops at that width and the rest of the
    interval is covered by panels of width ``max_width`` (for factors
    such as ``exp(c o)`` that vary on a fixed length scale).

    Parameters
    ----------
    length, scale : array_like, shape (B,)
    power : float
        Exponent of the endpoint weight, ``> -1``.

    Returns
    -------
    offsets, weights : ndarray, shape (B, K * n)
    """
    length = np.atleast_1d(np.asarray(length, dtype=float))
    scale = np.broadcast_to(np.asarray(scale, dtype=float), length.shape)
    if max_width is None:
        top = length
    else:
        top = np.minimum(length, np.broadcast_to(np.asarray(max_width, dtype=float), length.shape))
    with np.errstate(divide="ignore", over="ignore"):
        ratio = np.where(scale > 0, top / np.where(scale > 0, scale, 1.0), np.inf)
    k = np.ceil(np.log2(np.maximum(ratio, 1.0))) + 1.0
    k = np.clip(np.where(np.isfinite(k), k, max_panels), 1, max_panels).astype(int)
    n_uni = np.ceil(length / top - 1.0 - 1e-12).clip(min=0).astype(int)
    kb = int((k + n_uni).max()) if k.size else 1
    idx = np.arange(1, kb + 1)[None, :]
    kk = k[:, None]
    geo = top[:, None] * np.exp2(np.minimum(idx, kk) - kk).astype(float)
    ends = np.where(idx <= kk, geo, top[:, None] * (1.0 + (idx - kk)))
    ends = np.minimum(ends, length[:, None])
    starts = np.concatenate([np.zeros((length.size, 1)), ends[:, :-1]], axis=1)
    width = ends - starts
    xg, wg = gauss_legendre(n)
    off = starts[:, :, None] + width[:, :, None] * xg
    wts = width[:, :, None] * wg
    if power != 0.0:
        wts = wts * off**power
        xj, wj = gauss_jacobi(n, power, 0.0)
        w0 = width[:, 0]
        off[:, 0, :] = w0[:, None] * xj
        wts[:, 0, :] = w0[:, None] ** (power + 1.0) * wj
    return off.reshape(length.size, -1), wts.reshape(length.size, -1)
