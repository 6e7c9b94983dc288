"""Second-order structure of the process.

Two independent routes are implemented.

* :func:`increment_cov` integrates ``s^(2 alpha) A(s) B(s)`` over ``s``,
  where ``A`` and ``B`` are the inner kernel integrals over the two
  increments; this is the direct nested quadrature.
* :class:`CovarianceProfile` uses self-similarity.  With
  ``phi(r) = int_0^1 z^(2 alpha) (1-z)^gamma (1-rz)^gamma dz`` (a
  hypergeometric function) and ``g(r) = r^(2 alpha+beta+gamma+1) phi(r)``,

      E X_x X_1 = [x^(2 rho) G(1) + G(x) + x^(2 rho) H(x)] / (2 rho),
      G(x) = int_0^x g,   H(x) = int_x^1 g(r) r^(-2 rho) dr,

  for ``0 <= x <= 1`` and ``E X_s X_t = t^(2 rho) E X_(s/t) X_1``.  ``G``
  and ``H`` are tabulated once per parameter set as piecewise Chebyshev
  antiderivatives, so a full grid covariance costs one table lookup per
  entry.  :func:`grid_cov` uses this route.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from gvp.errors import DomainError, FactorizationError
from gvp.kernels import inner_kernel, partial_kernel, scaled_kernel
from gvp.model import ProcessParams, _as_params, derived
from gvp.quadrature import graded_offsets, integrate_intervals
from gvp.specfun import beta_fn, digamma, gamma_fn, hyper_2f1, rgamma

OUTER_RTOL = 1e-11
# powers of subnormal times lose all precision
MIN_TIME = 1e-280
_BLOCK_ELEMS = 1 << 18


@dataclass(frozen=True)
class CovMatrix:
    """Covariance matrix of ``X`` on a grid of positive times."""

    grid: np.ndarray
    entries: np.ndarray
    assembly_tol: float

    def to_csv(self, path) -> None:
        """Write ``t_i,t_j,value`` rows in row-major order."""
        n = self.grid.size
        ti = np.repeat(self.grid, n)
        tj = np.tile(self.grid, n)
        with open(path, "w") as fh:
            fh.write("t_i,t_j,value\n")
            for a, b, v in zip(ti, tj, self.entries.ravel()):
                fh.write(f"{float(a)!r},{float(b)!r},{float(v)!r}\n")

    def cholesky(self, jitters=(0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10)) -> np.ndarray:
        """Lower Cholesky factor, adding ``eps * max(diag) * I`` if needed.

        Raises
        ------
        FactorizationError
            If the matrix is not positive definite even with ``eps = 1e-10``.
        """
        scale = float(np.max(np.diag(self.entries)))
        eye = np.eye(self.grid.size)
        for eps in jitters:
            try:
                return np.linalg.cholesky(self.entries + eps * scale * eye)
            except np.linalg.LinAlgError:
                continue
        raise FactorizationError(
            f"covariance on {self.grid.size} points is not positive definite within the jitter budget"
        )


# ---------------------------------------------------------------------------
# direct nested quadrature


def _outer(p: ProcessParams, pieces, integrand, *, q_right: float = 0.0, rtol=OUTER_RTOL):
    """Sum of ``int s^(2 alpha) F(s) ds`` over consecutive pieces.

    ``integrand(s, dist, scaled)`` returns ``F(s)`` where ``dist`` is the
    distance from ``s`` to the right end of the last piece (accurate
    there).  On the last piece ``scaled`` is True and the integrand must
    return ``F(s) / dist^q_right`` instead; the power is then integrated
    exactly.  The first piece starts at 0 and carries ``s^(2 alpha)``
    exactly.
    """
    a2 = 2.0 * p.alpha
    total = 0.0
    last = len(pieces) - 1
    end = pieces[-1][1]
    for i, (a, b) in enumerate(pieces):
        if b <= a:
            continue
        q = q_right if i == last else 0.0

        def f(x, dl, dr, first=(i == 0), final=(i == last)):
            dist = dr if final else end - x
            v = integrand(x, dist, bool(final and q))
            return v if first else v * x**a2

        val, _ = integrate_intervals(f, [a], [b], p_left=a2 if i == 0 else 0.0, q_right=q, rtol=rtol)
        total += float(val[0])
    return total


def _breakpoints(lo: float, length: float, top: float):
    """Points ``lo - length * 4^k`` inside ``(0, top)``, then ``lo`` itself."""
    pts = []
    k = 0
    while True:
        x = lo - length * 4.0**k
        if x <= 0:
            break
        pts.append(x)
        k += 1
    pts.append(lo)
    return [x for x in pts if 0 < x < top]


def increment_cov(p, t1: float, t2: float, t3: float, t4: float) -> float:
    """``E[(X_t2 - X_t1)(X_t4 - X_t3)]`` by nested quadrature."""
    p = _as_params(p)
    if not (0 <= t1 < t2 and 0 <= t3 < t4):
        raise DomainError(f"increments must satisfy 0 <= t1 < t2 and 0 <= t3 < t4, got {(t1, t2, t3, t4)}")
    if any(0 < t < MIN_TIME for t in (t1, t3)):
        raise DomainError(f"positive times below {MIN_TIME} are not resolved; use 0")
    top = min(t2, t4)
    pts = set(_breakpoints(t1, t2 - t1, top)) | set(_breakpoints(t3, t4 - t3, top))
    edges = [0.0] + sorted(pts) + [top]
    pieces = list(zip(edges[:-1], edges[1:]))
    same = (t1, t2) == (t3, t4)

    def integrand(s, dist, scaled):
        a = partial_kernel(p, t1, t2, s)
        b = a if same else partial_kernel(p, t3, t4, s)
        return a * b

    return _outer(p, pieces, integrand)


def cov_x1_increment(p, t: float) -> float:
    """``E[X_1 (X_(t+1) - X_t)]`` for ``t >= 1``."""
    if not t >= 1:
        raise DomainError(f"cov_x1_increment requires t >= 1, got {t}")
    return increment_cov(p, 0.0, 1.0, t, t + 1.0)


def incremental_variance(p, t: float) -> float:
    """``E (X_(t+1) - X_t)^2``."""
    if not t >= 0:
        raise DomainError("t must be nonnegative")
    return increment_cov(p, t, t + 1.0, t, t + 1.0)


# ---------------------------------------------------------------------------
# self-similar profile


_CHEB_DEG = 24


@lru_cache(maxsize=4)
def _cheb_tools(deg: int):
    k = np.arange(deg + 1)
    nodes = np.cos(np.pi * (k + 0.5) / (deg + 1))
    vander = np.polynomial.chebyshev.chebvander(nodes, deg)
    return nodes, np.linalg.inv(vander)


def _clenshaw(coef: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate rows of Chebyshev coefficients ``coef[i]`` at ``y[i]``."""
    b1 = np.zeros(y.shape)
    b2 = np.zeros(y.shape)
    for j in range(coef.shape[1] - 1, 0, -1):
        b1, b2 = 2.0 * y * b1 - b2 + coef[:, j], b1
    return y * b1 - b2 + coef[:, 0]


class CovarianceProfile:
    """Tabulated ``E X_x X_1`` on ``[0, 1]`` for one parameter set."""

    def __init__(self, p, *, n_left: int = 30, n_right: int = 45):
        p = _as_params(p)
        self.params = p
        self.rho = derived(p).rho
        two_rho = 2.0 * self.rho
        a0 = 2.0 * p.alpha + p.beta + p.gamma + 1.0
        self._a0 = a0
        self._hb = (-p.gamma, 2.0 * p.alpha + 1.0, 2.0 * p.alpha + p.gamma + 2.0)
        self._bconst = beta_fn(2.0 * p.alpha + 1.0, p.gamma + 1.0)
        left = [2.0**-k for k in range(n_left, 0, -1)]
        right = [1.0 - 2.0**-k for k in range(2, n_right + 1)]
        self.edges = np.array([0.0] + left + right + [1.0])
        inner = self.edges[1:-1]
        lo, hi = inner[:-1], inner[1:]
        nodes, vinv = _cheb_tools(_CHEB_DEG)
        half = 0.5 * (hi - lo)
        r = 0.5 * (hi + lo)[:, None] + half[:, None] * nodes[None, :]
        # distance to 1 carried exactly for the panels accumulating at 1
        z = (1.0 - hi)[:, None] + half[:, None] * (1.0 - nodes[None, :])
        gv = self._g(r.ravel(), z.ravel()).reshape(r.shape)
        hv = gv * r ** (-two_rho)
        cg = gv @ vinv.T
        ch = hv @ vinv.T
        # antiderivatives in the panel variable y in [-1, 1], zero at y = -1
        self._ig = np.array([np.polynomial.chebyshev.chebint(c, lbnd=-1) for c in cg]) * half[:, None]
        self._ih = np.array([np.polynomial.chebyshev.chebint(c, lbnd=-1) for c in ch]) * half[:, None]
        ones = np.ones(lo.size)
        panel_g = _clenshaw(self._ig, ones)
        panel_h = _clenshaw(self._ih, ones)
        r0 = self.edges[1]
        g_first = self._series_g(np.array([r0]))[0]
        g_last, h_last = self._last_panel()
        self._cum_g = np.concatenate([[0.0, g_first], g_first + np.cumsum(panel_g)])
        g1 = self._cum_g[-1] + g_last
        # H from the right: value at each edge of the tabulated panels
        cum_h_right = np.concatenate([np.cumsum(panel_h[::-1])[::-1], [0.0]]) + h_last
        self._cum_h = cum_h_right  # H at edges[1:-1]
        self.g1 = g1
        self.variance_const = g1 / self.rho

    # -- profile pieces ----------------------------------------------------

    def _g(self, r, z):
        a, b, c = self._hb
        return r**self._a0 * self._bconst * hyper_2f1(a, b, c, r, one_minus_x=z)

    def _coeffs(self):
        a, b, c = self._hb
        return [1.0, a * b / c, a * (a + 1) * b * (b + 1) / (2.0 * c * (c + 1))]

    def _series_g(self, x):
        """``int_0^x g`` for x in the first panel (3-term series)."""
        out = np.zeros(x.shape)
        for n, cn in enumerate(self._coeffs()):
            e = self._a0 + n + 1.0
            out += cn * x**e / e
        return self._bconst * out

    def _series_h(self, x):
        """``int_x^edge1 g(r) r^(-2 rho) dr`` for x in the first panel."""
        r0 = self.edges[1]
        out = np.zeros(x.shape)
        for n, cn in enumerate(self._coeffs()):
            e = self._a0 - 2.0 * self.rho + n + 1.0
            if abs(e) < 1e-12:
                out += cn * np.log(r0 / x)
            else:
                out += cn * (r0**e - x**e) / e
        return self._bconst * out

    def _last_panel(self):
        """Integrals of g and g r^(-2 rho) over the last panel ``[1 - w, 1]``.

        The panel is narrower than 1e-13, so the two-term behaviour of the
        hypergeometric factor at 1 is integrated in closed form; the
        neglected factors are ``1 + O(w)``.
        """
        a, b, c = self._hb
        w = 1.0 - self.edges[-2]
        d = c - a - b
        if abs(d) < 1e-13:
            pre = gamma_fn(c) * rgamma(a) * rgamma(b)
            k = 2.0 * digamma(1.0) - digamma(a) - digamma(b)
            val = pre * (k * w + w - w * np.log(w))
        else:
            a1 = gamma_fn(c) * gamma_fn(d) * rgamma(c - a) * rgamma(c - b) if d > 0 or abs(d - round(d)) > 1e-12 else 0.0
            a2 = gamma_fn(c) * gamma_fn(-d) * rgamma(a) * rgamma(b) if abs(d - round(d)) > 1e-12 else 0.0
            if d > 0 and abs(d - round(d)) <= 1e-12:
                a1 = gamma_fn(c) * gamma_fn(d) * rgamma(c - a) * rgamma(c - b)
            val = a1 * w + a2 * w ** (d + 1.0) / (d + 1.0)
        val *= self._bconst
        return float(val), float(val)

    # -- evaluation ---------------------------------------------------------

    def _gh(self, x):
        """``(G(x), H(x))`` for ``edges[1] <= x <= edges[-2]``."""
        k = np.searchsorted(self.edges, x, side="right") - 2  # tabulated panel index
        k = np.clip(k, 0, self._ig.shape[0] - 1)
        lo = self.edges[k + 1]
        hi = self.edges[k + 2]
        y = np.clip((2.0 * x - lo - hi) / (hi - lo), -1.0, 1.0)
        part_g = _clenshaw(self._ig[k], y)
        full_h = _clenshaw(self._ih[k], np.ones_like(y))
        part_h = full_h - _clenshaw(self._ih[k], y)
        return self._cum_g[k + 1] + part_g, self._cum_h[k + 1] + part_h

    def unit_cov(self, x):
        """``E X_x X_1`` for ``x`` in ``[0, 1]`` (vectorised)."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if np.any((flat < 0) | (flat > 1)):
            raise DomainError("ratio must lie in [0, 1]")
        two_rho = 2.0 * self.rho
        g = np.empty(flat.shape)
        h = np.empty(flat.shape)
        e1, e_last = self.edges[1], self.edges[-2]
        low = flat < e1
        if np.any(low):
            g[low] = self._series_g(flat[low])
            h[low] = self._cum_h[0] + self._series_h(np.where(flat[low] > 0, flat[low], 1.0))
        mid = (flat >= e1) & (flat <= e_last)
        if np.any(mid):
            g[mid], h[mid] = self._gh(flat[mid])
        out = np.empty(flat.shape)
        ok = ~(flat > e_last)
        with np.errstate(invalid="ignore"):
            xr = flat[ok] ** two_rho
            tail = np.where(flat[ok] > 0, xr * h[ok], 0.0)
        out[ok] = (xr * self.g1 + g[ok] + tail) / two_rho
        top = flat > e_last
        if np.any(top):
            # the last panel is narrower than 1e-13: interpolate linearly
            g_e, h_e = self._gh(np.array([e_last]))
            v_e = (e_last**two_rho * (self.g1 + h_e[0]) + g_e[0]) / two_rho
            lam = (flat[top] - e_last) / (1.0 - e_last)
            out[top] = (1.0 - lam) * v_e + lam * self.variance_const
        return out.reshape(x.shape)

    def cov(self, s, t):
        """``E X_s X_t`` (broadcast)."""
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        lo = np.minimum(s, t)
        hi = np.maximum(s, t)
        out = np.zeros(s.shape)
        pos = hi > 0
        if np.any(pos):
            out[pos] = hi[pos] ** (2.0 * self.rho) * self.unit_cov(lo[pos] / hi[pos])
        return out


@lru_cache(maxsize=32)
def _profile_cached(p: ProcessParams) -> CovarianceProfile:
    return CovarianceProfile(p)


def profile(p) -> CovarianceProfile:
    """Cached :class:`CovarianceProfile` for a parameter set."""
    return _profile_cached(_as_params(p))


def variance_constant(p) -> float:
    """``C = E X_1^2``."""
    return profile(p).variance_const


def grid_cov(p, grid) -> CovMatrix:
    """Covariance matrix of ``(X_t)`` over a strictly increasing positive grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty one-dimensional array")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing and positive")
    prof = profile(p)
    n = grid.size
    ent = np.empty((n, n))
    # row blocks keep the profile's temporaries small on large grids
    step = max(1, _BLOCK_ELEMS // n)
    for i in range(0, n, step):
        ent[i : i + step] = prof.cov(grid[i : i + step, None], grid[None, :])
    ent += ent.T
    ent *= 0.5
    return CovMatrix(grid=grid.copy(), entries=ent, assembly_tol=1e-12 * float(np.max(np.diag(ent))))


# ---------------------------------------------------------------------------
# Wiener-type integrals against the kernel


def weighted_inner(p, f: Callable, s, T: float, *, resolution=None, scaled: bool = False, dist=None):
    """``J(s) = int_s^T f(t) t^beta (t-s)^gamma dt`` (vectorised over ``s``).

    ``resolution`` is a length over which ``f`` changes by O(1); panels
    are kept narrower than that.  With ``scaled=True`` the result is
    divided by ``(T - s)^(gamma + 1)``.  ``dist`` may carry ``T - s`` to
    full precision (it cannot be recovered from ``s`` near ``T``).
    """
    p = _as_params(p)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    length = T - s if dist is None else np.broadcast_to(np.asarray(dist, dtype=float), s.shape)
    out = np.zeros(s.shape)
    ok = length > 0
    if np.any(ok):
        ss, ll = s[ok], length[ok]
        with np.errstate(over="ignore"):
            mw = None if resolution is None else resolution / ll
            off, w = graded_offsets(np.ones(ss.shape), ss / ll, power=p.gamma, max_width=mw)
        t = ss[:, None] + ll[:, None] * off
        vals = np.asarray(f(t), dtype=float) * np.ones_like(t)
        res = (vals * t**p.beta * w).sum(axis=1)
        out[ok] = res if scaled else res * ll ** (p.gamma + 1.0)
    return out


def weighted_integral_variance(p, f: Callable, T: float, *, resolution=None) -> float:
    """``Var int_0^T f dX = int_0^T s^(2 alpha) J(s)^2 ds``."""
    p = _as_params(p)
    if not T > 0:
        raise DomainError("T must be positive")

    def integrand(s, dist, scaled):
        j = weighted_inner(p, f, s.ravel(), T, resolution=resolution, scaled=scaled, dist=dist.ravel())
        return j.reshape(s.shape) ** 2

    pieces = _tail_pieces(T, resolution)
    return _outer(p, pieces, integrand, q_right=2.0 * p.gamma + 2.0)


def _tail_pieces(T: float, resolution):
    if resolution is None or resolution >= T / 4:
        return [(0.0, T / 2), (T / 2, T)]
    edges = [0.0, T / 2]
    x = T - 8.0 * resolution
    if x > T / 2:
        edges.append(x)
    edges.append(T)
    return list(zip(edges[:-1], edges[1:]))


def exp_inner(p, theta: float, s, T: float, *, scaled: bool = False, dist=None):
    """``int_s^T exp(theta (t - T)) t^beta (t-s)^gamma dt``."""
    return weighted_inner(
        p, lambda t: np.exp(theta * (t - T)), s, T, resolution=1.0 / theta, scaled=scaled, dist=dist
    )


def exp_integral_variance(p, theta: float, T: float) -> float:
    """``E (exp(-theta T) int_0^T exp(theta t) dX_t)^2``."""
    p = _as_params(p)
    return weighted_integral_variance(p, lambda t: np.exp(theta * (t - T)), T, resolution=1.0 / theta)


def cross_expectation(p, theta: float, s: float, T: float) -> float:
    """``E[X_s exp(-theta T) int_0^T exp(theta r) dX_r]`` for ``0 < s <= T``."""
    p = _as_params(p)
    if not theta > 0:
        raise DomainError("theta must be positive")
    if not 0 < s <= T:
        raise DomainError(f"cross_expectation requires 0 < s <= T, got s={s}, T={T}")

    def integrand(r, dist, scaled):
        # kernel(s, r) = (s - r)^(beta + gamma + 1) I(r / (s - r))
        power = p.beta if scaled else p.beta + p.gamma + 1.0
        ker = dist**power * scaled_kernel(p.beta, p.gamma, (r / dist).ravel()).reshape(r.shape)
        far = None if s < T else dist.ravel()
        return ker * exp_inner(p, theta, r.ravel(), T, dist=far).reshape(r.shape)

    return _outer(p, [(0.0, s / 2), (s / 2, s)], integrand, q_right=p.gamma + 1.0)


__all__ = [
    "CovMatrix",
    "CovarianceProfile",
    "cov_x1_increment",
    "cross_expectation",
    "exp_inner",
    "exp_integral_variance",
    "grid_cov",
    "increment_cov",
    "incremental_variance",
    "inner_kernel",
    "profile",
    "variance_constant",
    "weighted_inner",
    "weighted_integral_variance",
]
