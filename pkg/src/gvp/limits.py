"""Asymptotic constants, rate-ratio series and growth-envelope statistics.

Quantities that carry ``e^(theta T)`` are evaluated with that factor
removed analytically (the inner integrals use ``e^(theta (t - T))``), so
the ratio series stay finite for any ``T`` and logarithms are reported
where the raw magnitude would overflow.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from gvp import core
from gvp.covariance import _outer, _tail_pieces, exp_inner, exp_integral_variance, variance_constant
from gvp.errors import DomainError
from gvp.model import _as_params, derived
from gvp.quadrature import graded_offsets, integrate_intervals
from gvp.simulate import PathBatch, simulate_paths, uniform_grid
from gvp.specfun import beta_fn, gamma_fn, hyper_2f1, log_gamma, rgamma

_HALF_TOL = 1e-12


class GammaCase(str, enum.Enum):
    LT = "gamma_lt"
    EQ = "gamma_eq"
    GT = "gamma_gt"


def gamma_case(p) -> GammaCase:
    g = _as_params(p).gamma
    if abs(g + 0.5) < _HALF_TOL:
        return GammaCase.EQ
    return GammaCase.LT if g < -0.5 else GammaCase.GT


def sigma_gamma(gamma: float) -> float:
    """``sqrt(G(g+1) G(-2g-1) G(2g+2) / G(-g))`` for ``-1 < g < -1/2``."""
    if not -1.0 < gamma < -0.5:
        raise DomainError("sigma(gamma) requires -1 < gamma < -1/2")
    return math.sqrt(gamma_fn(gamma + 1) * gamma_fn(-2 * gamma - 1) * gamma_fn(2 * gamma + 2) / gamma_fn(-gamma))


def varsigma(alpha: float, gamma: float) -> float:
    """``sqrt(G(2a+1) G(2g+1) / G(2a+2g+2))`` for ``g > -1/2``."""
    if not gamma > -0.5:
        raise DomainError("varsigma requires gamma > -1/2")
    return math.sqrt(beta_fn(2 * alpha + 1, 2 * gamma + 1))


# ---------------------------------------------------------------------------
# E eta_inf^2


class EtaMethod(str, enum.Enum):
    HYPERGEOMETRIC_1D = "hypergeometric_1d"
    BRUTE_2D = "brute_2d"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class EtaMoment:
    value: float
    method: str
    est_error: float


def _eta_hypergeometric(p, theta: float) -> EtaMoment:
    a, b, g = p.alpha, p.beta, p.gamma
    two_rho = 2 * derived(p).rho
    a0 = 2 * a + b + g + 1
    fa, fb, fc = -g, 2 * a + 1, 2 * a + g + 2
    q = min(2 * g + 1, 0.0)

    def left(x, dl, dr):
        return (1 + x) ** (-two_rho) * hyper_2f1(fa, fb, fc, x.ravel()).reshape(x.shape)

    def right(x, dl, dr):
        f = hyper_2f1(fa, fb, fc, x.ravel(), one_minus_x=dr.ravel()).reshape(x.shape)
        return x**a0 * (1 + x) ** (-two_rho) * f / dr**q

    v1, e1 = integrate_intervals(left, [0.0], [0.5], p_left=a0)
    v2, e2 = integrate_intervals(right, [0.5], [1.0], q_right=q)
    lg, sg = log_gamma(two_rho)
    pref = 2.0 * sg * math.exp(lg - (two_rho + 2) * math.log(theta)) * beta_fn(2 * a + 1, g + 1)
    return EtaMoment(pref * float(v1[0] + v2[0]), EtaMethod.HYPERGEOMETRIC_1D.value, pref * float(e1[0] + e2[0]))


def _laplace_kernel(p, theta: float, s):
    """``s^alpha int_0^inf e^(-theta u) (s+u)^beta u^gamma du`` (vectorised over ``s``).

    For ``theta s < 1e-13`` the two leading terms of the expansion at
    ``s = 0``, ``G(c) theta^-c + G(gamma+1) G(-c) / G(-beta) s^c`` with
    ``c = beta + gamma + 1``, are used unless ``c`` is near an integer.
    """
    s = np.asarray(s, dtype=float)
    flat = s.ravel()
    out = np.empty(flat.shape)
    c = p.beta + p.gamma + 1.0
    resonant = abs(c - round(c)) < 1e-6
    small = (theta * flat < 1e-13) & (not resonant)
    if np.any(small):
        coef = gamma_fn(p.gamma + 1.0) * gamma_fn(-c) * rgamma(-p.beta)
        sm = flat[small]
        out[small] = gamma_fn(c) * theta**-c * sm**p.alpha + coef * sm ** (p.alpha + c)
    big = ~small
    if np.any(big):
        sb = flat[big]
        top = (60.0 + abs(p.beta) * np.log1p(theta * sb)) / theta
        off, w = graded_offsets(top, sb, power=p.gamma, max_width=1.0 / theta, max_panels=1100 if resonant else 60)
        vals = np.exp(-theta * off) * (sb[:, None] + off) ** p.beta
        out[big] = (vals * w).sum(axis=1) * sb**p.alpha
    return out.reshape(s.shape)


def _eta_brute(p, theta: float) -> EtaMoment:
    """``theta^-2 int_0^inf s^(2 alpha) (int_s^inf e^(-theta t) t^beta (t-s)^gamma dt)^2 ds``.

    The outer half-line is mapped to ``(0, 1)`` by ``s = y / (theta (1 - y))``.
    Near ``s = 0`` the integrand behaves like ``s^(2 alpha + 2 min(c, 0))``,
    ``c = beta + gamma + 1``; that power is absorbed exactly.
    """
    lead = min(0.0, 2 * p.alpha + 2 * min(p.beta + p.gamma + 1.0, 0.0))

    def f(y, dl, dr, left):
        # on the right piece dr is 1 - y to full precision
        ym = 1.0 - y if left else dr
        out = np.zeros(y.shape)
        # beyond theta s = 400 the factor e^(-2 theta s) is below 1e-340
        live = y < 400.0 * ym
        s = y[live] / (theta * ym[live])
        k = _laplace_kernel(p, theta, s)
        jac = 1.0 / (theta * ym[live] ** 2)
        out[live] = np.exp(-2 * theta * s) * k * k * jac
        if left:
            out[live] /= y[live] ** lead
        return out

    v1, e1 = integrate_intervals(lambda y, dl, dr: f(y, dl, dr, True), [0.0], [0.5], p_left=lead, rtol=1e-10)
    v2, e2 = integrate_intervals(lambda y, dl, dr: f(y, dl, dr, False), [0.5], [1.0], rtol=1e-10)
    v, e = float(v1[0] + v2[0]), float(e1[0] + e2[0])
    return EtaMoment(v / theta**2, EtaMethod.BRUTE_2D.value, e / theta**2)


def eta_monte_carlo(
    p, theta: float, *, n_paths: int = 10_000, T: float = 15.0, points: int = 1501, seed: int = 0, batch: int = 1000
) -> EtaMoment:
    """Average of ``eta_T^2`` over simulated paths (standard error reported)."""
    grid = uniform_grid(T, points)
    consts = core.cell_constants(grid, theta)
    etas = []
    for first in range(0, n_paths, batch):
        n = min(batch, n_paths - first)
        b = simulate_paths(p, grid, seed, n, first=first)
        etas.append(core.path_functionals(b.values, consts, [grid.size - 1])[:, 0, 2])
    eta = np.concatenate(etas)
    sq = eta * eta
    return EtaMoment(float(sq.mean()), EtaMethod.MONTE_CARLO.value, float(sq.std(ddof=1) / math.sqrt(sq.size)))


def eta_second_moment(p, theta: float, method: str = "hypergeometric_1d", **mc) -> EtaMoment:
    """``E eta_inf^2`` with ``eta_inf = int_0^inf e^(-theta s) X_s ds``."""
    p = _as_params(p)
    if not theta > 0:
        raise DomainError("theta must be positive")
    m = EtaMethod(method)
    if m is EtaMethod.HYPERGEOMETRIC_1D:
        return _eta_hypergeometric(p, theta)
    if m is EtaMethod.BRUTE_2D:
        return _eta_brute(p, theta)
    return eta_monte_carlo(p, theta, **mc)


# ---------------------------------------------------------------------------
# rate-ratio series


@dataclass(frozen=True)
class RatioSeries:
    """``raw`` and ``rate`` are natural logarithms; ``ratio = exp(raw - rate)``."""

    T: np.ndarray
    log_raw: np.ndarray
    log_rate: np.ndarray
    ratio: np.ndarray
    limit: float

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("T,raw,rate,ratio,limit\n")
            for row in zip(self.T, self.log_raw, self.log_rate, self.ratio):
                fh.write(",".join(repr(float(v)) for v in row) + f",{float(self.limit)!r}\n")


def h_scaled(p, theta: float, T: float) -> float:
    """``e^(-theta T) h(T)`` with
    ``h(T) = int_0^T s^(2a) (T-s)^g int_s^T e^(theta t) t^b (t-s)^g dt ds``."""
    p = _as_params(p)
    g = p.gamma

    def integrand(s, dist, scaled):
        j = exp_inner(p, theta, s.ravel(), T, scaled=scaled, dist=dist.ravel()).reshape(s.shape)
        return j if scaled else dist**g * j

    return _outer(p, _tail_pieces(T, 1.0 / theta), integrand, q_right=2 * g + 1)


def _h_rate(p, theta: float):
    a, b, g = p.alpha, p.beta, p.gamma
    case = gamma_case(p)
    if case is GammaCase.LT:
        return (lambda T: (2 * a + b) * math.log(T)), sigma_gamma(g) ** 2 / theta ** (2 * g + 2)
    if case is GammaCase.EQ:
        return (lambda T: (2 * a + b) * math.log(T) + math.log(math.log(T))), 1.0 / theta
    return (lambda T: (2 * a + b + 2 * g + 1) * math.log(T)), varsigma(a, g) ** 2 / theta


def h_ratio_convergence(p, theta: float, Ts) -> RatioSeries:
    """``h(T)`` over its case-matched rate, with the predicted limit."""
    p = _as_params(p)
    Ts = np.asarray(Ts, dtype=float)
    log_rate_fn, limit = _h_rate(p, theta)
    hs = np.array([h_scaled(p, theta, T) for T in Ts])
    log_raw = np.log(hs) + theta * Ts
    log_rate = np.array([log_rate_fn(T) for T in Ts]) + theta * Ts
    return RatioSeries(Ts, log_raw, log_rate, np.exp(log_raw - log_rate), limit)


def _first_rate(p, theta: float):
    a, b, g = p.alpha, p.beta, p.gamma
    case = gamma_case(p)
    if case is GammaCase.LT:
        c = sigma_gamma(g) ** 2 / theta ** (2 * g + 3)
        return lambda T: math.log(c) + (2 * a + 2 * b) * math.log(T)
    if case is GammaCase.EQ:
        return lambda T: -2 * math.log(theta) + (2 * a + 2 * b) * math.log(T) + math.log(math.log(T))
    c = varsigma(a, g) ** 2 / theta**2
    return lambda T: math.log(c) + (2 * a + 2 * b + 2 * g + 1) * math.log(T)


def first_expectation_ratio(p, theta: float, Ts) -> RatioSeries:
    """``E (e^(-theta T) int_0^T e^(theta s) dX_s)^2`` over its asymptotic form."""
    p = _as_params(p)
    Ts = np.asarray(Ts, dtype=float)
    rate = _first_rate(p, theta)
    log_raw = np.log([exp_integral_variance(p, theta, T) for T in Ts])
    log_rate = np.array([rate(T) for T in Ts])
    return RatioSeries(Ts, log_raw, log_rate, np.exp(log_raw - log_rate), 1.0)


def lhopital_residual(p, theta: float, T: float, dT: float = 1e-3) -> float:
    """Relative residual of ``2 theta V + V' = 2 T^beta e^(-theta T) h(T)``.

    ``V(T)`` is the first expectation; ``V'`` is a central difference.
    This is the differentiation step linking the two ratio series.
    """
    p = _as_params(p)
    v = exp_integral_variance(p, theta, T)
    dv = (exp_integral_variance(p, theta, T + dT) - exp_integral_variance(p, theta, T - dT)) / (2 * dT)
    rhs = 2 * T**p.beta * h_scaled(p, theta, T)
    return abs(2 * theta * v + dv - rhs) / abs(rhs)


# ---------------------------------------------------------------------------
# growth envelope


@dataclass(frozen=True)
class GrowthEnvelope:
    """Per-path envelope statistics.

    ``statistic`` is ``sup_(t >= 3) |X_t| / (t^rho sqrt(2 log log t))`` and
    ``tail`` the same supremum restricted to ``t >= T_max / 2``.
    """

    times: np.ndarray
    statistic: np.ndarray
    tail: np.ndarray
    sigma: float

    def quantile(self, q: float, *, tail: bool = True) -> float:
        return float(np.quantile(self.tail if tail else self.statistic, q))


def _lil_ratio(batch: PathBatch, rho: float, t_min: float = 3.0):
    t = batch.grid
    keep = t >= t_min
    if not np.any(keep) or t[-1] < t_min:
        raise DomainError("grid must extend beyond t = 3")
    tk = t[keep]
    denom = tk**rho * np.sqrt(2.0 * np.log(np.log(tk)))
    return tk, np.abs(batch.values[:, keep]) / denom


def growth_envelope(paths: PathBatch, p) -> GrowthEnvelope:
    p = _as_params(p)
    if paths.grid[-1] < 3.0:
        raise DomainError("grid must extend over [3, T_max]")
    tk, r = _lil_ratio(paths, derived(p).rho)
    tail = tk >= 0.5 * paths.grid[-1]
    return GrowthEnvelope(
        times=tk,
        statistic=r.max(axis=1),
        tail=r[:, tail].max(axis=1),
        sigma=math.sqrt(variance_constant(p)),
    )


def lamperti(paths: PathBatch, p):
    """``(s, Y)`` with ``s = log t`` and ``Y_s = e^(-rho s) X_(e^s)`` for ``t > 0``."""
    rho = derived(_as_params(p)).rho
    t = paths.grid
    pos = t > 0
    return np.log(t[pos]), paths.values[:, pos] / t[pos] ** rho


def marcus_statistic(paths: PathBatch, p, s_max: float | None = None) -> np.ndarray:
    """Per-path ``sup_(0 <= s <= S) |Y_s| / sqrt(2 log S)`` of the Lamperti transform."""
    s, y = lamperti(paths, p)
    s_max = s[-1] if s_max is None else s_max
    if s_max <= 1.0:
        raise DomainError("S must exceed 1")
    keep = (s >= 0.0) & (s <= s_max + 1e-12)
    return np.abs(y[:, keep]).max(axis=1) / math.sqrt(2.0 * math.log(s_max))


__all__ = [
    "EtaMethod",
    "EtaMoment",
    "GammaCase",
    "GrowthEnvelope",
    "RatioSeries",
    "eta_monte_carlo",
    "eta_second_moment",
    "first_expectation_ratio",
    "gamma_case",
    "growth_envelope",
    "h_ratio_convergence",
    "h_scaled",
    "lamperti",
    "lhopital_residual",
    "marcus_statistic",
    "sigma_gamma",
    "varsigma",
]
