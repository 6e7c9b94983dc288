"""Short- and long-range dependence of the increments.

The anchor is always ``X_1``: dependence is measured through
``cov(X_1, X_(t+1) - X_t)`` and the corresponding correlation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from gvp.covariance import cov_x1_increment, incremental_variance, profile, variance_constant
from gvp.model import _as_params
from gvp.specfun import beta_fn

_EQ_TOL = 1e-12


class DependenceClass(str, enum.Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class RateDescriptor:
    """``constant * t^exponent``, times ``log t`` when ``log_correction``."""

    constant: float
    exponent: float
    log_correction: bool = False

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.constant * t**self.exponent
        return out * np.log(t) if self.log_correction else out


@dataclass(frozen=True)
class CorrRate:
    exponent: float
    log_correction: bool


@dataclass(frozen=True)
class DependenceReport:
    cov_class: DependenceClass
    corr_class: DependenceClass
    cov_rate_exponent: float
    corr_rate: CorrRate
    constants: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "cov_class": self.cov_class.value,
            "corr_class": self.corr_class.value,
            "cov_rate_exponent": self.cov_rate_exponent,
            "corr_rate": {
                "exponent": self.corr_rate.exponent,
                "log_correction": self.corr_rate.log_correction,
            },
            "constants": dict(self.constants),
        }


def _is_half(gamma: float) -> bool:
    return abs(gamma + 0.5) < _EQ_TOL


def cov_limit_constant(p) -> float:
    """Limit of ``t^(-beta-gamma) cov(X_1, X_(t+1) - X_t)``."""
    p = _as_params(p)
    return beta_fn(2 * p.alpha + 1, p.gamma + 1) / (2 * p.alpha + p.beta + p.gamma + 2)


def incremental_variance_asymptote(p) -> RateDescriptor:
    """Leading term of ``E (X_(t+1) - X_t)^2`` as ``t -> infinity``."""
    p = _as_params(p)
    a, b, g = p.alpha, p.beta, p.gamma
    if _is_half(g):
        return RateDescriptor(1.0, 2 * a + 2 * b, True)
    if g < -0.5:
        return RateDescriptor(beta_fn(g + 1, -2 * g - 1) / ((g + 1) * (2 * g + 3)), 2 * a + 2 * b)
    return RateDescriptor(beta_fn(2 * a + 1, 2 * g + 1), 2 * a + 2 * b + 2 * g + 1)


def correlation_constant(p) -> float:
    """Constant ``c`` of the correlation asymptotics.

    The quotient of the covariance limit constant and the square roots of
    ``E X_1^2`` and the incremental-variance constant.
    """
    inc = incremental_variance_asymptote(p)
    return cov_limit_constant(p) / math.sqrt(variance_constant(p) * inc.constant)


def classify(p) -> DependenceReport:
    """Dependence classes and rates implied by the parameters."""
    p = _as_params(p)
    a, b, g = p.alpha, p.beta, p.gamma
    m = min(g, -0.5)
    inc = incremental_variance_asymptote(p)
    return DependenceReport(
        cov_class=DependenceClass.SHORT if b + g < -1 else DependenceClass.LONG,
        corr_class=DependenceClass.SHORT if m < a - 1 else DependenceClass.LONG,
        cov_rate_exponent=b + g,
        corr_rate=CorrRate(exponent=m - a, log_correction=_is_half(g)),
        constants={
            "variance": variance_constant(p),
            "cov_limit": cov_limit_constant(p),
            "incremental_variance": inc.constant,
            "incremental_variance_exponent": inc.exponent,
            "corr": correlation_constant(p),
        },
    )


@dataclass(frozen=True)
class CorrelationCurve:
    ts: np.ndarray
    corr: np.ndarray
    predicted: np.ndarray

    def slope(self) -> float:
        """Least-squares slope of ``log corr`` against ``log t``."""
        return float(np.polyfit(np.log(self.ts), np.log(self.corr), 1)[0])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,corr,predicted_rate\n")
            for t, c, r in zip(self.ts, self.corr, self.predicted):
                fh.write(f"{float(t)!r},{float(c)!r},{float(r)!r}\n")


def predicted_correlation(p, ts) -> np.ndarray:
    rep = classify(p)
    ts = np.asarray(ts, dtype=float)
    out = rep.constants["corr"] * ts**rep.corr_rate.exponent
    if rep.corr_rate.log_correction:
        out = out / np.sqrt(np.log(ts))
    return out


def correlation_curve(p, ts) -> CorrelationCurve:
    """``corr(X_1, X_(t+1) - X_t)`` at each ``t >= 1``."""
    p = _as_params(p)
    ts = np.asarray(ts, dtype=float)
    c1 = variance_constant(p)
    corr = np.array([cov_x1_increment(p, t) / math.sqrt(c1 * incremental_variance(p, t)) for t in ts])
    return CorrelationCurve(ts=ts, corr=corr, predicted=predicted_correlation(p, ts))


class LimitKind(str, enum.Enum):
    FBM = "fbm"
    DEGENERATE_LINE = "degenerate_line"
    NONE = "none"


@dataclass(frozen=True)
class IncrementLimit:
    """Limit of the rescaled increment process ``X_(t0 + .) - X_t0``.

    For ``FBM``, ``constant`` is ``c`` with limit variance ``c^2 t^(2H)``;
    for ``DEGENERATE_LINE`` it is the variance factor of ``h`` in
    ``B(2 alpha+1, 2 gamma+1) h^2``.
    """

    kind: LimitKind
    hurst: float | None = None
    constant: float | None = None


def increment_limit(p) -> IncrementLimit:
    p = _as_params(p)
    a, b, g = p.alpha, p.beta, p.gamma
    if abs(a + b) < _EQ_TOL and g < -0.5:
        c2 = beta_fn(g + 1, -2 * g - 1) / ((g + 1) * (2 * g + 3))
        return IncrementLimit(LimitKind.FBM, hurst=g + 1.5, constant=math.sqrt(c2))
    if abs(a + b + g + 0.5) < _EQ_TOL and g > -0.5:
        return IncrementLimit(LimitKind.DEGENERATE_LINE, hurst=1.0, constant=beta_fn(2 * a + 1, 2 * g + 1))
    return IncrementLimit(LimitKind.NONE)


def covariance_partial_sums(p, ns) -> np.ndarray:
    """``sum_(n=1)^N cov(X_1, X_(n+1) - X_n)`` for each ``N``.

    The sum telescopes to ``E X_1 X_(N+1) - E X_1^2``.
    """
    prof = profile(p)
    ns = np.asarray(ns, dtype=float)
    return prof.cov(1.0, ns + 1.0) - prof.variance_const


def partial_sum_tail(p, n: float) -> float:
    """Tail ``sum_(k>N)`` estimated from the covariance asymptotics.

    Infinite for long-range parameters.
    """
    p = _as_params(p)
    e = p.beta + p.gamma
    if e >= -1:
        return math.inf
    return cov_limit_constant(p) * (n + 0.5) ** (e + 1) / -(e + 1)


__all__ = [
    "CorrRate",
    "CorrelationCurve",
    "DependenceClass",
    "DependenceReport",
    "IncrementLimit",
    "LimitKind",
    "RateDescriptor",
    "classify",
    "correlation_constant",
    "correlation_curve",
    "cov_limit_constant",
    "covariance_partial_sums",
    "increment_limit",
    "incremental_variance_asymptote",
    "partial_sum_tail",
    "predicted_correlation",
]
