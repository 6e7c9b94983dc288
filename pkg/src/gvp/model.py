"""Process parameters, derived exponents and the deterministic kernel.

The process is

    X_t = int_0^t s^alpha int_s^t u^beta (u - s)^gamma du dW_s,

driven by a standard Brownian motion W.  All functions here are
deterministic; randomness lives in :mod:`gvp.simulate`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gvp.errors import DomainError


@dataclass(frozen=True)
class ProcessParams:
    """Exponents (alpha, beta, gamma) of the kernel."""

    alpha: float
    beta: float
    gamma: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class DerivedExponents:
    """Exponents that depend only on the parameters.

    Attributes
    ----------
    rho : float
        Self-similarity index, ``alpha + beta + gamma + 3/2``.
    holder : float
        Hoelder exponent ``min(rho, gamma + 3/2, 1)``.
    """

    rho: float
    holder: float


def validate(alpha: float, beta: float, gamma: float) -> ProcessParams:
    """Check the admissible region and return a :class:`ProcessParams`."""
    vals = {"alpha": alpha, "beta": beta, "gamma": gamma}
    for name, v in vals.items():
        if not isinstance(v, (int, float, np.floating, np.integer)) or isinstance(v, bool):
            raise DomainError(f"{name} must be a real number, got {v!r}")
        if not math.isfinite(float(v)):
            raise DomainError(f"{name} must be finite, got {v!r}")
    a, b, g = float(alpha), float(beta), float(gamma)
    if not a > -0.5:
        raise DomainError(f"alpha must exceed -1/2, got {a}")
    if not g > -1.0:
        raise DomainError(f"gamma must exceed -1, got {g}")
    if not a + b + g > -1.5:
        raise DomainError(f"alpha + beta + gamma must exceed -3/2, got {a + b + g}")
    return ProcessParams(a, b, g)


def _as_params(p) -> ProcessParams:
    if isinstance(p, ProcessParams):
        return p
    return validate(*p)


def derived(p) -> DerivedExponents:
    p = _as_params(p)
    rho = p.alpha + p.beta + p.gamma + 1.5
    return DerivedExponents(rho=rho, holder=min(rho, p.gamma + 1.5, 1.0))


def fbm_params(hurst: float) -> ProcessParams:
    """Parameters for which X is a multiple of fractional Brownian motion.

    Only ``1/2 < H < 1`` is admissible.
    """
    if not 0.5 < hurst < 1.0:
        raise DomainError(f"Hurst index must lie in (1/2, 1), got {hurst}")
    return validate(0.5 - hurst, hurst - 0.5, hurst - 1.5)


def kernel(p, t, s):
    """Kernel ``s^alpha int_s^t u^beta (u-s)^gamma du`` for ``0 < s < t``.

    Broadcasts over ``t`` and ``s``.  Returns 0 where ``s >= t``.
    """
    from gvp.kernels import inner_kernel

    p = _as_params(p)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0) or np.any(t <= 0):
        raise DomainError("kernel requires s > 0 and t > 0")
    tb, sb = np.broadcast_arrays(t, s)
    out = np.zeros(tb.shape)
    m = sb < tb
    if np.any(m):
        out[m] = sb[m] ** p.alpha * inner_kernel(p, sb[m], tb[m] - sb[m])
    return out[()] if out.ndim == 0 else out
