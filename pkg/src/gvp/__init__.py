"""Gaussian Volterra processes with kernel ``s^a int_s^t u^b (u-s)^g du``.

Covariances, dependence rates, exact simulation, and drift estimation for
the non-ergodic Ornstein-Uhlenbeck process driven by them.
"""
__version__ = "0.1.0"

from gvp.core import BACKEND
from gvp.model import ProcessParams, derived, fbm_params, validate

__all__ = ["BACKEND", "ProcessParams", "__version__", "derived", "fbm_params", "validate"]
