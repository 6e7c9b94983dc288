import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gvp.errors import DomainError, QuadratureError
from gvp.quadrature import (
    QuadRule,
    RuleKind,
    gauss_jacobi,
    gauss_legendre,
    graded_offsets,
    integrate_intervals,
    integrate_iterated,
    integrate_weighted,
)
from gvp.specfun import beta_fn


def test_rule_validation():
    with pytest.raises(DomainError):
        QuadRule(p_weight=-1.0)
    with pytest.raises(DomainError):
        QuadRule(nodes=1)
    assert QuadRule(kind="tanh_sinh").kind is RuleKind.TANH_SINH


@pytest.mark.parametrize("kind", list(RuleKind))
def test_weighted_trivial(kind):
    one = integrate_weighted(lambda x: np.ones_like(x), QuadRule(kind=kind))
    assert one.value == pytest.approx(1.0, rel=1e-12)
    assert one.est_error >= 0
    assert integrate_weighted(lambda x: x, QuadRule(kind=kind)).value == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("kind", [RuleKind.GAUSS_JACOBI, RuleKind.TANH_SINH])
def test_weighted_beta(kind):
    r = integrate_weighted(lambda x: np.ones_like(x), QuadRule(kind=kind, p_weight=0.5, q_weight=-0.5))
    # B(3/2, 1/2) = Gamma(3/2) Gamma(1/2) / Gamma(2) = pi / 2
    assert r.value == pytest.approx(math.pi / 2, rel=1e-10)


def test_tanh_sinh_strong_singularity():
    r = integrate_weighted(lambda x: np.cos(x), QuadRule(kind="tanh_sinh", p_weight=-0.95, q_weight=-0.9))
    ref = integrate_weighted(lambda x: np.cos(x), QuadRule(kind="gauss_jacobi", p_weight=-0.95, q_weight=-0.9))
    assert r.value == pytest.approx(ref.value, rel=1e-10)


def test_nonconvergence_raises():
    with pytest.raises(QuadratureError):
        integrate_weighted(lambda x: np.sin(1.0 / (x + 1e-9)), QuadRule(kind="gauss_legendre"), rtol=1e-14)


@given(
    st.floats(-0.95, 3.0),
    st.floats(-0.95, 3.0),
    st.integers(2, 40),
    st.integers(0, 2**32 - 1),
)
def test_gauss_jacobi_exact_on_polynomials(p, q, n, seed):
    x, w = gauss_jacobi(n, p, q)
    rng = np.random.default_rng(seed)
    deg = 2 * n - 1
    coef = rng.normal(size=deg + 1)
    approx = np.dot(w, np.polynomial.polynomial.polyval(x, coef))
    # int_0^1 x^(p+k) (1-x)^q dx = B(p+k+1, q+1)
    k = np.arange(deg + 1)
    exact = np.sum(coef * beta_fn(p + k + 1.0, q + 1.0))
    scale = np.sum(np.abs(coef) * beta_fn(p + k + 1.0, q + 1.0))
    assert abs(approx - exact) <= 1e-12 * scale


def test_legendre_agrees_with_weighted():
    f = lambda x: np.exp(-x) * np.cos(3 * x)
    x, w = gauss_legendre(40)
    r = integrate_weighted(f, QuadRule(kind="gauss_jacobi"))
    assert r.value == pytest.approx(float(np.dot(w, f(x))), rel=1e-12)


def test_error_estimate_decreases_on_doubling():
    f = lambda x: 1.0 / (1.2 - x)
    errs = []
    for n in (4, 8, 16):
        x, w = gauss_legendre(n)
        x2, w2 = gauss_legendre(2 * n)
        errs.append(abs(np.dot(w, f(x)) - np.dot(w2, f(x2))))
    assert errs[0] > errs[1] > errs[2]


def test_iterated_examples():
    assert integrate_iterated(lambda s, u: 1.0, (0, 0, 0), 1.0).value == pytest.approx(0.5, rel=1e-12)
    a, b, g = 0.2, -0.3, -0.4
    ref = beta_fn(2 * a + 1, g + 1) / (2 * a + b + g + 2)
    assert integrate_iterated(lambda s, u: 1.0, (a, b, g), 1.0).value == pytest.approx(ref, rel=1e-11)


@given(st.floats(0.1, 20.0))
def test_iterated_scaling(t):
    p = (0.3, -0.5, -0.7)
    e = 2 * p[0] + p[1] + p[2] + 2
    v1 = integrate_iterated(lambda s, u: 1.0, p, 1.0).value
    assert integrate_iterated(lambda s, u: 1.0, p, t).value == pytest.approx(t**e * v1, rel=1e-11)


def test_intervals_batch():
    a = np.array([0.0, 1.0, 2.0])
    b = np.array([1.0, 3.0, 2.0])
    vals, err = integrate_intervals(lambda x, dl, dr: np.exp(x), a, b)
    np.testing.assert_allclose(vals, [math.e - 1, math.exp(3) - math.e, 0.0], rtol=1e-12)
    # endpoint weights with accurate distances
    vals, _ = integrate_intervals(lambda x, dl, dr: np.ones_like(x), 0.0, 1.0, p_left=-0.5, q_right=-0.5)
    assert vals[0] == pytest.approx(math.pi, rel=1e-10)


def test_graded_offsets_resolve_near_singularity():
    eps = 1e-12
    o, w = graded_offsets(np.array([1.0]), np.array([eps]), power=0.0)
    approx = float((w * (eps + o) ** -0.7).sum())
    exact = ((1 + eps) ** 0.3 - eps**0.3) / 0.3
    assert approx == pytest.approx(exact, rel=1e-12)
