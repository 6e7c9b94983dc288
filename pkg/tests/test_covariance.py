import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gvp.covariance import (
    cov_x1_increment,
    cross_expectation,
    grid_cov,
    increment_cov,
    incremental_variance,
    variance_constant,
    weighted_integral_variance,
)
from gvp.errors import DomainError
from gvp.model import derived, fbm_params, validate
from gvp.specfun import beta_fn

ZERO = validate(0, 0, 0)
SETS = [ZERO, fbm_params(0.75), validate(0.3, -0.6, 0.4), validate(0.8, -1.2, -0.8), validate(-0.3, 0.5, -0.95)]


def test_unit_variance_closed_form():
    assert increment_cov(ZERO, 0, 1, 0, 1) == pytest.approx(1 / 3, rel=1e-10)
    assert variance_constant(ZERO) == pytest.approx(1 / 3, rel=1e-12)


def test_increment_cov_ordering():
    with pytest.raises(DomainError):
        increment_cov(ZERO, 1.0, 0.5, 0.0, 1.0)


def test_subnormal_times_rejected():
    with pytest.raises(DomainError):
        increment_cov(ZERO, 1e-310, 1.0, 0.0, 1.0)
    assert increment_cov(ZERO, 1e-200, 1.0, 0.0, 1.0) == pytest.approx(1 / 3, rel=1e-10)


def test_far_intervals_positive_and_not_larger():
    # for alpha=beta=gamma=0 the kernel is t - s, so cov(X_1, X_(t+1) - X_t) = 1/2 for all t >= 1
    assert increment_cov(ZERO, 0, 1, 50, 51) == pytest.approx(increment_cov(ZERO, 0, 1, 1, 2), rel=1e-10)
    p = fbm_params(0.75)
    near = increment_cov(p, 0, 1, 1, 2)
    far = increment_cov(p, 0, 1, 50, 51)
    assert 0 < far < near


@pytest.mark.parametrize("p", SETS[:4])
def test_increment_cov_self_similar(p):
    a = 3.7
    rho = derived(p).rho
    t = (0.4, 1.1, 0.7, 2.0)
    assert increment_cov(p, *(a * v for v in t)) == pytest.approx(a ** (2 * rho) * increment_cov(p, *t), rel=1e-8)


_start = st.one_of(st.just(0.0), st.floats(1e-9, 3.0))


@settings(max_examples=15)
@given(
    _start,
    st.floats(0.05, 2.0),
    _start,
    st.floats(0.05, 2.0),
    st.sampled_from(SETS[:4]),
)
def test_increment_cov_positive(t1, h1, t3, h3, p):
    assert increment_cov(p, t1, t1 + h1, t3, t3 + h3) > 0


@pytest.mark.parametrize("p", SETS)
def test_grid_cov_matches_increment_cov(p):
    # two independent routes: self-similar profile vs direct nested quadrature
    grid = np.array([0.3, 1.0, 2.5])
    cm = grid_cov(p, grid)
    for i, s in enumerate(grid):
        for j, t in enumerate(grid):
            assert cm.entries[i, j] == pytest.approx(increment_cov(p, 0, s, 0, t), rel=1e-8)


def test_grid_cov_single_point():
    assert grid_cov(ZERO, [1.0]).entries[0, 0] == pytest.approx(1 / 3, rel=1e-12)


@pytest.mark.parametrize("h", [0.6, 0.75, 0.9])
def test_grid_cov_fbm_correlation(h):
    grid = np.linspace(0.5, 5.0, 10)
    c = grid_cov(fbm_params(h), grid).entries
    corr = c / np.sqrt(np.outer(np.diag(c), np.diag(c)))
    s, t = np.meshgrid(grid, grid, indexing="ij")
    ref = (s ** (2 * h) + t ** (2 * h) - np.abs(s - t) ** (2 * h)) / (2 * s**h * t**h)
    np.testing.assert_allclose(corr, ref, atol=1e-10)


@pytest.mark.parametrize("p", SETS)
def test_grid_cov_structure(p):
    grid = np.geomspace(0.01, 100.0, 30)
    cm = grid_cov(p, grid)
    np.testing.assert_array_equal(cm.entries, cm.entries.T)
    rho = derived(p).rho
    np.testing.assert_allclose(np.diag(cm.entries), variance_constant(p) * grid ** (2 * rho), rtol=1e-10)
    assert np.linalg.eigvalsh(cm.entries).min() > -cm.assembly_tol * cm.entries.max()
    cm.cholesky()


@pytest.mark.parametrize("p", SETS[:3])
def test_grid_cov_scaling(p):
    grid = np.array([0.2, 0.9, 1.7, 4.0])
    a = 2.3
    rho = derived(p).rho
    np.testing.assert_allclose(grid_cov(p, a * grid).entries, a ** (2 * rho) * grid_cov(p, grid).entries, rtol=1e-6)


def test_grid_cov_csv(tmp_path):
    cm = grid_cov(ZERO, [1.0, 2.0])
    path = tmp_path / "cov.csv"
    cm.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t_i,t_j,value"
    assert len(lines) == 5
    assert float(lines[1].split(",")[2]) == pytest.approx(1 / 3)


def test_cov_x1_increment_examples():
    assert cov_x1_increment(ZERO, 1.0) == pytest.approx(increment_cov(ZERO, 0, 1, 1, 2), rel=1e-9)
    assert cov_x1_increment(ZERO, 1e4) == pytest.approx(0.5, rel=1e-3)
    with pytest.raises(DomainError):
        cov_x1_increment(ZERO, 0.5)


@pytest.mark.parametrize("p", [validate(0.2, -0.3, -0.4), fbm_params(0.7)])
def test_cov_x1_increment_limit(p):
    a, b, g = p.as_tuple()
    lim = beta_fn(2 * a + 1, g + 1) / (2 * a + b + g + 2)
    gaps = [abs(t ** (-b - g) * cov_x1_increment(p, t) / lim - 1) for t in (1e2, 1e3, 1e4)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.02


def test_incremental_variance_zero_params():
    # E(X_(t+1) - X_t)^2 for alpha=beta=gamma=0 is t + 1/3
    for t in (1.0, 10.0, 100.0):
        assert incremental_variance(ZERO, t) == pytest.approx(t + 1 / 3, rel=1e-9)


def test_weighted_integral_variance_trivial():
    for p in SETS[:3]:
        T = 2.5
        v = weighted_integral_variance(p, lambda t: np.ones_like(t), T)
        assert v == pytest.approx(variance_constant(p) * T ** (2 * derived(p).rho), rel=1e-8)
    assert weighted_integral_variance(ZERO, lambda t: np.zeros_like(t), 2.0) == 0.0


def test_weighted_integral_variance_exp_ratio():
    # (0, 0, 1/2), theta = 1: ratio to T^(2a+2b+2g+1) e^(2T) varsigma^2 -> 1
    p = validate(0, 0, 0.5)
    vs2 = math.gamma(1) * math.gamma(2) / math.gamma(3)
    ratios = [
        weighted_integral_variance(p, np.exp, T) * math.exp(-2 * T) / (vs2 * T**2) for T in (5.0, 10.0, 20.0)
    ]
    assert abs(ratios[2] - 1) < abs(ratios[1] - 1) < abs(ratios[0] - 1)
    assert ratios[2] == pytest.approx(1.0, rel=0.15)


def test_cross_expectation():
    assert cross_expectation(ZERO, 1.0, 1.0, 40.0) == pytest.approx(0.5, rel=0.05)
    assert abs(cross_expectation(ZERO, 1.0, 1e-8, 5.0)) < 1e-12
    p = validate(0.2, -0.3, -0.4)
    a, b, g = p.as_tuple()
    s, th = 1.5, 1.0
    lim = beta_fn(2 * a + 1, g + 1) * s ** (2 * a + b + g + 2) / (th * (2 * a + b + g + 2))
    gaps = [abs(T ** (-b - g) * cross_expectation(p, th, s, T) / lim - 1) for T in (1e2, 1e3)]
    assert gaps[1] < gaps[0] < 0.1


def test_grid_cov_blocked_assembly_matches_direct():
    from gvp.covariance import profile

    g = np.linspace(0.01, 3.0, 700)
    direct = profile((0.3, -0.3, -0.7)).cov(g[:, None], g[None, :])
    np.testing.assert_allclose(grid_cov((0.3, -0.3, -0.7), g).entries, direct, rtol=1e-13, atol=0)
