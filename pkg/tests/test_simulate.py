import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gvp.covariance import grid_cov, variance_constant, weighted_integral_variance
from gvp.errors import DomainError
from gvp.model import derived, fbm_params
from gvp.simulate import (
    GridPath,
    OUModel,
    geometric_grid,
    increment_sup_ratio,
    ou_from_x,
    ou_variation_of_constants,
    read_paths,
    riemann_covariance,
    simulate_paths,
    simulate_x,
    simulate_z,
    stieltjes_exp_integral,
    stream,
    uniform_grid,
    write_paths,
)


def test_grid_validation():
    with pytest.raises(DomainError):
        simulate_x((0, 0, 0), [0.0, 1.0, 0.5], 0)
    with pytest.raises(DomainError):
        simulate_x((0, 0, 0), [0.1, 1.0], 0)
    with pytest.raises(DomainError):
        GridPath(np.array([0.0, 1.0]), np.array([1.0, 2.0]), 0, "cholesky")
    with pytest.raises(DomainError):
        OUModel((0, 0, 0), 0.0)
    g = geometric_grid(100.0, 5)
    assert g[0] == 0 and g[1] == pytest.approx(0.1) and g[-1] == pytest.approx(100.0)


def test_streams_independent_of_batch_split():
    g = uniform_grid(2.0, 17)
    whole = simulate_paths((0, 0, 0), g, 11, 6)
    tail = simulate_paths((0, 0, 0), g, 11, 3, first=3)
    np.testing.assert_array_equal(whole.values[3:], tail.values)
    a = stream(1, 0).standard_normal(4)
    b = stream(1, 1).standard_normal(4)
    c = stream(2, 0).standard_normal(4)
    assert not np.allclose(a, b) and not np.allclose(a, c)


@pytest.mark.parametrize("method", ["cholesky", "kernel_riemann"])
def test_determinism(method):
    g = uniform_grid(1.0, 9)
    a = simulate_x(fbm_params(0.75), g, 5, method, refinement=4)
    b = simulate_x(fbm_params(0.75), g, 5, method, refinement=4)
    assert a.values.tobytes() == b.values.tobytes()
    assert a.values[0] == 0.0


def test_variance_at_one():
    g = uniform_grid(1.0, 5)
    x1 = simulate_paths((0, 0, 0), g, 0, 10_000).values[:, -1]
    se = math.sqrt(2.0 / 10_000) / 3.0
    assert abs(x1.var() - 1.0 / 3.0) < 3 * se


@pytest.mark.parametrize("p", [(0.0, 0.0, 0.0), fbm_params(0.75), (0.3, -0.3, -0.7)])
def test_moments_scale(p):
    g = uniform_grid(4.0, 9)
    b = simulate_paths(p, g, 1, 10_000)
    c, rho = variance_constant(p), derived(p).rho
    for k in (2, 5, 8):
        col = b.values[:, k]
        var = c * g[k] ** (2 * rho)
        assert abs(col.mean()) < 3 * math.sqrt(var / col.size)
        assert abs(col.var() - var) < 3 * var * math.sqrt(2.0 / col.size)


@pytest.mark.parametrize("p", [(0.0, 0.0, 0.0), fbm_params(0.75), (0.3, -0.3, -0.7)])
def test_riemann_covariance_matches_exact(p):
    g = uniform_grid(1.0, 17)
    exact = grid_cov(p, g[1:]).entries
    approx = riemann_covariance(p, g, refinement=32)
    np.testing.assert_allclose(approx, exact, rtol=0.05)


def test_riemann_empirical_covariance():
    g = uniform_grid(1.0, 5)
    b = simulate_paths((0, 0, 0), g, 2, 10_000, "kernel_riemann", refinement=8)
    emp = np.cov(b.values[:, 1:].T)
    exact = grid_cov((0, 0, 0), g[1:]).entries
    np.testing.assert_allclose(emp, exact, rtol=0.06)


def test_ou_limits():
    g = uniform_grid(1.0, 11)
    x = simulate_x((0, 0, 0), g, 0)
    np.testing.assert_allclose(ou_from_x(x.values[None], g, 1e-14)[0], x.values, rtol=1e-12, atol=1e-14)
    assert np.all(ou_from_x(np.zeros((1, 11)), g, 2.0) == 0.0)


def test_ou_exact_for_linear_path():
    # Z' = theta Z + 1 with Z0 = 0 for X_t = t
    g = uniform_grid(3.0, 7)
    z = ou_from_x(g[None, :], g, 0.7)[0]
    np.testing.assert_allclose(z, np.expm1(0.7 * g) / 0.7, rtol=1e-13)


def test_euler_converges_to_variation_of_constants():
    # one fine path per seed, observed on nested subgrids
    theta = 1.0
    fine = uniform_grid(2.0, 1601)
    for seed in range(3):
        x = simulate_x((0, 0, 0), fine, seed)
        errs = []
        for step in (8, 4, 2, 1):
            sub = GridPath(fine[::step], x.values[::step], seed, "cholesky")
            euler = ou_from_x(sub.values[None], sub.grid, theta, "euler")[0]
            errs.append(np.max(np.abs(euler - ou_variation_of_constants(sub, theta))))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(rates - 1.0) < 0.25)


def test_simulate_z_default_exact():
    m = OUModel((0, 0, 0), 1.0)
    g = uniform_grid(2.0, 2001)
    x, z = simulate_z(m, g, 4)
    voc = ou_variation_of_constants(x, 1.0)
    assert np.max(np.abs(z.values - voc)) < 1e-5 * np.max(np.abs(z.values))


def test_stieltjes_examples():
    g = uniform_grid(2.0, 401)
    x = simulate_x((0, 0, 0), g, 0)
    assert stieltjes_exp_integral(x, 0.0, 1, 2.0) == pytest.approx(x.values[-1])
    lin = GridPath(g, g.copy(), 0, "cholesky")
    want = math.expm1(1.3 * 2.0) / 1.3
    assert stieltjes_exp_integral(lin, 1.3, 1, 2.0, rule="exact") == pytest.approx(want, rel=1e-13)
    assert stieltjes_exp_integral(lin, 1.3, 1, 2.0) == pytest.approx(want, rel=1e-4)
    with pytest.raises(DomainError):
        stieltjes_exp_integral(lin, 1.0, 0, 2.0)


def test_stieltjes_variance_matches_covariance():
    theta, T, n = 1.0, 1.0, 4000
    g = uniform_grid(T, 201)
    b = simulate_paths((0, 0, 0), g, 0, n)
    v = np.array([math.exp(-theta * T) * stieltjes_exp_integral(b.path(i), theta, 1, T) for i in range(n)])
    want = weighted_integral_variance((0, 0, 0), lambda s: np.exp(theta * s), T) * math.exp(-2 * theta * T)
    assert abs(v.var() - want) < 3 * want * math.sqrt(2.0 / n)


@pytest.mark.parametrize("p", [(0.0, 0.0, 0.0), fbm_params(0.75)])
def test_holder_ratio_bounded(p):
    lam = derived(p).holder
    means = []
    for n in (65, 257, 1025):
        b = simulate_paths(p, uniform_grid(1.0, n), 3, 20)
        means.append(np.mean([increment_sup_ratio(b.path(i), lam - 0.1) for i in range(20)]))
    assert max(means) < 2.0 * means[0]


def test_csv_and_binary_round_trip(tmp_path):
    g = uniform_grid(1.0, 9)
    b = simulate_paths(fbm_params(0.75), g, 7, 3)
    x = b.path(1)
    x.to_csv(tmp_path / "x.csv")
    y = GridPath.from_csv(tmp_path / "x.csv")
    np.testing.assert_array_equal(x.values, y.values)
    write_paths(tmp_path / "b.gvp", b, theta=1.0)
    c, header = read_paths(tmp_path / "b.gvp")
    np.testing.assert_array_equal(b.values, c.values)
    assert header["theta"] == 1.0 and header["n_paths"] == 3
    (tmp_path / "bad").write_bytes(b"nope")
    with pytest.raises(DomainError):
        read_paths(tmp_path / "bad")


@settings(max_examples=15)
@given(st.integers(0, 2**40), st.integers(0, 1000))
def test_stream_reproducible(seed, idx):
    assert np.array_equal(stream(seed, idx).standard_normal(3), stream(seed, idx).standard_normal(3))
