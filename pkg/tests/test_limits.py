import math

import numpy as np
import pytest

from gvp.errors import DomainError
from gvp.limits import (
    eta_second_moment,
    first_expectation_ratio,
    gamma_case,
    growth_envelope,
    h_ratio_convergence,
    lamperti,
    lhopital_residual,
    marcus_statistic,
)
from gvp.model import derived, fbm_params
from gvp.simulate import PathBatch, geometric_grid, simulate_paths

FBM = fbm_params(0.75)


@pytest.fixture(scope="module")
def far_paths():
    g = geometric_grid(1e3, 400)
    return {p: simulate_paths(p, g, 0, 500) for p in [(0.0, 0.0, 0.0), FBM]}


def test_gamma_case():
    assert gamma_case(FBM).value == "gamma_lt"
    assert gamma_case((0, 0, -0.5)).value == "gamma_eq"
    assert gamma_case((0, 0, 0)).value == "gamma_gt"


def test_eta_zero_params_closed_form():
    # X = int_0^t W; eta_inf = int e^-s X ds = int e^-u dW_u, variance 1/2
    assert eta_second_moment((0, 0, 0), 1.0).value == pytest.approx(0.5, rel=1e-12)


@pytest.mark.parametrize("p", [(0.0, 0.0, 0.0), FBM, (0.3, -0.3, -0.7), (0.5, -1.0, 0.0)])
def test_eta_1d_vs_2d(p):
    one = eta_second_moment(p, 1.0).value
    two = eta_second_moment(p, 1.0, "brute_2d").value
    assert one > 0
    assert two == pytest.approx(one, rel=1e-6)


@pytest.mark.parametrize("theta", [0.5, 2.0])
def test_eta_theta_scaling(theta):
    p = (0.3, -0.3, -0.7)
    ratio = eta_second_moment(p, theta).value / eta_second_moment(p, 1.0).value
    assert ratio == pytest.approx(theta ** -(2 * sum(p) + 5), rel=1e-10)


def test_eta_monte_carlo_agrees():
    mc = eta_second_moment((0, 0, 0), 1.0, "monte_carlo", n_paths=2000)
    assert abs(mc.value - 0.5) < 3 * mc.est_error
    with pytest.raises(DomainError):
        eta_second_moment((0, 0, 0), 0.0)


def test_h_ratio_zero_params_closed_form():
    # h(T) = (T - 1) e^T + 1 for (0,0,0), theta = 1
    Ts = np.array([5.0, 10.0, 20.0])
    r = h_ratio_convergence((0, 0, 0), 1.0, Ts)
    np.testing.assert_allclose(r.ratio, 1 - 1 / Ts + np.exp(-Ts) / Ts, rtol=1e-10)
    assert r.limit == pytest.approx(1.0)
    assert abs(r.ratio[-1] - 1.0) <= 0.05


def test_h_ratio_log_case():
    r = h_ratio_convergence((1.5, -1.0, -0.5), 1.0, [20.0])
    assert r.limit == 1.0
    assert r.ratio[0] == pytest.approx(1.0, rel=0.1)


@pytest.mark.parametrize("p", [(0.0, 0.0, 0.0), FBM, (0.3, -0.3, -0.7)])
def test_h_ratio_stabilizes(p):
    r = h_ratio_convergence(p, 1.0, [10.0, 20.0, 40.0])
    gap = np.abs(r.ratio - r.limit)
    assert gap[1] < gap[0] and gap[2] < gap[1]


def test_first_expectation_cases():
    fbm = first_expectation_ratio(FBM, 1.0, [20.0])
    assert fbm.ratio[0] == pytest.approx(1.0, rel=0.1)
    # (0,0,0): e^-T int e^s dX_s = int (1 - e^(u-T)) dW_u, variance T - 3/2 + 2e^-T - e^-2T/2
    T = np.array([5.0, 10.0, 20.0])
    zero = first_expectation_ratio((0, 0, 0), 1.0, T)
    np.testing.assert_allclose(zero.ratio, 1 - 1.5 / T + (2 * np.exp(-T) - 0.5 * np.exp(-2 * T)) / T, rtol=1e-10)


@pytest.mark.parametrize("p", [(0.0, 0.0, 0.0), FBM])
def test_lhopital_chain(p):
    assert lhopital_residual(p, 1.0, 10.0) < 1e-6


def test_log_space_finite_to_fifty(tmp_path):
    for p in [(0.0, 0.0, 0.0), FBM, (1.5, -1.0, -0.5)]:
        for r in (h_ratio_convergence(p, 2.0, [50.0]), first_expectation_ratio(p, 2.0, [50.0])):
            assert np.all(np.isfinite(r.ratio)) and np.all(np.isfinite(r.log_raw))
    r.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "T,raw,rate,ratio,limit" and len(lines) == 2


def test_growth_envelope_tail(far_paths):
    for p, b in far_paths.items():
        env = growth_envelope(b, p)
        assert np.all(np.isfinite(env.statistic))
        assert env.quantile(0.95) <= 1.25 * env.sigma


def test_growth_envelope_scale_equivariant(far_paths):
    b = far_paths[FBM]
    doubled = PathBatch(b.grid, 2 * b.values, b.seed, b.method)
    np.testing.assert_allclose(growth_envelope(doubled, FBM).statistic, 2 * growth_envelope(b, FBM).statistic, rtol=1e-14)


def test_growth_envelope_needs_range():
    b = simulate_paths((0, 0, 0), geometric_grid(2.0, 10), 0, 2)
    with pytest.raises(DomainError):
        growth_envelope(b, (0, 0, 0))


def test_lamperti_stationary_variance(far_paths):
    for p, b in far_paths.items():
        s, y = lamperti(b, p)
        env = growth_envelope(b, p)
        var = y.var(axis=0)
        se = env.sigma**2 * math.sqrt(2.0 / y.shape[0])
        for k in (10, 150, 398):
            assert abs(var[k] - env.sigma**2) < 3 * se
        assert s[-1] == pytest.approx(math.log(1e3))


def test_marcus_statistic_falls_with_horizon(far_paths):
    # the 1.3 sigma bound is asymptotic in S; at S = log 1e3 the q95 sits near 1.4 sigma
    b = far_paths[(0.0, 0.0, 0.0)]
    sigma = growth_envelope(b, (0, 0, 0)).sigma
    q = [np.quantile(marcus_statistic(b, (0, 0, 0), s), 0.95) / sigma for s in (2.0, 4.0, math.log(1e3))]
    assert q[0] > q[1] > q[2]
    with pytest.raises(DomainError):
        marcus_statistic(b, (0, 0, 0), 0.5)
