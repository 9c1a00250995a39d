import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from dampedntk.activation import get_activation
from dampedntk.data import Dataset, circle_mode, fourier_target, make_dataset, uniform_circle
from dampedntk.flow import (
    InsufficientModesError,
    SignChangeError,
    SolverConfig,
    StiffnessError,
    function_space_reference,
    geometric_schedule,
    integrate_flow,
    integrate_ode,
    kernel_regression_reference,
    rate_fit,
)
from dampedntk.kernel import erf_ntk_matrix, gram
from dampedntk.network import forward, init_network
from dampedntk.spectral import circle_fourier_model, circle_profile


def _data(n=8, seed=0):
    return make_dataset(uniform_circle(n, np.random.default_rng(seed)), fourier_target([1, 2]))


def test_zero_residual_is_fixed_point():
    act = get_activation("tanh")
    X = uniform_circle(6, np.random.default_rng(0))
    net = init_network(16, 2, seed=1)
    traj = integrate_flow(net, act, Dataset(X, forward(net, act, X)), SolverConfig(T_final=1.0, n_dense=5))
    assert np.all(traj.theta_checkpoints == net.flat())
    assert np.all(traj.residual_series == 0.0)


def test_trajectory_bookkeeping():
    act = get_activation("tanh")
    data = _data()
    net = init_network(16, 2, seed=1)
    traj = integrate_flow(net, act, data, SolverConfig(T_final=2.0, n_dense=17, n_snapshots=5), uniform_circle(32, equispaced=True))
    assert np.all(np.diff(traj.times) > 0)
    assert np.all(np.diff(traj.residual_norms()) <= 1e-12)
    np.testing.assert_array_equal(traj.residual_series[0], forward(net, act, data.X) - data.y)
    np.testing.assert_allclose(traj.snapshot_times, [0, 0.25, 0.5, 1.0, 2.0])
    assert len(traj.gram_snapshots) == 5 and traj.test_residual_series.shape == (17, 32)


def test_geometric_schedule():
    np.testing.assert_allclose(geometric_schedule(8.0, 4), [0, 2, 4, 8])
    assert list(geometric_schedule(1.0, 1)) == [0.0]


def test_rk4_richardson_ratio():
    act = get_activation("tanh")
    data = _data()
    net = init_network(16, 2, seed=1)

    def final(step):
        traj = integrate_flow(net, act, data, SolverConfig("rk4_fixed", 2.0, step=step, n_dense=2, n_snapshots=2))
        return traj.residual_series[-1]

    h = 0.2
    ref = final(h / 8)
    ratio = np.linalg.norm(final(h) - ref) / np.linalg.norm(final(h / 2) - ref)
    assert abs(ratio - 16) <= 8


def test_failed_solve_raises_stiffness_error():
    cfg = SolverConfig("dopri45", 1.0)
    with pytest.raises(StiffnessError):
        integrate_ode(lambda t, y: np.full_like(y, np.nan), np.ones(2), np.array([0.0, 1.0]), cfg)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig("euler")
    with pytest.raises(ValueError):
        SolverConfig(T_final=0.0)
    with pytest.raises(ValueError):
        SolverConfig(dense_output_times=(0.5, 1.0)).dense_times()


def test_reference_at_time_zero(rng):
    r0 = rng.standard_normal(5)
    out = kernel_regression_reference(np.eye(5), r0, 0.0)
    assert np.array_equal(out, r0)


def test_reference_scalar_decay(rng):
    r0 = rng.standard_normal(4)
    np.testing.assert_allclose(kernel_regression_reference(np.eye(4), r0, math.log(2)), r0 / 2, rtol=1e-14)
    with pytest.raises(ValueError):
        kernel_regression_reference(np.eye(4), r0, -1.0)


def test_reference_against_ode_oracle(rng):
    A = rng.standard_normal((6, 6))
    G = A @ A.T / 6
    r0 = rng.standard_normal(6)
    sol = solve_ivp(lambda t, v: -G @ v, (0, 3), r0, method="RK45", rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(kernel_regression_reference(G, r0, 3.0), sol.y[:, -1], atol=1e-8)


def test_reference_time_array(rng):
    r0 = rng.standard_normal(3)
    out = kernel_regression_reference(np.diag([1.0, 2.0, 3.0]), r0, np.array([0.0, 1.0]))
    assert out.shape == (2, 3) and np.array_equal(out[0], r0)
    np.testing.assert_allclose(out[1], r0 * np.exp(-np.array([1.0, 2.0, 3.0])), rtol=1e-13)


@pytest.fixture(scope="module")
def erf_model():
    return circle_fourier_model(circle_profile(erf_ntk_matrix), 11)


def test_function_reference_at_zero(erf_model):
    grid = uniform_circle(64, equispaced=True)
    f = fourier_target([1, 2])
    np.testing.assert_allclose(function_space_reference(erf_model, f, 0.0, grid), f(grid), atol=1e-12)


def test_function_reference_single_mode(erf_model):
    grid = uniform_circle(64, equispaced=True)
    i = erf_model.index_of("cos2")
    phi = circle_mode("cos2")
    t = 1 / erf_model.sigmas[i]
    np.testing.assert_allclose(function_space_reference(erf_model, phi, t, grid), math.exp(-1) * phi(grid), atol=1e-12)


def test_function_reference_doubling_start(erf_model):
    # f0 = 0, so r0 = -f*; each mode decays at its own eigenvalue
    grid = uniform_circle(64, equispaced=True)
    fstar = circle_mode("cos1")
    net = init_network(64, 2, scheme="doubling", seed=0)
    act = get_activation("erf")

    def r0(X):
        return forward(net, act, X) - fstar(X)

    sig = erf_model.sigmas[erf_model.index_of("cos1")]
    out = function_space_reference(erf_model, r0, 2.0, grid)
    np.testing.assert_allclose(out, -math.exp(-2 * sig) * fstar(grid), atol=1e-12)


def test_function_reference_needs_enough_modes(erf_model):
    with pytest.raises(InsufficientModesError):
        function_space_reference(erf_model, circle_mode("cos9"), 1.0, uniform_circle(8, equispaced=True))


def test_rate_fit_exact_exponential():
    t = np.linspace(0, 10, 50)
    fit = rate_fit(t, np.exp(-0.5 * t))
    assert fit.rate == pytest.approx(0.5, abs=1e-9)
    assert fit.r_squared >= 1 - 1e-12


def test_rate_fit_with_noise():
    rng = np.random.default_rng(0)
    t = np.linspace(0, 10, 50)
    fit = rate_fit(t, np.exp(-0.5 * t) + 1e-6 * rng.standard_normal(50))
    assert fit.rate == pytest.approx(0.5, abs=0.01)


def test_rate_fit_constant_series():
    assert rate_fit(np.linspace(0, 1, 20), np.full(20, 3.0)).rate == pytest.approx(0.0, abs=1e-9)


def test_rate_fit_sign_change():
    with pytest.raises(SignChangeError):
        rate_fit(np.arange(5.0), np.array([1.0, 0.8, -0.6, 0.5, 0.4]))


def test_projected_dynamics_match_linear_flow_at_large_width():
    act = get_activation("tanh")
    data = _data()
    net = init_network(4096, 2, seed=0)
    traj = integrate_flow(net, act, data, SolverConfig("dopri45", 2.0, n_dense=9, n_snapshots=2))
    r0 = traj.residual_series[0]
    ref = kernel_regression_reference(gram(net, act, data), r0, traj.times)
    dev = np.max(np.linalg.norm(traj.residual_series - ref, axis=1)) / np.linalg.norm(r0)
    assert dev <= 0.05
