import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampedntk.activation import KINDS, get_activation
from dampedntk.data import Dataset, fourier_target, make_dataset, uniform_circle
from dampedntk.flow import SolverConfig, integrate_flow
from dampedntk.kernel import ntk_matrix
from dampedntk.network import (
    InitDistribution,
    NetworkParams,
    flat_rhs,
    flow_rhs,
    forward,
    init_network,
    param_count,
    param_gradient,
    xi,
    xi_tilde,
)
from dampedntk.recipes import gradient_check


def test_param_count():
    assert param_count(5, 3) == 5 * 3 + 2 * 5 + 1
    assert init_network(5, 3).p == 26


def test_doubling_init_outputs_zero():
    net = init_network(2, 1, InitDistribution("gaussian"), "doubling", 7)
    # exact up to BLAS summation order
    assert abs(forward(net, get_activation("tanh"), np.array([0.3]))) <= 1e-12


def test_odd_width_doubling_rejected():
    with pytest.raises(ValueError):
        init_network(3, 2, scheme="doubling")


def test_seeded_init_is_bitwise_reproducible():
    a = init_network(64, 3, InitDistribution("gaussian"), "iid", 1).flat()
    b = init_network(64, 3, InitDistribution("gaussian"), "iid", 1).flat()
    assert a.tobytes() == b.tobytes()


def test_rademacher_variance_near_one():
    net = init_network(100_000, 1, InitDistribution("rademacher"), "iid", 2)
    assert 0.99 <= np.var(net.a) <= 1.01


@pytest.mark.parametrize("family", ["gaussian", "rademacher", "uniform"])
def test_init_laws_have_zero_mean_unit_variance(family):
    x = InitDistribution(family).sample(np.random.default_rng(0), 200_000)
    se = 1.0 / np.sqrt(len(x))
    assert abs(np.mean(x)) <= 4 * se
    assert abs(np.var(x) - 1.0) <= 4 * np.sqrt(2.0) * se * 2


def test_nonunit_variance_rejected():
    with pytest.raises(ValueError):
        InitDistribution("gaussian", 2.0)


def test_zero_outer_weights_give_zero_output():
    net = NetworkParams(np.zeros(4), np.ones((4, 2)), np.ones(4), 0.0)
    assert forward(net, get_activation("softplus"), np.array([0.2, -1.0])) == 0.0


def test_single_unit_tanh_at_origin():
    net = NetworkParams([1.0], [[0.0]], [0.0], 0.0)
    assert forward(net, get_activation("tanh"), np.array([0.4])) == 0.0


def test_mirrored_tanh_units_cancel():
    net = NetworkParams([1.0, 1.0], [[1.0], [-1.0]], [0.0, 0.0], 0.5)
    assert forward(net, get_activation("tanh"), np.array([0.7])) == pytest.approx(0.5, abs=1e-15)


def test_dimension_mismatch_rejected():
    net = init_network(4, 3)
    with pytest.raises(ValueError):
        forward(net, get_activation("tanh"), np.zeros(2))


def test_bias_gradient_coordinate_is_one(rng):
    net = init_network(8, 2, seed=3)
    g = param_gradient(net, get_activation("erf"), rng.standard_normal((5, 2)))
    assert np.all(g[:, -1] == 1.0)


def test_zero_outer_weights_kill_inner_gradients():
    net = NetworkParams(np.zeros(3), np.ones((3, 2)), np.ones(3), 0.1)
    g = param_gradient(net, get_activation("tanh"), np.array([0.3, 0.4]))
    assert np.all(g[3:-1] == 0.0)


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_matches_central_differences(kind):
    assert gradient_check(kind, 20, seed=5, h=1e-5) <= 1e-5


def test_flow_velocity_vanishes_at_zero_residual(rng):
    act = get_activation("tanh")
    net = init_network(6, 2, seed=0)
    X = rng.standard_normal((5, 2))
    data = Dataset(X, forward(net, act, X))
    assert np.all(flow_rhs(net, act, data) == 0.0)


def test_flow_velocity_single_sample(rng):
    act = get_activation("softplus")
    net = init_network(6, 2, seed=0)
    x = rng.standard_normal(2)
    data = Dataset(x[None, :], [0.3])
    r = forward(net, act, x) - 0.3
    np.testing.assert_allclose(flow_rhs(net, act, data), -r * param_gradient(net, act, x), rtol=1e-13, atol=1e-15)


def test_flow_velocity_matches_jacobian_form(rng):
    act = get_activation("erf")
    net = init_network(7, 3, seed=4)
    X = rng.standard_normal((9, 3))
    y = rng.standard_normal(9)
    J = param_gradient(net, act, X)
    r = forward(net, act, X) - y
    np.testing.assert_allclose(flat_rhs(net.flat(), 7, 3, act, X, y), -J.T @ r / 9, rtol=1e-12, atol=1e-14)


def test_energy_dissipation_along_trajectory():
    act = get_activation("tanh")
    data = make_dataset(uniform_circle(12, np.random.default_rng(1)), fourier_target([1, 2]))
    net = init_network(32, 2, seed=2)
    T = 2.0
    traj = integrate_flow(net, act, data, SolverConfig("dopri45", T, 1e-11, 1e-13, n_dense=401, n_snapshots=2))
    phi = 0.5 * traj.residual_norms() ** 2
    h = traj.times[1] - traj.times[0]
    for i in np.linspace(2, len(traj.times) - 3, 50).astype(int):
        r = traj.residual_series[i]
        G = ntk_matrix(traj.params_at(i), act, data.X) / data.n
        exact = -(r @ G @ r) / data.n
        fd = (-phi[i + 2] + 8 * phi[i + 1] - 8 * phi[i - 1] + phi[i - 2]) / (12 * h)
        assert exact <= 0
        assert abs(fd - exact) <= 1e-6


def test_scaled_norms_floor_at_one():
    net = NetworkParams(np.full(4, 0.01), np.full((4, 2), 0.01), np.zeros(4), 0.0)
    assert xi(net) == 1.0
    assert xi_tilde(net) == 1.0


@given(m=st.integers(1, 8), d=st.integers(1, 4), seed=st.integers(0, 2**31 - 1))
def test_flat_layout_roundtrip(m, d, seed):
    net = init_network(m, d, seed=seed)
    back = NetworkParams.from_flat(net.flat(), m, d)
    assert back.flat().tobytes() == net.flat().tobytes()
    np.testing.assert_array_equal(back.W, net.W)


@given(seed=st.integers(0, 10_000), x=st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_doubling_zero_everywhere(seed, x):
    for kind in KINDS:
        net = init_network(16, 2, scheme="doubling", seed=seed)
        assert abs(forward(net, get_activation(kind), np.array(x))) <= 1e-12
