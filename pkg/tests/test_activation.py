import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampedntk.activation import KINDS, activation_constants, eval_activation, get_activation, lipschitz_dprime


def test_softplus_at_zero_is_log_two():
    assert eval_activation(get_activation("softplus"), 0.0, 0) == pytest.approx(math.log(2.0), abs=1e-15)


def test_tanh_slope_at_zero_is_one():
    assert eval_activation(get_activation("tanh"), 0.0, 1) == 1.0


def test_sigmoid_curvature_at_zero_vanishes():
    assert eval_activation(get_activation("sigmoid"), 0.0, 2) == 0.0


def test_bad_order_and_kind_rejected():
    with pytest.raises(ValueError):
        eval_activation(get_activation("tanh"), 0.0, 3)
    with pytest.raises(ValueError):
        get_activation("relu")


def test_scalar_in_scalar_out_array_in_array_out():
    act = get_activation("erf")
    assert isinstance(act(0.3), float)
    assert act(np.zeros((2, 3))).shape == (2, 3)


@pytest.mark.parametrize("kind", KINDS)
def test_no_overflow_at_large_inputs(kind):
    act = get_activation(kind)
    x = np.array([-800.0, -50.0, 50.0, 800.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for order in (0, 1, 2):
            assert np.all(np.isfinite(act(x, order)))


def test_softplus_asymptotics():
    act = get_activation("softplus")
    assert act(500.0) == 500.0
    assert 0.0 < act(-500.0) < 1e-200


@pytest.mark.parametrize("kind", KINDS)
def test_derivatives_match_central_differences(kind, rng):
    act = get_activation(kind)
    x = rng.uniform(-3, 3, size=10)
    h = 1e-5
    for order in (1, 2):
        fd = (act(x + h, order - 1) - act(x - h, order - 1)) / (2 * h)
        exact = act(x, order)
        assert np.all(np.abs(fd - exact) <= 1e-6 * np.maximum(np.abs(exact), 1e-2))


@pytest.mark.parametrize("kind", KINDS)
def test_sup_constants_against_grid_maximum(kind):
    # independent oracle: dense grid maximum of |sigma'| and |sigma''|
    act = get_activation(kind)
    x = np.linspace(-20, 20, 400001)
    assert act.sigma0 == pytest.approx(act(0.0), abs=1e-15)
    assert act.sup_d1 == pytest.approx(np.max(np.abs(act(x, 1))), rel=1e-8)
    assert act.sup_d2 == pytest.approx(np.max(np.abs(act(x, 2))), rel=1e-8)


def test_growth_constant_examples():
    assert activation_constants(get_activation("softplus"), 1.0)[0] == pytest.approx(3.0)
    assert activation_constants(get_activation("tanh"), 2.0)[0] == pytest.approx(6.0)
    D, Dp = activation_constants(get_activation("tanh"), 1.0)
    assert D == pytest.approx(3.0)
    assert Dp == pytest.approx(5.0)


def test_lipschitz_constant_differs_from_derivative_constant():
    act = get_activation("tanh")
    assert lipschitz_dprime(act, 1.0) == pytest.approx(max(1.0, act.sup_d2))
    assert lipschitz_dprime(act, 1.0) != activation_constants(act, 1.0)[1]


def test_nonpositive_radius_rejected():
    with pytest.raises(ValueError):
        activation_constants(get_activation("tanh"), 0.0)


@given(kind=st.sampled_from(KINDS), M=st.floats(1e-3, 1e3))
def test_growth_constant_dominates(kind, M):
    act = get_activation(kind)
    D, Dp = activation_constants(act, M)
    assert D >= 3.0
    assert D >= 3 * M * act.sup_d1 * (1 - 1e-12)
    assert Dp > 0


@given(kind=st.sampled_from(KINDS), x=st.floats(-50, 50), y=st.floats(-50, 50))
def test_mean_value_bounds(kind, x, y):
    act = get_activation(kind)
    assert abs(act(x) - act(y)) <= act.sup_d1 * abs(x - y) * (1 + 1e-12) + 1e-15
    assert abs(act(x, 1) - act(y, 1)) <= act.sup_d2 * abs(x - y) * (1 + 1e-12) + 1e-15
    assert abs(act(x)) <= abs(act.sigma0) + act.sup_d1 * abs(x) + 1e-12
