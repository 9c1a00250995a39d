import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dampedntk.data import fourier_target, uniform_circle
from dampedntk.estimators import AnalyticNTK, GradientFlowRegressor, NystromEigenbasis
from dampedntk.kernel import erf_ntk_matrix


@pytest.fixture
def circle():
    X = uniform_circle(24, np.random.default_rng(0))
    return X, fourier_target([1])(X)


def test_regressor_fit_predict(circle):
    X, y = circle
    est = GradientFlowRegressor(m=64, activation="tanh", T=20.0, seed=0).fit(X, y)
    pred = est.predict(X)
    assert pred.shape == (24,)
    r_end = np.sqrt(np.mean((pred - y) ** 2))
    assert r_end < 0.5 * np.sqrt(np.mean(y**2))
    assert est.trajectory_.residual_norms()[-1] == pytest.approx(r_end, rel=1e-12)
    assert est.score(X, y) > 0.5


def test_regressor_params_and_clone():
    est = GradientFlowRegressor(m=32, scheme="doubling")
    params = est.get_params()
    assert params["m"] == 32 and params["scheme"] == "doubling"
    c = clone(est).set_params(T=3.0)
    assert c.T == 3.0 and est.T == 1.0


def test_regressor_not_fitted_and_shape_checks(circle):
    X, y = circle
    with pytest.raises(NotFittedError):
        GradientFlowRegressor().predict(X)
    est = GradientFlowRegressor(m=8, T=0.1).fit(X, y)
    with pytest.raises(ValueError):
        est.predict(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        GradientFlowRegressor().fit(X, y[:-1])


def test_analytic_kernel_transform_matches_closed_form(circle):
    X, _ = circle
    Z = uniform_circle(5, equispaced=True)
    feats = AnalyticNTK().fit(X).transform(Z)
    np.testing.assert_array_equal(feats, erf_ntk_matrix(Z, X))


def test_analytic_kernel_monte_carlo_route(circle):
    X, _ = circle
    est = AnalyticNTK(activation="tanh", m=16, n_seeds=8).fit(X[:4])
    K = est.transform(X[:4])
    assert K.shape == (4, 4) and np.all(np.diag(K) >= 1.0)


def test_nystrom_transform_reproduces_eigenvectors(circle):
    X, _ = circle
    est = NystromEigenbasis(n_components=4).fit(X)
    np.testing.assert_allclose(est.transform(X), est.components_, atol=1e-8)
    assert np.all(np.diff(est.eigenvalues_) <= 0)
    with pytest.raises(ValueError):
        NystromEigenbasis(n_components=99).fit(X)


def test_transformers_clone_cleanly():
    for est in (AnalyticNTK(n_seeds=7), NystromEigenbasis(n_components=2)):
        assert clone(est).get_params() == est.get_params()
