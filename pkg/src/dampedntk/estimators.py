"""scikit-learn style wrappers around the flow, the analytic kernel and the Nystrom basis."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .activation import get_activation
from .data import Dataset
from .flow import SolverConfig, integrate_flow
from .kernel import Architecture, analytic_gram, analytic_ntk_mc, erf_ntk_matrix
from .network import InitDistribution, forward, init_network
from .spectral import eig_gram


class GradientFlowRegressor(RegressorMixin, BaseEstimator):
    """Shallow network trained by gradient flow on the squared loss up to time ``T``.

    After ``fit``: ``net_`` holds the final parameters, ``trajectory_`` the
    recorded dynamics.
    """

    def __init__(self, m=256, activation="tanh", scheme="iid", family="gaussian", T=1.0, method="dopri45", rel_tol=1e-8, abs_tol=1e-10, n_dense=33, seed=0):
        self.m = m
        self.activation = activation
        self.scheme = scheme
        self.family = family
        self.T = T
        self.method = method
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.n_dense = n_dense
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        self.act_ = get_activation(self.activation)
        self.n_features_in_ = X.shape[1]
        net0 = init_network(self.m, X.shape[1], InitDistribution(self.family), self.scheme, self.seed)
        cfg = SolverConfig(self.method, self.T, self.rel_tol, self.abs_tol, n_dense=self.n_dense, n_snapshots=2)
        self.trajectory_ = integrate_flow(net0, self.act_, Dataset(X, y), cfg)
        self.net_ = self.trajectory_.final_params()
        return self

    def predict(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return forward(self.net_, self.act_, X)


def _kernel_fn(est, X, Y):
    arch = Architecture(est.m, X.shape[1], get_activation(est.activation), InitDistribution(est.family), est.scheme)
    exact = arch.act.kind == "erf" and est.family == "gaussian"
    if est.method == "closed_form" or (est.method == "auto" and exact):
        if not exact:
            raise ValueError("closed_form needs activation='erf' with gaussian init")
        return erf_ntk_matrix(X, Y)
    return analytic_ntk_mc(arch, X, est.n_seeds, est.seed, Y).values


class AnalyticNTK(TransformerMixin, BaseEstimator):
    """Maps inputs to K_inf(x, x_j) against the fitted points."""

    def __init__(self, m=256, activation="erf", scheme="iid", family="gaussian", n_seeds=256, seed=0, method="auto"):
        self.m = m
        self.activation = activation
        self.scheme = scheme
        self.family = family
        self.n_seeds = n_seeds
        self.seed = seed
        self.method = method

    def fit(self, X, y=None):
        self.X_fit_ = check_array(X, dtype=np.float64)
        self.n_features_in_ = self.X_fit_.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "X_fit_")
        X = check_array(X, dtype=np.float64)
        return _kernel_fn(self, X, self.X_fit_)


class NystromEigenbasis(TransformerMixin, BaseEstimator):
    """Top eigenvectors of G_inf = H_inf / n extended off-sample.

    ``transform`` returns the L^2-normalized eigenfunction estimates
    lambda_i^{-1} (1/n) sum_j K(x, x_j) (u_i)_j, which equal u_i on the fitted
    points.
    """

    def __init__(self, n_components=5, m=256, activation="erf", scheme="iid", family="gaussian", n_seeds=256, seed=0, method="auto"):
        self.n_components = n_components
        self.m = m
        self.activation = activation
        self.scheme = scheme
        self.family = family
        self.n_seeds = n_seeds
        self.seed = seed
        self.method = method

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        if not 1 <= self.n_components <= X.shape[0]:
            raise ValueError(f"n_components must lie in [1, {X.shape[0]}]")
        self.X_fit_ = X
        self.n_features_in_ = X.shape[1]
        arch = Architecture(self.m, X.shape[1], get_activation(self.activation), InitDistribution(self.family), self.scheme)
        method = self.method
        if method == "auto":
            method = "closed_form" if (self.activation == "erf" and self.family == "gaussian") else "mc"
        g, _ = analytic_gram(arch, X, self.n_seeds, self.seed, method)
        sys = eig_gram(g)
        k = self.n_components
        self.eigenvalues_ = sys.lambdas[:k]
        self.components_ = sys.U[:, :k]
        if np.any(self.eigenvalues_ <= 0):
            raise ValueError("requested components include non-positive eigenvalues")
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=np.float64)
        K = _kernel_fn(self, X, self.X_fit_)
        n = self.X_fit_.shape[0]
        return K @ self.components_ / (n * self.eigenvalues_)
