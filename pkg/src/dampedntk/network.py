"""Shallow NTK-parameterized network f(x) = a^T sigma(Wx + b) / sqrt(m) + b0.

The flat parameter layout is fixed everywhere as (a, vec(W) row-major, b, b0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activation import ActivationSpec, eval_activation
from .data import Dataset

SCHEMES = ("iid", "doubling")
FAMILIES = ("gaussian", "rademacher", "uniform")


@dataclass(frozen=True)
class InitDistribution:
    """Zero-mean, unit-variance subgaussian law shared by W, b, a and b0."""

    family: str = "gaussian"
    variance: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown init family {self.family!r}; expected one of {FAMILIES}")
        if self.variance != 1.0:
            raise ValueError("initialization variance must be 1")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.family == "gaussian":
            return rng.standard_normal(shape)
        if self.family == "rademacher":
            return rng.choice(np.array([-1.0, 1.0]), size=shape)
        lim = np.sqrt(3.0)
        return rng.uniform(-lim, lim, size=shape)


@dataclass(frozen=True)
class NetworkParams:
    a: np.ndarray
    W: np.ndarray
    b: np.ndarray
    b0: float
    scheme: str = "iid"
    seed: int | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if not (a.shape[0] == W.shape[0] == b.shape[0]):
            raise ValueError("a, W and b disagree on the width")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        for arr in (a, W, b):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "b0", float(self.b0))

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def p(self) -> int:
        return param_count(self.m, self.d)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.a, self.W.ravel(), self.b, [self.b0]])

    @classmethod
    def from_flat(cls, theta, m: int, d: int, scheme: str = "iid", seed: int | None = None) -> "NetworkParams":
        a, W, b, b0 = unpack(np.asarray(theta, dtype=float), m, d)
        return cls(a.copy(), W.copy(), b.copy(), float(b0), scheme, seed)

    def with_flat(self, theta) -> "NetworkParams":
        return NetworkParams.from_flat(theta, self.m, self.d, self.scheme, self.seed)


def param_count(m: int, d: int) -> int:
    return m * d + 2 * m + 1


def unpack(theta: np.ndarray, m: int, d: int):
    """Views (a, W, b, b0) into a flat parameter vector."""
    if theta.shape[-1] != param_count(m, d):
        raise ValueError(f"flat vector has length {theta.shape[-1]}, expected {param_count(m, d)}")
    a = theta[..., :m]
    W = theta[..., m : m + m * d].reshape(theta.shape[:-1] + (m, d))
    b = theta[..., m + m * d : 2 * m + m * d]
    b0 = theta[..., -1]
    return a, W, b, b0


def init_network(m: int, d: int, dist: InitDistribution | None = None, scheme: str = "iid", seed: int = 0) -> NetworkParams:
    """Draw theta_0. ``m`` is the final width; under ``doubling`` it must be even.

    The doubling trick draws a width-m/2 network, stacks [W; W], [b; b],
    [a; -a] and sets b0 = 0, so f(.; theta_0) vanishes identically.
    """
    dist = dist or InitDistribution()
    if m < 1 or d < 1:
        raise ValueError("width and dimension must be positive")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    rng = np.random.default_rng(seed)
    if scheme == "iid":
        W = dist.sample(rng, (m, d))
        b = dist.sample(rng, m)
        a = dist.sample(rng, m)
        b0 = float(dist.sample(rng, 1)[0])
        return NetworkParams(a, W, b, b0, "iid", seed)
    if m % 2:
        raise ValueError(f"doubling trick needs an even width, got m={m}")
    half = m // 2
    W = dist.sample(rng, (half, d))
    b = dist.sample(rng, half)
    a = dist.sample(rng, half)
    return NetworkParams(np.concatenate([a, -a]), np.vstack([W, W]), np.concatenate([b, b]), 0.0, "doubling", seed)


def _check_inputs(net: NetworkParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[-1] != net.d:
        raise ValueError(f"input dimension {X.shape[-1]} does not match network dimension {net.d}")
    return X, single


def hidden(net: NetworkParams, act: ActivationSpec, X: np.ndarray, orders=(0, 1)):
    """sigma^{(k)}(W x + b) for each requested order, shape (n, m)."""
    Z = X @ net.W.T + net.b
    return [eval_activation(act, Z, k) for k in orders]


def forward(net: NetworkParams, act: ActivationSpec, x):
    X, single = _check_inputs(net, x)
    (S,) = hidden(net, act, X, (0,))
    out = S @ net.a / np.sqrt(net.m) + net.b0
    return float(out[0]) if single else out


def param_gradient(net: NetworkParams, act: ActivationSpec, x) -> np.ndarray:
    """d f / d theta in the flat layout; shape (p,) for one input, (n, p) for a batch."""
    X, single = _check_inputs(net, x)
    S, S1 = hidden(net, act, X, (0, 1))
    n, m, d = X.shape[0], net.m, net.d
    scale = 1.0 / np.sqrt(m)
    Pa = S1 * net.a * scale  # (n, m): sigma'(z) a / sqrt(m)
    grad = np.empty((n, net.p))
    grad[:, :m] = S * scale
    grad[:, m : m + m * d] = (Pa[:, :, None] * X[:, None, :]).reshape(n, m * d)
    grad[:, m + m * d : 2 * m + m * d] = Pa
    grad[:, -1] = 1.0
    return grad[0] if single else grad


def residual(net: NetworkParams, act: ActivationSpec, data: Dataset) -> np.ndarray:
    return forward(net, act, data.X) - data.y


def flow_rhs(net: NetworkParams, act: ActivationSpec, data: Dataset) -> np.ndarray:
    """-(1/n) sum_i r_i grad f(x_i): the gradient-flow velocity of theta."""
    return flat_rhs(net.flat(), net.m, net.d, act, data.X, data.y)


def flat_rhs(theta: np.ndarray, m: int, d: int, act: ActivationSpec, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Same as :func:`flow_rhs` on a raw flat vector, without building the Jacobian."""
    a, W, b, b0 = unpack(theta, m, d)
    Z = X @ W.T + b
    S = eval_activation(act, Z, 0)
    S1 = eval_activation(act, Z, 1)
    scale = 1.0 / np.sqrt(m)
    # same expression as forward() so a zero residual is exactly zero
    r = S @ a / np.sqrt(m) + b0 - y
    n = X.shape[0]
    w = r / n
    Ra = (S1 * a) * (w[:, None] * scale)  # (n, m)
    out = np.empty_like(theta)
    out[:m] = -(S.T @ w) * scale
    out[m : m + m * d] = -(Ra.T @ X).ravel()
    out[m + m * d : 2 * m + m * d] = -Ra.sum(axis=0)
    out[-1] = -w.sum()
    return out


def xi(net: NetworkParams) -> float:
    """max{||W||_op, ||b||_2, ||a||_2} / sqrt(m), floored at 1."""
    s = np.sqrt(net.m)
    return max(np.linalg.norm(net.W, 2) / s, np.linalg.norm(net.b) / s, np.linalg.norm(net.a) / s, 1.0)


def xi_tilde(net: NetworkParams) -> float:
    """max{max_l ||w_l||_2, ||a||_inf, ||b||_inf}, floored at 1."""
    return max(
        float(np.max(np.linalg.norm(net.W, axis=1))),
        float(np.max(np.abs(net.a))),
        float(np.max(np.abs(net.b))),
        1.0,
    )
