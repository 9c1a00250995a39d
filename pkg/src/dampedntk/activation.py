"""Smooth activations with first/second derivatives and their sup-norm constants."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

KINDS = ("softplus", "tanh", "sigmoid", "erf")

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class ActivationSpec:
    """A C^2 activation together with sigma(0), sup|sigma'| and sup|sigma''|."""

    kind: str
    sigma0: float
    sup_d1: float
    sup_d2: float

    def __call__(self, x, order: int = 0):
        return eval_activation(self, x, order)


def _softplus(x):
    # max(x, 0) + log1p(exp(-|x|)) never overflows
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid_d2(x):
    s = special.expit(x)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


_TABLE = {
    "softplus": (
        _softplus,
        special.expit,
        lambda x: special.expit(x) * special.expit(-x),
    ),
    "tanh": (
        np.tanh,
        lambda x: 1.0 / np.cosh(np.clip(x, -350.0, 350.0)) ** 2,
        lambda x: -2.0 * np.tanh(x) / np.cosh(np.clip(x, -350.0, 350.0)) ** 2,
    ),
    "sigmoid": (
        special.expit,
        lambda x: special.expit(x) * special.expit(-x),
        _sigmoid_d2,
    ),
    "erf": (
        special.erf,
        lambda x: (2.0 / _SQRT_PI) * np.exp(-np.square(x)),
        lambda x: (-4.0 / _SQRT_PI) * x * np.exp(-np.square(x)),
    ),
}

# (sigma(0), sup|sigma'|, sup|sigma''|), closed forms
_CONSTANTS = {
    "softplus": (math.log(2.0), 1.0, 0.25),
    "tanh": (0.0, 1.0, 4.0 / (3.0 * math.sqrt(3.0))),
    "sigmoid": (0.5, 0.25, 1.0 / (6.0 * math.sqrt(3.0))),
    "erf": (0.0, 2.0 / _SQRT_PI, 2.0 * math.sqrt(2.0) / _SQRT_PI * math.exp(-0.5)),
}


def get_activation(kind: str) -> ActivationSpec:
    """Look up an activation by its config string."""
    if isinstance(kind, ActivationSpec):
        return kind
    if kind not in _TABLE:
        raise ValueError(f"unknown activation {kind!r}; expected one of {KINDS}")
    sigma0, d1, d2 = _CONSTANTS[kind]
    return ActivationSpec(kind, sigma0, d1, d2)


def eval_activation(act: ActivationSpec, x, order: int = 0):
    """Evaluate sigma, sigma' or sigma'' elementwise.

    Scalars in, floats out; arrays in, arrays out.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order!r}")
    fn = _TABLE[act.kind][order]
    out = fn(np.asarray(x, dtype=float))
    if np.ndim(out) == 0:
        return float(out)
    return out


def activation_constants(act: ActivationSpec, M: float) -> tuple[float, float]:
    """Return (D, D') for inputs in the ball of radius ``M``.

    D  = 3 max{|sigma(0)|, M sup|sigma'|, sup|sigma'|, 1}
    D' = [max{sup|sigma'|, sup|sigma''|}^2 (M^2 + 1) + D sup|sigma'|] max{1, M}

    D' here is the constant of the kernel time-derivative bound; the Lipschitz
    bound uses a different one, see :func:`lipschitz_dprime`.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    D = 3.0 * max(abs(act.sigma0), M * act.sup_d1, act.sup_d1, 1.0)
    top = max(act.sup_d1, act.sup_d2)
    Dprime = (top**2 * (M**2 + 1.0) + D * act.sup_d1) * max(1.0, M)
    return D, Dprime


def lipschitz_dprime(act: ActivationSpec, M: float) -> float:
    """D' = max{sup|sigma'|, M sup|sigma''|, sup|sigma''|} used in the NTK Lipschitz constant."""
    return max(act.sup_d1, M * act.sup_d2, act.sup_d2)
