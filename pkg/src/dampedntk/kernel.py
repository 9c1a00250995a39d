"""Empirical NTK K_t, Gram matrices H/G, the analytic NTK and kernel drift."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .activation import ActivationSpec, get_activation
from .data import Dataset
from .network import InitDistribution, NetworkParams, hidden, init_network

TAGS = ("empirical_t", "analytic_inf", "initial_0")


@dataclass(frozen=True)
class GramPair:
    """H_ij = K(x_i, x_j) and its normalized version G = H / n."""

    H: np.ndarray
    G: np.ndarray
    t: float = 0.0
    kernel_tag: str = "empirical_t"

    @classmethod
    def from_H(cls, H, t: float = 0.0, kernel_tag: str = "empirical_t") -> "GramPair":
        H = np.asarray(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("Gram matrix must be square")
        if kernel_tag not in TAGS:
            raise ValueError(f"unknown kernel tag {kernel_tag!r}")
        H = np.triu(H) + np.triu(H, 1).T
        return cls(H, H / H.shape[0], float(t), kernel_tag)

    @property
    def n(self) -> int:
        return self.H.shape[0]


@dataclass(frozen=True)
class Architecture:
    m: int
    d: int
    act: ActivationSpec
    dist: InitDistribution = InitDistribution()
    scheme: str = "iid"


@dataclass(frozen=True)
class AnalyticKernelEstimate:
    values: np.ndarray
    n_seeds: int
    std_error: np.ndarray

    @property
    def kappa(self) -> float:
        """max_x K(x, x) over the estimated points (needs a square estimate)."""
        return float(np.max(np.diag(self.values)))


def _features(net: NetworkParams, act: ActivationSpec, X: np.ndarray):
    S, S1 = hidden(net, act, X, (0, 1))
    scale = 1.0 / np.sqrt(net.m)
    return S * scale, S1 * net.a * scale


def ntk_matrix(net: NetworkParams, act: ActivationSpec, X, Y=None) -> np.ndarray:
    """K(X_i, Y_j) via the closed form a-term + (W,b)-term + 1."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != net.d or Y.shape[1] != net.d:
        raise ValueError(f"input dimension does not match network dimension {net.d}")
    Sx, Px = _features(net, act, X)
    if Y is X:
        Sy, Py = Sx, Px
    else:
        Sy, Py = _features(net, act, Y)
    return Sx @ Sy.T + (Px @ Py.T) * (X @ Y.T + 1.0) + 1.0


def ntk_eval(net: NetworkParams, act: ActivationSpec, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("ntk_eval takes two vectors")
    return float(ntk_matrix(net, act, x[None, :], y[None, :])[0, 0])


def gram(net: NetworkParams, act: ActivationSpec, data: Dataset, t: float = 0.0, kernel_tag: str = "empirical_t") -> GramPair:
    X = data.X if isinstance(data, Dataset) else np.atleast_2d(data)
    return GramPair.from_H(ntk_matrix(net, act, X), t, kernel_tag)


def analytic_ntk_mc(arch: Architecture, points, n_seeds: int = 1024, base_seed: int = 0, points_y=None) -> AnalyticKernelEstimate:
    """Average K_0 over ``n_seeds`` initializations with seeds base_seed, base_seed+1, ...

    Reports the standard error sd / sqrt(n_seeds) per entry.
    """
    if n_seeds < 2:
        raise ValueError("n_seeds must be at least 2 to report a standard error")
    X = np.atleast_2d(np.asarray(points, dtype=float))
    Y = None if points_y is None else np.atleast_2d(np.asarray(points_y, dtype=float))
    total = None
    total_sq = None
    for i in range(n_seeds):
        net = init_network(arch.m, arch.d, arch.dist, arch.scheme, base_seed + i)
        K = ntk_matrix(net, arch.act, X, Y)
        if total is None:
            total = np.zeros_like(K)
            total_sq = np.zeros_like(K)
        total += K
        total_sq += K * K
    mean = total / n_seeds
    var = np.maximum(total_sq - n_seeds * mean * mean, 0.0) / (n_seeds - 1)
    return AnalyticKernelEstimate(mean, n_seeds, np.sqrt(var / n_seeds))


def erf_ntk_matrix(X, Y=None) -> np.ndarray:
    """Exact K_inf for erf activation and standard Gaussian (W, b, a, b0).

    With u = <w,x> + b and Sigma the covariance of (u, u'):
      E[erf u erf u']   = (2/pi) asin(2 S12 / sqrt((1 + 2 S11)(1 + 2 S22)))
      E[erf' u erf' u'] = (4/pi) / sqrt(det(I + 2 Sigma))
    and K_inf = first + second * (<x,x'> + 1) + 1.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    s11 = np.sum(X * X, axis=1)[:, None] + 1.0
    s22 = np.sum(Y * Y, axis=1)[None, :] + 1.0
    s12 = X @ Y.T + 1.0
    prod = (1.0 + 2.0 * s11) * (1.0 + 2.0 * s22)
    a_term = (2.0 / np.pi) * np.arcsin(np.clip(2.0 * s12 / np.sqrt(prod), -1.0, 1.0))
    det = np.maximum(prod - 4.0 * s12 * s12, 0.0)
    wb_term = (4.0 / np.pi) * s12 / np.sqrt(det)
    return a_term + wb_term + 1.0


def erf_ntk_closed_form(x, y) -> float:
    return float(erf_ntk_matrix(np.asarray(x, dtype=float)[None, :], np.asarray(y, dtype=float)[None, :])[0, 0])


def analytic_gram(arch: Architecture, X, n_seeds: int = 1024, base_seed: int = 0, method: str = "auto"):
    """G_inf on X plus the per-entry standard error of H_inf (zeros when exact).

    ``method``: 'closed_form' (erf + gaussian only), 'mc', or 'auto'.
    """
    exact_ok = arch.act.kind == "erf" and arch.dist.family == "gaussian"
    if method == "auto":
        method = "closed_form" if exact_ok else "mc"
    if method == "closed_form":
        if not exact_ok:
            raise ValueError("closed-form K_inf needs erf activation and gaussian init")
        H = erf_ntk_matrix(X)
        return GramPair.from_H(H, 0.0, "analytic_inf"), np.zeros_like(H)
    est = analytic_ntk_mc(arch, X, n_seeds, base_seed)
    return GramPair.from_H(est.values, 0.0, "analytic_inf"), est.std_error


def op_norm(A, max_iter: int = 500, tol: float = 1e-10) -> float:
    """Spectral norm of a symmetric matrix by power iteration on A^2."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if not np.any(A):
        return 0.0
    # fixed, non-degenerate start vector keeps the result reproducible
    v = 1.0 + np.arange(n) / max(n, 1)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A @ v
        new = float(np.linalg.norm(w))
        if new == 0.0:
            # start vector in the null space; restart on the largest column
            v = A[:, np.argmax(np.linalg.norm(A, axis=0))].copy()
            v /= np.linalg.norm(v)
            continue
        v2 = A @ w
        nv2 = np.linalg.norm(v2)
        if nv2 == 0.0:
            return new
        v = v2 / nv2
        if abs(new - est) <= tol * max(new, 1e-300):
            return max(new, float(np.linalg.norm(A @ v)))
        est = new
    warnings.warn("power iteration hit the iteration cap", RuntimeWarning, stacklevel=2)
    return max(est, float(np.linalg.norm(A @ v)))


@dataclass(frozen=True)
class DriftSeries:
    times: np.ndarray
    sup_drift: np.ndarray
    op_deviation: np.ndarray | None


def kernel_drift(traj, grid, g_ref: GramPair | None = None) -> DriftSeries:
    """sup over grid^2 of |K_t - K_0| and, given a reference, ||G_ref - G_t||_op, per snapshot."""
    if not len(getattr(traj, "snapshot_times", ())):
        raise ValueError("trajectory has no kernel snapshots")
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    K0 = ntk_matrix(traj.snapshot_params(0), traj.act, grid)
    sup = []
    ops = []
    for i, _ in enumerate(traj.snapshot_times):
        Kt = K0 if i == 0 else ntk_matrix(traj.snapshot_params(i), traj.act, grid)
        sup.append(float(np.max(np.abs(Kt - K0))))
        if g_ref is not None:
            ops.append(op_norm(g_ref.G - traj.gram_snapshots[i].G))
    return DriftSeries(np.asarray(traj.snapshot_times, dtype=float), np.asarray(sup), np.asarray(ops) if g_ref is not None else None)


def get_arch(m: int, d: int, activation="tanh", family: str = "gaussian", scheme: str = "iid") -> Architecture:
    return Architecture(m, d, get_activation(activation), InitDistribution(family), scheme)
