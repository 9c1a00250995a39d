"""Gradient-flow integration and the kernel-regression reference dynamics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .activation import ActivationSpec
from .data import Dataset, circle_points
from .kernel import GramPair, gram, ntk_matrix
from .network import NetworkParams, flat_rhs, forward, xi, xi_tilde
from .spectral import EigenSystem, SpectrumModel, eig_gram

METHODS = ("rk4_fixed", "dopri45")


class StiffnessError(RuntimeError):
    pass


class InsufficientModesError(ValueError):
    pass


class SignChangeError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    method: str = "dopri45"
    T_final: float = 1.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    step: float = 0.01
    n_dense: int = 129
    n_snapshots: int = 8
    dense_output_times: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.T_final > 0:
            raise ValueError("T_final must be positive")
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.step > 0):
            raise ValueError("tolerances and step must be positive")
        if self.n_dense < 2 and self.dense_output_times is None:
            raise ValueError("need at least two dense output times")

    def dense_times(self) -> np.ndarray:
        if self.dense_output_times is not None:
            t = np.asarray(self.dense_output_times, dtype=float)
            if t[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise ValueError("dense output times must start at 0 and increase strictly")
            return t
        return np.linspace(0.0, self.T_final, self.n_dense)

    def snapshot_times(self) -> np.ndarray:
        return geometric_schedule(self.T_final, self.n_snapshots)


def geometric_schedule(T: float, n_snapshots: int) -> np.ndarray:
    """{0} together with T / 2^j for j = n_snapshots-2, ..., 1, 0."""
    if n_snapshots < 2:
        return np.array([0.0])
    return np.concatenate([[0.0], T / 2.0 ** np.arange(n_snapshots - 2, -1, -1)])


@dataclass
class Trajectory:
    times: np.ndarray
    theta_checkpoints: np.ndarray
    residual_series: np.ndarray
    snapshot_times: np.ndarray
    snapshot_theta: np.ndarray
    gram_snapshots: list
    xi_series: np.ndarray
    xi_tilde_series: np.ndarray
    net0: NetworkParams = field(repr=False)
    act: ActivationSpec = field(repr=False)
    data: Dataset = field(repr=False)
    test_residual_series: np.ndarray | None = None
    eval_grid: np.ndarray | None = field(default=None, repr=False)
    eval_targets: np.ndarray | None = field(default=None, repr=False)

    def params_at(self, i: int) -> NetworkParams:
        return self.net0.with_flat(self.theta_checkpoints[i])

    def snapshot_params(self, i: int) -> NetworkParams:
        return self.net0.with_flat(self.snapshot_theta[i])

    def gram_at(self, i: int) -> GramPair:
        """G_t at dense time index ``i``, recomputed from the stored parameters."""
        return gram(self.params_at(i), self.act, self.data, float(self.times[i]))

    def residual_norms(self) -> np.ndarray:
        return np.linalg.norm(self.residual_series, axis=1) / np.sqrt(self.data.n)

    def final_params(self) -> NetworkParams:
        return self.params_at(len(self.times) - 1)


def _rk4(fun, y0, t0, t1, h):
    nsteps = max(1, int(np.ceil((t1 - t0) / h - 1e-12)))
    dt = (t1 - t0) / nsteps
    y = y0
    t = t0
    for _ in range(nsteps):
        k1 = fun(t, y)
        k2 = fun(t + dt / 2, y + dt / 2 * k1)
        k3 = fun(t + dt / 2, y + dt / 2 * k2)
        k4 = fun(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    return y


def integrate_ode(fun: Callable, y0: np.ndarray, times: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """States at each of ``times`` (first must be 0), restarting the solver at every output time."""
    def guarded(t, y):
        dy = fun(t, y)
        # RK45 keeps shrinking its step on NaN instead of failing
        if not np.all(np.isfinite(dy)):
            raise StiffnessError(f"non-finite vector field at t={t:.6g}")
        return dy

    out = np.empty((len(times), len(y0)))
    out[0] = y0
    y = np.asarray(y0, dtype=float)
    for j in range(1, len(times)):
        t0, t1 = float(times[j - 1]), float(times[j])
        if cfg.method == "rk4_fixed":
            y = _rk4(guarded, y, t0, t1, cfg.step)
        else:
            sol = solve_ivp(guarded, (t0, t1), y, method="RK45", rtol=cfg.rel_tol, atol=cfg.abs_tol)
            if sol.status != 0:
                raise StiffnessError(
                    f"dopri45 failed on [{t0:.6g}, {t1:.6g}] after {sol.nfev} evaluations: {sol.message}"
                )
            y = sol.y[:, -1]
        out[j] = y
    return out


def integrate_flow(net0: NetworkParams, act: ActivationSpec, data: Dataset, cfg: SolverConfig, eval_grid=None, eval_target: Callable | None = None) -> Trajectory:
    """Integrate d theta/dt = -grad Phi(theta) and record residuals, kernels and xi series."""
    if data.d != net0.d:
        raise ValueError("dataset and network dimensions differ")
    dense = cfg.dense_times()
    snaps = cfg.snapshot_times()
    snaps = snaps[snaps <= dense[-1] + 1e-15]
    all_t = np.union1d(dense, snaps)
    m, d = net0.m, net0.d
    X, y = data.X, data.y

    def fun(t, theta):
        return flat_rhs(theta, m, d, act, X, y)

    states = integrate_ode(fun, net0.flat(), all_t, cfg)
    dense_idx = np.searchsorted(all_t, dense)
    snap_idx = np.searchsorted(all_t, snaps)
    theta_dense = states[dense_idx]
    theta_snap = states[snap_idx]

    residuals = np.empty((len(dense), data.n))
    xis = np.empty(len(dense))
    xits = np.empty(len(dense))
    grid = None if eval_grid is None else np.atleast_2d(np.asarray(eval_grid, dtype=float))
    targets = None
    test_res = None
    if grid is not None:
        target = eval_target if eval_target is not None else data.target
        if target is None:
            raise ValueError("an evaluation grid needs a target function")
        targets = np.asarray(target(grid), dtype=float)
        test_res = np.empty((len(dense), grid.shape[0]))
    for i, th in enumerate(theta_dense):
        net = net0.with_flat(th)
        residuals[i] = forward(net, act, X) - y
        xis[i] = xi(net)
        xits[i] = xi_tilde(net)
        if grid is not None:
            test_res[i] = forward(net, act, grid) - targets
    grams = [gram(net0.with_flat(th), act, data, float(t)) for th, t in zip(theta_snap, snaps)]
    return Trajectory(
        times=dense,
        theta_checkpoints=theta_dense,
        residual_series=residuals,
        snapshot_times=snaps,
        snapshot_theta=theta_snap,
        gram_snapshots=grams,
        xi_series=xis,
        xi_tilde_series=xits,
        net0=net0,
        act=act,
        data=data,
        test_residual_series=test_res,
        eval_grid=grid,
        eval_targets=targets,
    )


def kernel_regression_reference(g: GramPair | EigenSystem | np.ndarray, r0, t):
    """exp(-G t) r0 via the eigendecomposition of G; rows follow ``t`` when it is an array."""
    sys = g if isinstance(g, EigenSystem) else eig_gram(g)
    r0 = np.asarray(r0, dtype=float)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValueError("time must be nonnegative")
    coefs = sys.U.T @ r0 / sys.n
    decay = np.exp(-np.outer(ts, sys.lambdas))
    out = (decay * coefs) @ sys.U.T
    if np.ndim(t) == 0:
        out = out[0]
        if ts[0] == 0.0:
            return r0.copy()
    else:
        out[ts == 0.0] = r0
    return out


def l2_coefficients(model: SpectrumModel, f: Callable, n_quad: int = 4096, sample=None):
    """<f, phi_i>_2 for every retained mode, plus ||f||_2^2.

    Circle models use the equispaced trapezoid rule; others need a sample
    from rho for a Monte-Carlo estimate.
    """
    if model.kind == "circle_fourier":
        X = circle_points(2.0 * np.pi * np.arange(n_quad) / n_quad)
    else:
        if sample is None:
            raise ValueError("non-circle models need a Monte-Carlo sample")
        X = np.atleast_2d(sample)
    fx = np.asarray(f(X), dtype=float)
    Phi = model.evaluate(X)
    return Phi.T @ fx / X.shape[0], float(np.mean(fx * fx))


def function_space_reference(model: SpectrumModel, r0: Callable, t: float, eval_grid, n_quad: int = 4096, sample=None, max_discard: float = 1e-3):
    """sum_i exp(-sigma_i t) <r0, phi_i>_2 phi_i on ``eval_grid``."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    coefs, total = l2_coefficients(model, r0, n_quad, sample)
    kept = float(np.sum(coefs**2))
    if total - kept > max_discard * max(total, 1e-300):
        raise InsufficientModesError(f"retained modes miss {(total - kept) / total:.2e} of the residual energy")
    Phi = model.evaluate(np.atleast_2d(eval_grid))
    return Phi @ (np.exp(-model.sigmas * t) * coefs)


@dataclass(frozen=True)
class RateFit:
    rate: float
    r_squared: float
    window: tuple[int, int]


def rate_fit(times, values, lo: float = 0.05, hi: float = 0.8) -> RateFit:
    """Least-squares decay rate of log|value| over the window value/initial in [lo, hi].

    Falls back to the whole pre-floor series when fewer than three samples
    fall inside the window (slowly decaying or constant series).
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if v[0] == 0:
        raise ValueError("initial value is zero")
    v = v * np.sign(v[0])
    rel = v / v[0]
    below = np.nonzero(np.abs(rel) < lo)[0]
    stop = int(below[0]) if len(below) else len(v)
    if np.any(rel[:stop] <= 0):
        raise SignChangeError("series changes sign inside the fit window; use eigenspace energies")
    inside = np.nonzero(rel[:stop] <= hi)[0]
    if len(inside) >= 3:
        i0, i1 = int(inside[0]), int(inside[-1]) + 1
    else:
        i0, i1 = 0, stop
    if i1 - i0 < 2:
        raise ValueError("fewer than two samples available for the fit")
    tt, lv = t[i0:i1], np.log(v[i0:i1])
    A = np.stack([tt, np.ones_like(tt)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = lv - (slope * tt + icpt)
    ss_tot = float(np.sum((lv - lv.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(float(-slope), r2, (i0, i1))


def cross_kernel_at(traj: Trajectory, i: int, X) -> np.ndarray:
    """K_t(X, x_j) against the training inputs at dense index ``i``."""
    return ntk_matrix(traj.params_at(i), traj.act, X, traj.data.X)
