"""Damped-deviations bookkeeping.

Reconstructs the correction integral of the residual dynamics, checks the
training-set and function-space identities, the per-eigendirection bound,
the parameter-norm Gronwall envelopes, and evaluates the explicit parts of
the width / sample-size hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .activation import ActivationSpec, activation_constants, lipschitz_dprime
from .data import circle_points
from .flow import Trajectory
from .kernel import GramPair, ntk_matrix, op_norm
from .network import flat_rhs, forward, param_gradient
from .spectral import EigenSystem, SpectrumModel, eig_gram


class QuadratureError(ValueError):
    pass


class MissingEstimateError(ValueError):
    pass


def simpson_weights(n_nodes: int, h: float) -> np.ndarray:
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise QuadratureError(f"composite Simpson needs an odd node count >= 3, got {n_nodes}")
    w = np.full(n_nodes, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3.0


def _uniform_nodes(times: np.ndarray, stride: int) -> tuple[np.ndarray, float]:
    idx = np.arange(0, len(times), stride)
    t = times[idx]
    dt = np.diff(t)
    if len(t) < 3 or len(t) % 2 == 0:
        raise QuadratureError(f"dense grid with stride {stride} has {len(t)} nodes; need an odd count >= 3")
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise QuadratureError("dense grid is not uniform")
    return idx, float(dt[0])


def interpolated_gram(traj: Trajectory, t: float) -> np.ndarray:
    """G_t linearly interpolated between stored snapshots."""
    st = np.asarray(traj.snapshot_times)
    j = int(np.searchsorted(st, t, side="right")) - 1
    j = min(max(j, 0), len(st) - 1)
    if j == len(st) - 1 or st[j] == t:
        return traj.gram_snapshots[j].G
    w = (t - st[j]) / (st[j + 1] - st[j])
    return (1 - w) * traj.gram_snapshots[j].G + w * traj.gram_snapshots[j + 1].G


@dataclass
class DeviationTerms:
    """(G_ref - G_s) r_s and ||G_ref - G_s||_op at selected dense indices."""

    idx: np.ndarray
    times: np.ndarray
    dev_residual: np.ndarray
    op_dev: np.ndarray


def deviation_terms(traj: Trajectory, g_ref: GramPair, gram_source: str = "dense", stride: int = 1, with_op: bool = True) -> DeviationTerms:
    if gram_source not in ("dense", "snapshots"):
        raise ValueError("gram_source must be 'dense' or 'snapshots'")
    idx = np.arange(0, len(traj.times), stride)
    n = traj.data.n
    dev_r = np.empty((len(idx), n))
    ops = np.full(len(idx), np.nan)
    for j, i in enumerate(idx):
        if gram_source == "dense":
            Gs = ntk_matrix(traj.params_at(i), traj.act, traj.data.X) / n
        else:
            Gs = interpolated_gram(traj, float(traj.times[i]))
        D = g_ref.G - Gs
        dev_r[j] = D @ traj.residual_series[i]
        if with_op:
            ops[j] = op_norm(0.5 * (D + D.T))
    return DeviationTerms(idx, traj.times[idx], dev_r, ops)


@dataclass
class DeviationReport:
    times: np.ndarray
    identity_residual: np.ndarray
    correction_series: np.ndarray
    sup_op_deviation: float
    r0_norm: float
    per_mode_bounds: dict = field(default_factory=dict)

    @property
    def max_relative_residual(self) -> float:
        return float(np.max(self.identity_residual) / self.r0_norm) if self.r0_norm > 0 else float(np.max(self.identity_residual))


def verify_training_identity(traj: Trajectory, g_ref: GramPair, gram_source: str = "dense", stride: int = 1, terms: DeviationTerms | None = None) -> DeviationReport:
    """Check r_t = exp(-Gt) r_0 + int_0^t exp(-G(t-s)) (G - G_s) r_s ds at every even dense node.

    The integral is composite Simpson over the dense grid (optionally
    subsampled by ``stride``). ``gram_source='snapshots'`` interpolates G_s
    linearly between the stored snapshots instead of recomputing it.
    """
    idx, h = _uniform_nodes(np.asarray(traj.times), stride)
    if terms is None or not np.array_equal(terms.idx, idx):
        terms = deviation_terms(traj, g_ref, gram_source, stride, with_op=False)
    sys = eig_gram(g_ref)
    n = traj.data.n
    lam = sys.lambdas
    U = sys.U
    t = traj.times[idx]
    R = traj.residual_series[idx]
    coef0 = U.T @ R[0] / n
    W = terms.dev_residual @ U / n  # eigen-coordinates of the integrand, (N, n)
    checkpoints = list(range(0, len(idx), 2))
    res = np.empty(len(checkpoints))
    corr = np.empty((len(checkpoints), n))
    for c, J in enumerate(checkpoints):
        if J == 0:
            c_t = np.zeros(n)
        else:
            w = simpson_weights(J + 1, h)
            damp = np.exp(-np.outer(t[J] - t[: J + 1], lam))
            c_t = (w[:, None] * damp * W[: J + 1]).sum(axis=0)
        corr[c] = U @ c_t
        ref = U @ (np.exp(-lam * t[J]) * coef0)
        res[c] = np.linalg.norm(R[J] - ref - corr[c]) / np.sqrt(n)
    r0n = float(np.linalg.norm(R[0]) / np.sqrt(n))
    sup_op = float(np.nanmax(terms.op_dev)) if np.any(np.isfinite(terms.op_dev)) else float("nan")
    return DeviationReport(t[checkpoints], res, corr, sup_op, r0n)


@dataclass
class FunctionIdentityReport:
    times: np.ndarray
    labels: tuple[str, ...]
    lhs: np.ndarray  # (checkpoints, modes): <r_t, phi_i>_2
    rhs: np.ndarray
    initial: np.ndarray  # <r_0, phi_i>_2
    std_error: np.ndarray | None = None

    @property
    def abs_residual(self) -> np.ndarray:
        return np.abs(self.lhs - self.rhs)

    def relative_residual(self) -> np.ndarray:
        """max over checkpoints of |lhs - rhs| / |<r_0, phi_i>|, per mode."""
        return np.max(self.abs_residual, axis=0) / np.abs(self.initial)


def verify_function_identity(traj: Trajectory, model: SpectrumModel, modes: Sequence[int] | None = None, n_quad: int = 512, sample=None, stride: int = 1, target: Callable | None = None) -> FunctionIdentityReport:
    """Per-mode check of <r_t, phi_i> = e^{-s_i t}<r_0, phi_i> + int e^{-s_i(t-u)} <(T_K - T_n^u) r_u, phi_i> du.

    <T_K r_u, phi_i> = sigma_i <r_u, phi_i> and T_n^u r_u(x) = (1/n) sum_j K_u(x, x_j) r_u(x_j),
    with K_u rebuilt from the stored parameters. Inner products use the
    trapezoid rule on the circle, or a Monte-Carlo ``sample`` otherwise (with
    standard errors reported).
    """
    target = target if target is not None else traj.data.target
    if target is None:
        raise ValueError("function-space identity needs the target function")
    if model.kind == "circle_fourier":
        Xq = circle_points(2.0 * np.pi * np.arange(n_quad) / n_quad)
    else:
        if sample is None:
            raise ValueError("non-circle models need a Monte-Carlo sample")
        Xq = np.atleast_2d(sample)
    modes = list(range(len(model.sigmas))) if modes is None else list(modes)
    Phi = np.stack([model.eigenfunctions[i](Xq) for i in modes], axis=1)
    sig = model.sigmas[modes]
    idx, h = _uniform_nodes(np.asarray(traj.times), stride)
    fstar = np.asarray(target(Xq), dtype=float)
    n = traj.data.n
    N = Xq.shape[0]
    C = np.empty((len(idx), len(modes)))
    Q = np.empty((len(idx), len(modes)))
    se = None
    for j, i in enumerate(idx):
        net = traj.params_at(i)
        r = forward(net, traj.act, Xq) - fstar
        C[j] = Phi.T @ r / N
        Tr = ntk_matrix(net, traj.act, Xq, traj.data.X) @ traj.residual_series[i] / n
        Q[j] = Phi.T @ Tr / N
        if j == 0 and model.kind != "circle_fourier":
            se = np.std(Phi * r[:, None], axis=0, ddof=1) / np.sqrt(N)
    G = sig * C - Q
    t = traj.times[idx]
    checkpoints = list(range(0, len(idx), 2))
    lhs = C[checkpoints]
    rhs = np.empty_like(lhs)
    for c, J in enumerate(checkpoints):
        base = np.exp(-sig * t[J]) * C[0]
        if J == 0:
            rhs[c] = base
            continue
        w = simpson_weights(J + 1, h)
        damp = np.exp(-np.outer(t[J] - t[: J + 1], sig))
        rhs[c] = base + (w[:, None] * damp * G[: J + 1]).sum(axis=0)
    labels = tuple(model.labels[i] for i in modes) if model.labels else tuple(str(i) for i in modes)
    return FunctionIdentityReport(t[checkpoints], labels, lhs, rhs, C[0], se)


@dataclass
class CorollaryCheck:
    k: int
    times: np.ndarray
    measured: np.ndarray
    bound: np.ndarray
    passed: bool

    @property
    def margin(self) -> float:
        """Smallest (bound - measured) over time; negative means violated."""
        return float(np.min(self.bound - self.measured))


def corollary_bound_check(traj: Trajectory, sys: EigenSystem, k_list: Sequence[int], terms: DeviationTerms | None = None, rel_slack: float = 0.05, abs_slack: float = 1e-8) -> list[CorollaryCheck]:
    """||P_k(r_t - exp(-G t) r_0)||_n <= sup_{s<=t} ||G - G_s||_op ||r_0||_n (1 - e^{-lambda_k t}) / lambda_k.

    G is the matrix behind ``sys``; the sup runs over the dense nodes up to t.
    """
    if sys.source is None:
        raise ValueError("eigensystem has no source Gram matrix")
    if terms is None or np.any(np.isnan(terms.op_dev)):
        terms = deviation_terms(traj, sys.source, "dense", 1, with_op=True)
    n = sys.n
    t = terms.times
    R = traj.residual_series[terms.idx]
    r0 = R[0]
    r0n = np.linalg.norm(r0) / np.sqrt(n)
    coef0 = sys.U.T @ r0 / n
    run_sup = np.maximum.accumulate(terms.op_dev)
    out = []
    for k in k_list:
        if not 1 <= k <= n:
            raise ValueError(f"k={k} outside [1, {n}]")
        lam_k = sys.lambdas[k - 1]
        Uk = sys.U[:, :k]
        measured = np.empty(len(t))
        for j in range(len(t)):
            ref = sys.U @ (np.exp(-sys.lambdas * t[j]) * coef0)
            diff = R[j] - ref
            ck = Uk.T @ diff / n
            measured[j] = np.linalg.norm(ck)
        if lam_k > 0:
            damp = -np.expm1(-lam_k * t) / lam_k
        else:
            damp = t.copy()
        bound = run_sup * r0n * damp
        ok = bool(np.all(measured <= bound * (1 + rel_slack) + abs_slack))
        out.append(CorollaryCheck(int(k), t, measured, bound, ok))
    return out


@dataclass
class XiEnvelopeCheck:
    times: np.ndarray
    xi: np.ndarray
    xi_tilde: np.ndarray
    envelope_factor: np.ndarray
    crude_factor: np.ndarray
    passed: bool

    @property
    def xi_envelope(self) -> np.ndarray:
        return self.envelope_factor * self.xi[0]

    @property
    def xi_tilde_envelope(self) -> np.ndarray:
        return self.envelope_factor * self.xi_tilde[0]


def xi_envelope_check(traj: Trajectory, act: ActivationSpec | None = None, D: float | None = None, M: float | None = None, slack: float = 1e-9) -> XiEnvelopeCheck:
    """xi(t), xi~(t) <= exp((D/sqrt m) int_0^t ||r_s||_n ds) times their initial values.

    The integral is the trapezoid rule on the dense grid. Also checks the
    cruder envelope exp(D ||r_0||_n t / sqrt m).
    """
    act = act or traj.act
    if D is None:
        M = traj.data.radius if M is None else M
        D, _ = activation_constants(act, max(M, 1e-12))
    m = traj.net0.m
    rn = traj.residual_norms()
    t = traj.times
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (rn[1:] + rn[:-1]) * np.diff(t))])
    factor = np.exp(D / np.sqrt(m) * integral)
    crude = np.exp(D * rn[0] * t / np.sqrt(m))
    xs, xts = traj.xi_series, traj.xi_tilde_series
    ok = bool(
        np.all(xs <= factor * xs[0] * (1 + slack) + slack)
        and np.all(xts <= factor * xts[0] * (1 + slack) + slack)
        and np.all(xs <= crude * xs[0] * (1 + slack) + slack)
        and np.all(xts <= crude * xts[0] * (1 + slack) + slack)
        and np.all(xs >= 1.0)
        and np.all(xts >= 1.0)
    )
    return XiEnvelopeCheck(t, xs, xts, factor, crude, ok)


def residual_weighted_check(traj: Trajectory, stride: int = 1) -> bool:
    """||(1/n) sum_i r_i(t) grad f(x_i)||_2 <= max_i ||grad f(x_i)||_2 ||r(t)||_n <= ... ||r(0)||_n."""
    rn = traj.residual_norms()
    net0 = traj.net0
    ok = True
    for i in range(0, len(traj.times), stride):
        net = traj.params_at(i)
        v = flat_rhs(net.flat(), net0.m, net0.d, traj.act, traj.data.X, traj.data.y)
        gmax = float(np.max(np.linalg.norm(param_gradient(net, traj.act, traj.data.X), axis=1)))
        lhs = float(np.linalg.norm(v))
        ok &= lhs <= gmax * rn[i] * (1 + 1e-12) + 1e-14
        ok &= lhs <= gmax * rn[0] * (1 + 1e-9) + 1e-12
    return bool(ok)


# --------------------------------------------------------------------------
# hypothesis / constant calculator


@dataclass
class Requirement:
    """One width or sample-size hypothesis.

    ``value`` is the evaluated explicit part. For asymptotic (Omega-tilde)
    requirements it is the polynomial part only; the absolute constant stays
    symbolic and ``log_factors`` lists what was dropped.
    """

    name: str
    quantity: str
    value: float
    formula: str
    explicit: bool
    log_factors: tuple[str, ...] = ()
    configured: float | None = None

    @property
    def satisfied(self) -> bool | None:
        if not self.explicit or self.configured is None:
            return None
        return self.configured >= self.value

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "quantity": self.quantity,
            "value": self.value,
            "formula": self.formula,
            "explicit": self.explicit,
            "constant": "exact" if self.explicit else "symbolic C",
            "log_factors": list(self.log_factors),
            "configured": self.configured,
            "satisfied": self.satisfied,
        }


@dataclass
class BoundInputs:
    m: int
    n: int
    d: int
    T: float
    M: float = 1.0
    delta: float = 0.1
    eps: float = 0.1
    y_norm: float = 1.0
    f_sup: float = 1.0
    f_l2: float = 1.0
    r0_norm: float | None = None
    scheme: str = "iid"
    kappa: float | None = None
    lambdas: Sequence[float] | None = None
    sigmas: Sequence[float] | None = None
    k: int = 1
    Gamma: float = 2.0
    xi0: float = 1.0
    xi_tilde0: float = 1.0
    A: float = 1.0
    B: float = 1.0
    f0_sup: float = 0.0
    pk_f_l2: float | None = None
    sigmas_estimated: bool = False


@dataclass
class BoundReport:
    D: float
    Dprime: float
    Dprime_lipschitz: float
    xi0: float
    xi_tilde0: float
    lipschitz_L: float
    kappa: float | None
    S: float
    Sprime: float
    psi_md: float
    Gamma: float
    T: float
    m_required: dict
    n_required: dict
    extras: dict
    gronwall_envelope: Callable = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {
            "D": self.D,
            "Dprime": self.Dprime,
            "Dprime_lipschitz": self.Dprime_lipschitz,
            "xi0": self.xi0,
            "xi_tilde0": self.xi_tilde0,
            "lipschitz_L": self.lipschitz_L,
            "kappa": self.kappa,
            "S": self.S,
            "Sprime": self.Sprime,
            "psi_md": self.psi_md,
            "psi_md_constant": "symbolic C",
            "Gamma": self.Gamma,
            "T": self.T,
            "m_required": {k: v.as_dict() for k, v in self.m_required.items()},
            "n_required": {k: v.as_dict() for k, v in self.n_required.items()},
            "extras": self.extras,
        }


TARGETS = (
    "spectral_bias_underparam",
    "spectral_bias_test_error",
    "ntk_regime_training",
    "moderate_overparam",
    "moderate_overparam_rate",
    "kernel_drift",
    "label_participation",
)


def psi_covering(act: ActivationSpec, m: int, d: int, A: float, B: float, M: float) -> float:
    """Polynomial part of the covering constant (the absolute constant C is left out)."""
    gamma = abs(act.sigma0) + act.sup_d1 * (A * M + A)
    return max(math.sqrt(m) * A * gamma, math.sqrt(m * d) * A * A * act.sup_d1 * M, math.sqrt(m) * A * A * act.sup_d1, B)


def _need(cond, what):
    if cond is None:
        raise MissingEstimateError(f"{what} is required for this hypothesis")
    return cond


def bound_calculator(inp: BoundInputs, act: ActivationSpec, targets: Sequence[str] = TARGETS) -> BoundReport:
    D, Dp = activation_constants(act, inp.M)
    Dl = lipschitz_dprime(act, inp.M)
    p = inp.m * inp.d + 2 * inp.m + 1
    Sprime = 0.0 if inp.scheme == "doubling" else inp.f0_sup
    S = inp.f_sup + Sprime
    r0n = inp.y_norm if inp.r0_norm is None else inp.r0_norm
    m_req: dict[str, Requirement] = {}
    n_req: dict[str, Requirement] = {}
    extras: dict = {}
    k = inp.k
    unknown = [t for t in targets if t not in TARGETS]
    if unknown:
        raise ValueError(f"unknown targets {unknown}; expected some of {TARGETS}")

    def gap():
        sig = _need(inp.sigmas, "operator eigenvalues sigma_k, sigma_{k+1}")
        if len(sig) <= k:
            raise MissingEstimateError(f"need sigma_{k + 1}")
        return sig[k - 1] - sig[k]

    def n_gap_req(name):
        kap = _need(inp.kappa, "kappa")
        val = 128.0 * kap**2 * math.log(2.0 / inp.delta) / gap() ** 2
        return Requirement(name, "n", val, "128 kappa^2 log(2/delta) / (sigma_k - sigma_{k+1})^2", True, (), inp.n)

    for tgt in targets:
        if tgt == "spectral_bias_underparam":
            m_req[tgt] = Requirement(tgt, "m", D**2 * inp.y_norm**2 * inp.T**2, "D^2 ||y||_n^2 T^2", True, (), inp.m)
            m_req[tgt + ":concentration"] = Requirement(
                tgt + ":concentration", "m", (math.log(1.0 / inp.delta) + inp.d) * max(inp.T**2, 1.0),
                "C (log(c/delta) + d) max{T^2, 1}", False, ("log factors inside O~(d)",), inp.m,
            )
        elif tgt == "spectral_bias_test_error":
            sig = _need(inp.sigmas, "operator eigenvalue sigma_k")
            sk = sig[k - 1]
            m_req[tgt] = Requirement(tgt, "m", inp.d / (inp.eps * sk**4), "C d / (eps sigma_k^4)", False, ("polylog(m, n, 1/delta)",), inp.m)
            n_req[tgt] = Requirement(tgt, "n", p / (sk**4 * inp.eps), "C p / (sigma_k^4 eps)", False, ("polylog(m, n, 1/delta)",), inp.n)
            pk = inp.pk_f_l2 if inp.pk_f_l2 is not None else inp.f_l2
            arg = math.sqrt(2.0) * pk / math.sqrt(inp.eps)
            # no top-k energy above the target error: stop immediately
            extras["stopping_time"] = math.log(arg) / sk if arg > 1.0 else 0.0
            extras["stopping_time_estimated"] = bool(inp.sigmas_estimated)
        elif tgt == "ntk_regime_training":
            lam = _need(inp.lambdas, "Gram eigenvalues")
            lam_n_H = inp.n * float(lam[-1])
            if lam_n_H <= 0:
                raise MissingEstimateError("smallest eigenvalue of H_inf must be positive")
            m_req[tgt] = Requirement(tgt, "m", inp.d * inp.n**5 / (inp.eps**2 * lam_n_H**4), "C d n^5 / (eps^2 lambda_n(H_inf)^4)", False, ("polylog(n, 1/delta)",), inp.m)
        elif tgt == "moderate_overparam":
            val = inp.d * inp.T**2 * inp.f_sup**2 * (1 + inp.T * inp.f_sup) ** 2 / inp.eps**2
            m_req[tgt] = Requirement(tgt, "m", val, "C d T^2 ||f*||_inf^2 (1 + T ||f*||_inf)^2 / eps^2", False, ("polylog(m, 1/delta)",), inp.m)
            n_req[tgt] = n_gap_req(tgt)
        elif tgt == "moderate_overparam_rate":
            lam = _need(inp.lambdas, "Gram eigenvalues")
            kap = _need(inp.kappa, "kappa")
            lk = float(lam[k - 1])
            g = gap()
            val = inp.n * g**2 * inp.d * inp.f_sup**2 * (1 + inp.f_sup / lk) ** 2 / (kap**2 * inp.f_l2**2 * lk**2)
            m_req[tgt] = Requirement(
                tgt, "m", val, "C n (sigma_k - sigma_{k+1})^2 d ||f*||_inf^2 (1 + ||f*||_inf / lambda_k)^2 / (kappa^2 ||f*||_2^2 lambda_k^2)",
                False, ("polylog(m, n, 1/delta)",), inp.m,
            )
            n_req[tgt] = n_gap_req(tgt)
            extras["horizon_T"] = math.log(math.sqrt(inp.n) * r0n) / lk
        elif tgt == "kernel_drift":
            if not inp.Gamma > 1:
                raise ValueError("Gamma must exceed 1")
            m_req[tgt] = Requirement(tgt, "m", 4 * D**2 * inp.y_norm**2 * inp.T**2 / math.log(inp.Gamma) ** 2, "4 D^2 ||y||_n^2 T^2 / log(Gamma)^2", True, (), inp.m)
        elif tgt == "label_participation":
            kap = _need(inp.kappa, "kappa")
            extras["participation_bound"] = 4 * kap * inp.f_l2 * math.sqrt(10 * math.log(2 / inp.delta)) / (gap() * math.sqrt(inp.n))
            n_req[tgt] = n_gap_req(tgt)

    L = 6.0 * D * Dl * inp.xi0**2 * inp.xi_tilde0
    psi = psi_covering(act, inp.m, inp.d, inp.A, inp.B, inp.M)
    xi0 = inp.xi0

    def envelope(t):
        return np.exp(D * r0n * np.asarray(t, dtype=float) / math.sqrt(inp.m)) * xi0

    return BoundReport(D, Dp, Dl, inp.xi0, inp.xi_tilde0, L, inp.kappa, S, Sprime, psi, inp.Gamma, inp.T, m_req, n_req, extras, envelope)


def bound_report_markdown(rep: BoundReport) -> str:
    lines = [
        "| constant | value |",
        "|---|---|",
        f"| D | {rep.D:.6g} |",
        f"| D' (kernel derivative) | {rep.Dprime:.6g} |",
        f"| D' (Lipschitz) | {rep.Dprime_lipschitz:.6g} |",
        f"| xi(0) | {rep.xi0:.6g} |",
        f"| xi~(0) | {rep.xi_tilde0:.6g} |",
        f"| Lipschitz L = 6 D D' xi^2 xi~ | {rep.lipschitz_L:.6g} |",
        f"| kappa | {rep.kappa if rep.kappa is None else f'{rep.kappa:.6g}'} |",
        f"| S, S' | {rep.S:.6g}, {rep.Sprime:.6g} |",
        f"| Psi(m, d) / C | {rep.psi_md:.6g} |",
        "",
        "| hypothesis | quantity | required | configured | formula | status |",
        "|---|---|---|---|---|---|",
    ]
    for req in list(rep.m_required.values()) + list(rep.n_required.values()):
        status = {True: "met", False: "NOT met", None: "asymptotic (C symbolic; " + ", ".join(req.log_factors) + ")"}[req.satisfied]
        lines.append(f"| {req.name} | {req.quantity} | {req.value:.6g} | {req.configured} | {req.formula} | {status} |")
    for k, v in rep.extras.items():
        lines.append(f"\n{k}: {v}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PositivityResult:
    min_eigenvalue: float
    flagged: bool


def positivity_check(obj, threshold: float = 1e-10) -> PositivityResult:
    """Smallest eigenvalue of G (Gram input) or smallest retained sigma (model input)."""
    if isinstance(obj, SpectrumModel):
        v = float(np.min(obj.sigmas))
    elif isinstance(obj, EigenSystem):
        v = float(obj.lambdas[-1])
    elif isinstance(obj, GramPair):
        v = float(np.linalg.eigvalsh(obj.G)[0])
    else:
        v = float(np.linalg.eigvalsh(np.asarray(obj, dtype=float))[0])
    return PositivityResult(v, v < threshold)
