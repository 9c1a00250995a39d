"""Config-driven pipeline: data -> init -> reference kernel -> eigensystem ->
flow -> verifiers -> exports, plus re-verification and ladder sweeps."""

from __future__ import annotations

import math
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .activation import get_activation
from .config import ExperimentConfig, load_config
from .data import BandlimitedTarget, Dataset, circle_points, load_dataset_csv, parse_mode_label, substream, substream_seed, uniform_circle, uniform_sphere
from .deviations import (
    BoundInputs,
    DeviationTerms,
    bound_calculator,
    bound_report_markdown,
    corollary_bound_check,
    deviation_terms,
    positivity_check,
    residual_weighted_check,
    verify_function_identity,
    verify_training_identity,
    xi_envelope_check,
)
from .flow import SolverConfig, Trajectory, integrate_flow, rate_fit
from .io import (
    export_trajectory,
    load_array,
    read_csv,
    save_checkpoint,
    sha256_file,
    write_csv,
    write_gram_csv,
    write_json,
    write_matrix_csv,
    write_spectrum_csv,
    atomic_write_text,
)
from .kernel import Architecture, GramPair, analytic_gram, analytic_ntk_mc, erf_ntk_matrix, gram, ntk_matrix
from .network import InitDistribution, forward, init_network, xi, xi_tilde
from .spectral import SpectrumModel, bottom_participation, circle_fourier_model, circle_profile, eig_gram, norm_n, project_onto

RESERVED = {"manifest.json"}


class LadderError(ValueError):
    pass


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage


@dataclass
class RunManifest:
    config_hash: str
    version: str
    files: dict
    verifiers: dict

    @property
    def passed(self) -> bool:
        return all(self.verifiers.values())

    def as_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "version": self.version,
            "files": dict(sorted(self.files.items())),
            "verifiers": dict(sorted(self.verifiers.items())),
            "passed": self.passed,
        }


@dataclass
class RunContext:
    cfg: ExperimentConfig
    data: Dataset
    net0: object
    act: object
    g_ref: GramPair
    g_ref_se: np.ndarray
    g0: GramPair
    sys: object
    model: SpectrumModel | None
    eval_grid: np.ndarray | None
    traj: Trajectory | None = None
    terms: DeviationTerms | None = None
    results: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    bounds: object = None


# -- building blocks ---------------------------------------------------------


def build_target(cfg: ExperimentConfig):
    if cfg.target.kind == "bandlimited":
        return BandlimitedTarget(tuple(cfg.target.modes), tuple(float(c) for c in cfg.target.coefs))
    return None


def build_dataset(cfg: ExperimentConfig, label: str = "data", n: int | None = None) -> Dataset:
    d = cfg.data
    n = d.n if n is None else n
    target = build_target(cfg)
    if d.kind == "file":
        ds = load_dataset_csv(cfg.resolve(d.path))
        X, y = ds.X, ds.y
    else:
        rng = substream(cfg.seed, label)
        X = uniform_circle(n, rng, d.equispaced) if d.kind == "uniform_circle" else uniform_sphere(n, d.d, rng)
        y = None
    if cfg.target.kind == "file":
        y = np.loadtxt(cfg.resolve(cfg.target.path), delimiter=",", ndmin=1).reshape(-1)
    elif target is not None:
        y = target(X)
    if y is None:
        raise ValueError("no labels: give a target or labelled data")
    return Dataset(X, y, d.kind, target)


def build_network(cfg: ExperimentConfig, m: int | None = None, label: str = "init"):
    net = cfg.network
    return init_network(net.m if m is None else m, cfg.data.d, InitDistribution(net.family), net.scheme, substream_seed(cfg.seed, label))


def architecture(cfg: ExperimentConfig, m: int | None = None) -> Architecture:
    net = cfg.network
    return Architecture(net.m if m is None else m, cfg.data.d, get_activation(net.activation), InitDistribution(net.family), net.scheme)


def reference_kernel(cfg: ExperimentConfig, X, arch: Architecture | None = None):
    """(GramPair, std error) for K_inf on X."""
    arch = arch or architecture(cfg)
    return analytic_gram(arch, X, cfg.kernel.n_seeds, substream_seed(cfg.seed, "kinf"), cfg.kernel.method)


def build_model(cfg: ExperimentConfig) -> tuple[SpectrumModel | None, str]:
    """Exact circle eigenbasis of K_inf; the profile is exact for erf/gaussian, Monte-Carlo otherwise."""
    if cfg.data.kind != "uniform_circle":
        return None, "none"
    arch = architecture(cfg)
    exact = arch.act.kind == "erf" and arch.dist.family == "gaussian" and cfg.kernel.method != "mc"
    if exact:
        prof = circle_profile(erf_ntk_matrix)
        return circle_fourier_model(prof, cfg.kernel.n_modes), "closed_form"
    base = substream_seed(cfg.seed, "kinf")

    def kern(A, B):
        return analytic_ntk_mc(arch, A, cfg.kernel.n_seeds, base, B).values

    # a seed-averaged kernel is only rotation invariant in expectation
    prof = circle_profile(kern, check=False)
    return circle_fourier_model(prof, cfg.kernel.n_modes, cfg.kernel.profile_quad), "mc_profile"


def build_eval_grid(cfg: ExperimentConfig):
    if cfg.data.kind == "uniform_circle" and cfg.verify.n_eval > 0:
        return uniform_circle(cfg.verify.n_eval, equispaced=True)
    if cfg.data.kind == "uniform_sphere" and cfg.verify.n_eval_sphere > 0:
        return uniform_sphere(cfg.verify.n_eval_sphere, cfg.data.d, substream(cfg.seed, "eval"))
    return None


def solver_config(cfg: ExperimentConfig) -> SolverConfig:
    s = cfg.solver
    return SolverConfig(s.method, s.T, s.rel_tol, s.abs_tol, s.step, s.n_dense, s.n_snapshots)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def prepare(cfg: ExperimentConfig) -> RunContext:
    data = _stage("data", build_dataset, cfg)
    act = get_activation(cfg.network.activation)
    net0 = _stage("init", build_network, cfg)
    g0 = gram(net0, act, data, 0.0, "initial_0")
    if cfg.kernel.reference == "initial":
        g_ref, se = g0, np.zeros_like(g0.H)
    else:
        g_ref, se = _stage("kernel", reference_kernel, cfg, data.X)
    sys = _stage("eigen", eig_gram, g_ref)
    model, src = _stage("eigen", build_model, cfg)
    ctx = RunContext(cfg, data, net0, act, g_ref, se, g0, sys, model, build_eval_grid(cfg))
    ctx.diagnostics["model_source"] = src
    return ctx


# -- verifiers ---------------------------------------------------------------


def _target_eigenspaces(ctx: RunContext):
    """(freq, model/Gram indices) for every Fourier frequency carried by the target."""
    if ctx.model is None or ctx.cfg.target.kind != "bandlimited":
        return []
    freqs = []
    for lab, c in zip(ctx.cfg.target.modes, ctx.cfg.target.coefs):
        f = parse_mode_label(lab)[1]
        if c != 0 and f not in freqs:
            freqs.append(f)
    out = []
    for f in sorted(freqs):
        idx = ctx.model.eigenspace(f)
        if idx:
            out.append((f, idx))
    return out


def half_energy_time(times, energy) -> float:
    """First time the energy drops to half its initial value (log-linear interpolation); inf if never."""
    e = np.asarray(energy, dtype=float)
    hit = np.nonzero(e <= 0.5 * e[0])[0]
    if e[0] <= 0 or not len(hit):
        return math.inf
    j = int(hit[0])
    if j == 0:
        return float(times[0])
    l0, l1 = math.log(e[j - 1]), math.log(max(e[j], 1e-300))
    w = (math.log(0.5 * e[0]) - l0) / (l1 - l0)
    return float(times[j - 1] + w * (times[j] - times[j - 1]))


def spectral_bias_check(ctx: RunContext, sup_dev: float) -> dict:
    cfg = ctx.cfg.verify
    traj = ctx.traj
    modes = []
    for f, idx in _target_eigenspaces(ctx):
        series = np.array([norm_n(project_onto(r, ctx.sys, idx)) for r in traj.residual_series])
        lam = float(np.mean(ctx.sys.lambdas[idx]))
        fit = rate_fit(traj.times, series)
        qualifies = lam >= cfg.rate_threshold * sup_dev
        rel = abs(fit.rate - lam) / lam
        modes.append(
            {
                "freq": f,
                "indices": idx,
                "lambda": lam,
                "fitted_rate": fit.rate,
                "r_squared": fit.r_squared,
                "relative_error": rel,
                "qualifies": bool(qualifies),
                "rate_ok": bool(rel <= cfg.rate_tol) if qualifies else None,
                "half_energy_time": half_energy_time(traj.times, series**2),
                "series": series,
            }
        )
    by_lam = sorted(modes, key=lambda r: -r["lambda"])
    halves = [r["half_energy_time"] for r in by_lam]
    ordered = all(math.isfinite(h) for h in halves) and all(a < b for a, b in zip(halves, halves[1:]))
    rates_ok = all(r["rate_ok"] for r in modes if r["qualifies"])
    return {
        "passed": bool(rates_ok and ordered and len(modes) > 0),
        "rates_ok": bool(rates_ok),
        "half_energy_ordered": bool(ordered),
        "n_qualifying": sum(r["qualifies"] for r in modes),
        "sup_op_deviation": sup_dev,
        "modes": modes,
    }


def run_verifiers(ctx: RunContext) -> None:
    cfg = ctx.cfg
    v = cfg.verify
    traj = ctx.traj
    need_terms = v.training_identity or v.corollary or v.spectral_bias
    if need_terms:
        ctx.terms = _stage("verify", deviation_terms, traj, ctx.g_ref, v.gram_source, 1, True)
    res = ctx.results
    if v.training_identity:
        rep = _stage("verify", verify_training_identity, traj, ctx.g_ref, v.gram_source, 1, ctx.terms)
        entry = {
            "passed": bool(rep.max_relative_residual <= v.identity_tol),
            "max_relative_residual": rep.max_relative_residual,
            "tolerance": v.identity_tol,
            "sup_op_deviation": rep.sup_op_deviation,
            "times": rep.times,
            "identity_residual": rep.identity_residual,
            "gram_source": v.gram_source,
        }
        if v.quartering:
            coarse = _subsample_terms(ctx.terms, 4)
            rep4 = _stage("verify", verify_training_identity, traj, ctx.g_ref, v.gram_source, 4, coarse)
            common = np.isin(rep.times, rep4.times)
            fine = float(np.max(rep.identity_residual[common]))
            ratio = float(np.max(rep4.identity_residual)) / fine if fine > 0 else math.inf
            entry["quartering_ratio"] = ratio
            entry["coarse_max_relative_residual"] = rep4.max_relative_residual
            entry["passed"] = bool(entry["passed"] and ratio >= 8.0)
        res["training_identity"] = entry
    if v.function_identity and ctx.model is not None and cfg.target.kind == "bandlimited":
        idx = [ctx.model.index_of(lab) for lab, c in zip(cfg.target.modes, cfg.target.coefs) if c != 0 and lab in ctx.model.labels]
        if idx:
            fr = _stage("verify", verify_function_identity, traj, ctx.model, idx, v.n_quad)
            rel = fr.relative_residual()
            res["function_identity"] = {
                "passed": bool(np.all(rel <= v.function_tol)),
                "modes": list(fr.labels),
                "relative_residual": rel,
                "tolerance": v.function_tol,
            }
    if v.corollary and v.k_list:
        checks = _stage("verify", corollary_bound_check, traj, ctx.sys, v.k_list, ctx.terms)
        res["corollary"] = {
            "passed": all(c.passed for c in checks),
            "per_k": [{"k": c.k, "passed": c.passed, "margin": c.margin, "lambda_k": float(ctx.sys.lambdas[c.k - 1])} for c in checks],
        }
        ctx.diagnostics["corollary_checks"] = checks
    if v.xi_envelope:
        xc = _stage("verify", xi_envelope_check, traj)
        res["xi_envelope"] = {"passed": xc.passed, "xi_max": float(np.max(xc.xi)), "xi_tilde_max": float(np.max(xc.xi_tilde))}
    if v.residual_weighted:
        res["residual_weighted"] = {"passed": _stage("verify", residual_weighted_check, traj)}
    if v.spectral_bias:
        sup_dev = float(np.max(ctx.terms.op_dev))
        res["spectral_bias"] = _stage("verify", spectral_bias_check, ctx, sup_dev)
    if v.positivity:
        pg = positivity_check(ctx.g_ref)
        ctx.diagnostics["positivity"] = {"min_eigenvalue_G": pg.min_eigenvalue, "flagged_G": pg.flagged}
        if ctx.model is not None:
            pm = positivity_check(ctx.model)
            ctx.diagnostics["positivity"].update({"min_sigma_model": pm.min_eigenvalue, "flagged_model": pm.flagged})


def _subsample_terms(terms: DeviationTerms, stride: int) -> DeviationTerms:
    sel = slice(None, None, stride)
    return DeviationTerms(terms.idx[sel], terms.times[sel], terms.dev_residual[sel], terms.op_dev[sel])


# -- bounds ------------------------------------------------------------------


def bound_inputs(ctx: RunContext) -> BoundInputs:
    cfg = ctx.cfg
    data = ctx.data
    b = cfg.bounds
    grid = ctx.eval_grid if ctx.eval_grid is not None else data.X
    f0 = forward(ctx.net0, ctx.act, grid)
    target = data.target
    if isinstance(target, BandlimitedTarget):
        f_l2 = target.l2_norm
        f_sup = target.sup_norm()
    else:
        f_l2 = norm_n(data.y)
        f_sup = float(np.max(np.abs(data.y)))
    model = ctx.model
    pk = None
    if model is not None and isinstance(target, BandlimitedTarget):
        top = set(model.labels[: b.k])
        pk = math.sqrt(sum(c * c for lab, c in zip(target.modes, target.coefs) if lab in top))
    return BoundInputs(
        m=cfg.network.m,
        n=data.n,
        d=data.d,
        T=cfg.solver.T,
        M=max(data.radius, 1e-12),
        delta=b.delta,
        eps=b.eps,
        y_norm=norm_n(data.y),
        f_sup=f_sup,
        f_l2=f_l2,
        r0_norm=norm_n(forward(ctx.net0, ctx.act, data.X) - data.y),
        scheme=cfg.network.scheme,
        kappa=model.kappa if model is not None else float(np.max(np.diag(ctx.g_ref.H))),
        lambdas=ctx.sys.lambdas,
        sigmas=None if model is None else model.sigmas,
        k=b.k,
        Gamma=b.Gamma,
        xi0=xi(ctx.net0),
        xi_tilde0=xi_tilde(ctx.net0),
        A=b.A,
        B=b.B,
        f0_sup=float(np.max(np.abs(f0))),
        pk_f_l2=pk,
        sigmas_estimated=ctx.diagnostics.get("model_source") == "mc_profile",
    )


def compute_bounds(ctx: RunContext):
    inp = bound_inputs(ctx)
    targets = ["spectral_bias_underparam", "kernel_drift"]
    if inp.lambdas is not None and inp.lambdas[-1] > 0:
        targets.append("ntk_regime_training")
    if inp.sigmas is not None and len(inp.sigmas) > inp.k:
        targets += ["spectral_bias_test_error", "moderate_overparam", "label_participation"]
        if inp.lambdas[inp.k - 1] > 0:
            targets.append("moderate_overparam_rate")
    rep = bound_calculator(inp, ctx.act, targets)
    rep.extras["subgaussian_K"] = ctx.cfg.bounds.subgaussian_K
    rep.extras["subgaussian_K_estimated"] = ctx.cfg.network.family == "gaussian"
    rep.extras["Sprime_source"] = "measured sup |f(.; theta_0)| on the evaluation grid"
    return rep


# -- exports -----------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items() if k != "series"}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def export_run(ctx: RunContext, out: Path) -> RunManifest:
    cfg = ctx.cfg
    atomic_write_text(out / "config.toml", cfg.to_toml())
    export_trajectory(ctx.traj, out / "trajectory")
    write_gram_csv(out / "gram_ref.csv", ctx.g_ref)
    write_matrix_csv(out / "gram_ref_stderr.csv", ctx.g_ref_se)
    model = ctx.model
    write_spectrum_csv(out / "spectrum.csv", ctx.sys.lambdas, None if model is None else model.sigmas, None if model is None else model.labels)
    save_checkpoint(out / "theta0.bin", ctx.net0, {"role": "initial"})
    save_checkpoint(out / "theta_final.bin", ctx.traj.final_params(), {"role": "final", "t": float(ctx.traj.times[-1])})
    if ctx.terms is not None:
        write_csv(out / "deviation.csv", ["t", "op_deviation"], zip(ctx.terms.times, ctx.terms.op_dev))
    groups = _target_eigenspaces(ctx)
    if groups:
        cols = [np.array([norm_n(project_onto(r, ctx.sys, idx)) for r in ctx.traj.residual_series]) for _, idx in groups]
        write_csv(out / "projections.csv", ["t"] + [f"freq{f}" for f, _ in groups], zip(ctx.traj.times, *cols))
    if "corollary_checks" in ctx.diagnostics:
        rows = []
        for c in ctx.diagnostics["corollary_checks"]:
            rows += [[c.k, t, meas, bd] for t, meas, bd in zip(c.times, c.measured, c.bound)]
        write_csv(out / "corollary.csv", ["k", "t", "measured", "bound"], rows)
    if "training_identity" in ctx.results:
        ti = ctx.results["training_identity"]
        write_csv(out / "identity.csv", ["t", "identity_residual"], zip(ti["times"], ti["identity_residual"]))
    write_json(out / "verify.json", {"verifiers": _clean(ctx.results), "diagnostics": {k: v for k, v in ctx.diagnostics.items() if k != "corollary_checks"}})
    if ctx.bounds is not None:
        write_json(out / "bounds.json", ctx.bounds.as_dict())
        atomic_write_text(out / "bounds.md", bound_report_markdown(ctx.bounds))
    return write_manifest(ctx, out)


def write_manifest(ctx: RunContext, out: Path) -> RunManifest:
    files = {}
    for p in sorted(out.rglob("*")):
        rel = p.relative_to(out).as_posix()
        if p.is_file() and rel not in RESERVED and not p.name.startswith("."):
            files[rel] = sha256_file(p)
    man = RunManifest(ctx.cfg.config_hash(), __version__, files, {k: bool(v["passed"]) for k, v in ctx.results.items()})
    write_json(out / "manifest.json", man.as_dict())
    return man


# -- entry points ------------------------------------------------------------


def execute(cfg: ExperimentConfig) -> RunContext:
    """Everything except writing files."""
    ctx = prepare(cfg)
    ctx.traj = _stage("flow", integrate_flow, ctx.net0, ctx.act, ctx.data, solver_config(cfg), ctx.eval_grid, None)
    run_verifiers(ctx)
    ctx.bounds = _stage("bounds", compute_bounds, ctx)
    return ctx


def run(cfg: ExperimentConfig | str | Path, out=None) -> tuple[RunManifest, RunContext]:
    if not isinstance(cfg, ExperimentConfig):
        cfg = load_config(cfg)
    out = Path(out if out is not None else cfg.resolve(cfg.out))
    if out.exists():
        shutil.rmtree(out)
    ctx = execute(cfg)
    man = _stage("export", export_run, ctx, out)
    return man, ctx


def load_trajectory(ctx: RunContext, run_dir: Path) -> Trajectory:
    tdir = run_dir / "trajectory"
    missing = [f for f in ("times.csv", "residuals.csv", "xi.csv", "theta_dense.bin", "theta_snapshots.bin") if not (tdir / f).exists()]
    if missing:
        raise FileNotFoundError("missing trajectory files: " + ", ".join(missing))
    _, times = read_csv(tdir / "times.csv")
    _, res = read_csv(tdir / "residuals.csv")
    _, xis = read_csv(tdir / "xi.csv")
    theta = load_array(tdir / "theta_dense.bin")
    snap_theta = load_array(tdir / "theta_snapshots.bin")
    cfg = solver_config(ctx.cfg)
    snaps = cfg.snapshot_times()
    snaps = snaps[snaps <= times[-1, 0] + 1e-15]
    grams = [gram(ctx.net0.with_flat(th), ctx.act, ctx.data, float(t)) for th, t in zip(snap_theta, snaps)]
    return Trajectory(times[:, 0], theta, res, snaps, snap_theta, grams, xis[:, 1], xis[:, 2], ctx.net0, ctx.act, ctx.data)


def verify_run(run_dir) -> tuple[RunManifest, RunContext]:
    """Re-run every enabled verifier on a stored run and refresh verify.json / manifest.json."""
    run_dir = Path(run_dir)
    if not (run_dir / "config.toml").exists():
        raise FileNotFoundError(f"missing file: {run_dir / 'config.toml'}")
    cfg = load_config(run_dir / "config.toml")
    ctx = prepare(cfg)
    ctx.traj = _stage("load", load_trajectory, ctx, run_dir)
    run_verifiers(ctx)
    write_json(run_dir / "verify.json", {"verifiers": _clean(ctx.results), "diagnostics": {k: v for k, v in ctx.diagnostics.items() if k != "corollary_checks"}})
    return write_manifest(ctx, run_dir), ctx


def bounds_only(cfg: ExperimentConfig):
    ctx = prepare(cfg)
    return compute_bounds(ctx)


# -- sweeps ------------------------------------------------------------------


@dataclass
class SweepResult:
    axis: str
    metric: str
    values: np.ndarray
    means: np.ndarray
    std_errors: np.ndarray
    slope: float
    slope_stderr: float
    intercept: float

    def as_dict(self) -> dict:
        return {
            "axis": self.axis,
            "metric": self.metric,
            "values": self.values,
            "means": self.means,
            "std_errors": self.std_errors,
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "intercept": self.intercept,
        }


def _grid(cfg: ExperimentConfig):
    if cfg.data.d == 2:
        return circle_points(2.0 * np.pi * np.arange(cfg.sweep.grid) / cfg.sweep.grid)
    return uniform_sphere(cfg.sweep.grid, cfg.data.d, substream(cfg.seed, "eval"))


def _kinf_on(cfg: ExperimentConfig, X, m_ref: int):
    arch = architecture(cfg, m_ref)
    g, _ = analytic_gram(arch, X, cfg.kernel.n_seeds, substream_seed(cfg.seed, "kinf"), cfg.kernel.method)
    return g.H


def sweep_point(cfg: ExperimentConfig, value: int) -> np.ndarray:
    """Per-seed metric samples at one ladder point."""
    s = cfg.sweep
    act = get_activation(cfg.network.activation)
    out = np.empty(s.n_seeds)
    if s.metric == "kernel_convergence":
        G = _grid(cfg)
        Kinf = _kinf_on(cfg, G, max(s.values))
        arch = architecture(cfg, value)
        base = substream_seed(cfg.seed, "sweep-init")
        for i in range(s.n_seeds):
            net = init_network(value, arch.d, arch.dist, arch.scheme, base + i)
            out[i] = np.max(np.abs(ntk_matrix(net, act, G) - Kinf))
    elif s.metric == "kernel_drift":
        G = _grid(cfg)
        data = build_dataset(cfg)
        arch = architecture(cfg, value)
        base = substream_seed(cfg.seed, "sweep-init")
        scfg = SolverConfig(cfg.solver.method, s.t, cfg.solver.rel_tol, cfg.solver.abs_tol, cfg.solver.step, 3, 2)
        for i in range(s.n_seeds):
            net = init_network(value, arch.d, arch.dist, arch.scheme, base + i)
            traj = integrate_flow(net, act, data, scfg)
            out[i] = np.max(np.abs(ntk_matrix(traj.final_params(), act, G) - ntk_matrix(net, act, G)))
    else:
        for i in range(s.n_seeds):
            data = build_dataset(cfg, f"sweep-data/{i}", n=value)
            g, _ = reference_kernel(cfg, data.X)
            out[i] = bottom_participation(data.y, eig_gram(g), s.k)
    return out


def loglog_slope(x, y) -> tuple[float, float, float]:
    """(slope, its standard error, intercept) of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise LadderError(f"a ladder needs at least 3 points, got {len(x)}")
    fit = stats.linregress(np.log(x), np.log(y))
    return float(fit.slope), float(fit.stderr), float(fit.intercept)


def _sweep_task(args):
    cfg, value = args
    return sweep_point(cfg, value)


def sweep(cfg: ExperimentConfig | str | Path, out=None, jobs: int = 1) -> SweepResult:
    if not isinstance(cfg, ExperimentConfig):
        cfg = load_config(cfg)
    s = cfg.sweep
    if len(s.values) < 3:
        raise LadderError(f"sweep.values: a ladder needs at least 3 points, got {len(s.values)}")
    tasks = [(cfg, int(v)) for v in s.values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            samples = list(pool.map(_sweep_task, tasks))
    else:
        samples = [_sweep_task(t) for t in tasks]
    vals = np.array(s.values, dtype=float)
    means = np.array([np.mean(x) for x in samples])
    ses = np.array([np.std(x, ddof=1) / np.sqrt(len(x)) if len(x) > 1 else 0.0 for x in samples])
    slope, slope_se, icpt = loglog_slope(vals, means)
    res = SweepResult(s.axis, s.metric, vals, means, ses, slope, slope_se, icpt)
    if out is not None:
        out = Path(out)
        write_csv(out / "sweep.csv", [s.axis, s.metric, "std_error", "n_samples"], [[int(v), mu, se, len(x)] for v, mu, se, x in zip(s.values, means, ses, samples)])
        write_json(out / "slope.json", res.as_dict())
        atomic_write_text(out / "config.toml", cfg.to_toml())
    return res
