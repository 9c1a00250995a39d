"""Experiment configuration: TOML files, validation with key paths, hashing."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import tomli

from .activation import KINDS
from .data import parse_mode_label
from .flow import METHODS
from .network import FAMILIES, SCHEMES

DATA_KINDS = ("uniform_circle", "uniform_sphere", "file")
TARGET_KINDS = ("bandlimited", "file", "none")
KERNEL_METHODS = ("auto", "mc", "closed_form")
REFERENCES = ("analytic", "initial")
GRAM_SOURCES = ("dense", "snapshots")
SWEEP_AXES = ("m", "n")
SWEEP_METRICS = ("kernel_convergence", "kernel_drift", "bottom_participation")


class ConfigError(ValueError):
    """Validation failure; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class NetworkSection:
    m: int = 128
    activation: str = "tanh"
    scheme: str = "iid"
    family: str = "gaussian"


@dataclass(frozen=True)
class DataSection:
    kind: str = "uniform_circle"
    n: int = 64
    d: int = 2
    path: str = ""
    equispaced: bool = False


@dataclass(frozen=True)
class TargetSection:
    kind: str = "bandlimited"
    modes: tuple = ("cos1",)
    coefs: tuple = (1.0,)
    path: str = ""


@dataclass(frozen=True)
class SolverSection:
    method: str = "dopri45"
    T: float = 2.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    step: float = 0.01
    n_dense: int = 129
    n_snapshots: int = 8


@dataclass(frozen=True)
class KernelSection:
    n_seeds: int = 256
    method: str = "auto"
    reference: str = "analytic"
    n_modes: int = 11
    profile_quad: int = 1024


@dataclass(frozen=True)
class VerifySection:
    training_identity: bool = True
    gram_source: str = "dense"
    identity_tol: float = 1e-4
    quartering: bool = False
    function_identity: bool = True
    function_tol: float = 1e-3
    n_quad: int = 512
    corollary: bool = True
    xi_envelope: bool = True
    residual_weighted: bool = True
    spectral_bias: bool = False
    rate_tol: float = 0.15
    rate_threshold: float = 10.0
    positivity: bool = True
    k_list: tuple = tuple(range(1, 11))
    n_eval: int = 512
    n_eval_sphere: int = 1024


@dataclass(frozen=True)
class BoundsSection:
    delta: float = 0.1
    eps: float = 0.1
    Gamma: float = 2.0
    k: int = 1
    subgaussian_K: float = 1.0
    A: float = 1.0
    B: float = 1.0


@dataclass(frozen=True)
class SweepSection:
    axis: str = "m"
    values: tuple = ()
    metric: str = "kernel_convergence"
    n_seeds: int = 256
    grid: int = 20
    t: float = 2.0
    k: int = 11


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    out: str = "runs/default"
    network: NetworkSection = field(default_factory=NetworkSection)
    data: DataSection = field(default_factory=DataSection)
    target: TargetSection = field(default_factory=TargetSection)
    solver: SolverSection = field(default_factory=SolverSection)
    kernel: KernelSection = field(default_factory=KernelSection)
    verify: VerifySection = field(default_factory=VerifySection)
    bounds: BoundsSection = field(default_factory=BoundsSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    base_dir: str = field(default=".", compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return _listify(d)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form; ignores key order and the output directory."""
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def with_out(self, out) -> "ExperimentConfig":
        return replace(self, out=str(out))

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_toml(self) -> str:
        d = self.to_dict()
        lines = [f"seed = {_toml_value(d.pop('seed'))}", f"out = {_toml_value(d.pop('out'))}"]
        for sec, body in d.items():
            lines.append("")
            lines.append(f"[{sec}]")
            for k, v in body.items():
                lines.append(f"{k} = {_toml_value(v)}")
        return "\n".join(lines) + "\n"


SECTIONS = {
    "network": NetworkSection,
    "data": DataSection,
    "target": TargetSection,
    "solver": SolverSection,
    "kernel": KernelSection,
    "verify": VerifySection,
    "bounds": BoundsSection,
    "sweep": SweepSection,
}


def _listify(obj):
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_listify(v) for v in obj]
    return obj


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return str(v)


def _coerce(key: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(key, f"expected an array, got {value!r}")
        return tuple(value)
    return value


def from_dict(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    top = {}
    for key in ("seed", "out"):
        if key in raw:
            top[key] = _coerce(key, raw.pop(key), getattr(ExperimentConfig, key) if key != "out" else "")
    sections = {}
    for name, cls in SECTIONS.items():
        body = raw.pop(name, {})
        if not isinstance(body, dict):
            raise ConfigError(name, "expected a table")
        defaults = cls()
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for k, v in body.items():
            if k not in known:
                raise ConfigError(f"{name}.{k}", "unknown key")
            kwargs[k] = _coerce(f"{name}.{k}", v, getattr(defaults, k))
        if name == "verify" and "k_list" not in kwargs:
            # default to the top ten directions, or all of them on small datasets
            n = sections["data"].n
            kwargs["k_list"] = tuple(range(1, min(10, n) + 1)) if isinstance(n, int) and n >= 1 else ()
        sections[name] = cls(**kwargs)
    if raw:
        k = sorted(raw)[0]
        raise ConfigError(k, "unknown key")
    cfg = ExperimentConfig(**top, **sections, base_dir=str(base_dir))
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("<file>", f"config file {path} not found")
    try:
        raw = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"{path}: {exc}") from exc
    return from_dict(raw, str(path.parent))


def loads_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("<text>", str(exc)) from exc
    return from_dict(raw, base_dir)


def _choice(key, value, options):
    if value not in options:
        raise ConfigError(key, f"{value!r} is not one of {list(options)}")


def _positive(key, value):
    if not value > 0:
        raise ConfigError(key, f"must be positive, got {value!r}")


def validate(cfg: ExperimentConfig) -> None:
    net, data, tgt, sol = cfg.network, cfg.data, cfg.target, cfg.solver
    _positive("network.m", net.m)
    _choice("network.activation", net.activation, KINDS)
    _choice("network.scheme", net.scheme, SCHEMES)
    _choice("network.family", net.family, FAMILIES)
    if net.scheme == "doubling" and net.m % 2:
        raise ConfigError("network.m", f"must be even when network.scheme = 'doubling', got {net.m}")
    _choice("data.kind", data.kind, DATA_KINDS)
    _positive("data.n", data.n)
    _positive("data.d", data.d)
    if data.kind == "uniform_circle" and data.d != 2:
        raise ConfigError("data.d", "uniform_circle needs d = 2")
    if data.kind == "file":
        if not data.path:
            raise ConfigError("data.path", "required when data.kind = 'file'")
        if not cfg.resolve(data.path).exists():
            raise ConfigError("data.path", f"file {data.path} does not exist")
    _choice("target.kind", tgt.kind, TARGET_KINDS)
    if tgt.kind == "bandlimited":
        if data.d != 2:
            raise ConfigError("target.kind", "bandlimited targets need circle data (d = 2)")
        if len(tgt.modes) != len(tgt.coefs):
            raise ConfigError("target.coefs", "must have one coefficient per mode")
        for i, lab in enumerate(tgt.modes):
            try:
                parse_mode_label(lab)
            except ValueError as exc:
                raise ConfigError(f"target.modes[{i}]", str(exc)) from exc
    if tgt.kind == "file":
        if not tgt.path:
            raise ConfigError("target.path", "required when target.kind = 'file'")
        if not cfg.resolve(tgt.path).exists():
            raise ConfigError("target.path", f"file {tgt.path} does not exist")
    if tgt.kind == "none" and data.kind != "file":
        raise ConfigError("target.kind", "'none' only works with labelled file data")
    _choice("solver.method", sol.method, METHODS)
    for k in ("T", "rel_tol", "abs_tol", "step"):
        _positive(f"solver.{k}", getattr(sol, k))
    if sol.n_dense < 3:
        raise ConfigError("solver.n_dense", "need at least 3 dense times")
    if sol.n_snapshots < 2:
        raise ConfigError("solver.n_snapshots", "need at least 2 snapshots")
    _choice("kernel.method", cfg.kernel.method, KERNEL_METHODS)
    _choice("kernel.reference", cfg.kernel.reference, REFERENCES)
    if cfg.kernel.n_seeds < 2:
        raise ConfigError("kernel.n_seeds", "need at least 2 seeds")
    if cfg.kernel.method == "closed_form" and not (net.activation == "erf" and net.family == "gaussian"):
        raise ConfigError("kernel.method", "closed_form needs activation 'erf' with gaussian init")
    v = cfg.verify
    _choice("verify.gram_source", v.gram_source, GRAM_SOURCES)
    if v.training_identity and sol.n_dense % 2 == 0:
        raise ConfigError("solver.n_dense", "Simpson quadrature needs an odd dense count")
    for i, k in enumerate(v.k_list):
        if not isinstance(k, int) or not 1 <= k <= data.n:
            raise ConfigError(f"verify.k_list[{i}]", f"must be an integer in [1, {data.n}]")
    b = cfg.bounds
    for k in ("delta", "eps"):
        val = getattr(b, k)
        if not 0 < val < 1:
            raise ConfigError(f"bounds.{k}", "must lie in (0, 1)")
    if not b.Gamma > 1:
        raise ConfigError("bounds.Gamma", "must exceed 1")
    s = cfg.sweep
    _choice("sweep.axis", s.axis, SWEEP_AXES)
    _choice("sweep.metric", s.metric, SWEEP_METRICS)
    for i, val in enumerate(s.values):
        if not isinstance(val, int) or val < 1:
            raise ConfigError(f"sweep.values[{i}]", "must be a positive integer")
        if s.axis == "m" and net.scheme == "doubling" and val % 2:
            raise ConfigError(f"sweep.values[{i}]", "must be even when network.scheme = 'doubling'")
