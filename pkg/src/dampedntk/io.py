"""Byte-stable file formats: CSV with shortest round-trip floats, binary
parameter checkpoints with a JSON sidecar, and trajectory export directories.

Every writer goes through :func:`atomic_write_bytes` (write to a temporary
file in the target directory, then rename).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .kernel import GramPair
from .network import NetworkParams, SCHEMES

CHECKPOINT_MAGIC = b"DNTK"
CHECKPOINT_VERSION = 1
# magic, version, m, d, scheme code, has_seed, seed
_HEADER = struct.Struct("<4sIQQBBq")


def fmt(x) -> str:
    """Shortest decimal string that round-trips the 64-bit float."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps_json(obj))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not np.isfinite(v):
            return None if np.isnan(v) else ("inf" if v > 0 else "-inf")
        return v
    return obj


def csv_text(header: Sequence[str] | None, rows: Iterable[Sequence]) -> str:
    lines = [] if header is None else [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header: Sequence[str] | None, rows: Iterable[Sequence]) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def read_csv(path, has_header: bool = True):
    """(header, float array) from a numeric CSV written by :func:`write_csv`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",") if has_header else None
    body = lines[1:] if has_header else lines
    arr = np.array([[float(v) for v in ln.split(",")] for ln in body], dtype=float)
    return header, arr.reshape(len(body), -1)


def write_matrix_csv(path, M) -> Path:
    """First line is the row count, then one matrix row per line."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return atomic_write_text(path, fmt(M.shape[0]) + "\n" + csv_text(None, M))


def read_matrix_csv(path) -> np.ndarray:
    with open(path) as fh:
        n = int(fh.readline())
        rows = [[float(v) for v in ln.split(",")] for ln in fh if ln.strip()]
    M = np.array(rows, dtype=float)
    if M.shape[0] != n:
        raise ValueError(f"{path}: header says {n} rows, found {M.shape[0]}")
    return M


def write_gram_csv(path, g: GramPair) -> Path:
    return write_matrix_csv(path, g.H)


def read_gram_csv(path, t: float = 0.0, kernel_tag: str = "empirical_t") -> GramPair:
    return GramPair.from_H(read_matrix_csv(path), t, kernel_tag)


def write_spectrum_csv(path, lambdas, sigmas=None, labels=None) -> Path:
    """Columns (index, lambda, sigma_model, mode_label); missing model entries are left empty."""
    rows = []
    for i, lam in enumerate(lambdas):
        sig = "" if sigmas is None or i >= len(sigmas) else fmt(sigmas[i])
        lab = "" if labels is None or i >= len(labels) else labels[i]
        rows.append([i, lam, sig, lab])
    return write_csv(path, ["index", "lambda", "sigma_model", "mode_label"], rows)


# -- binary checkpoints --------------------------------------------------


def save_checkpoint(path, net: NetworkParams, meta: dict | None = None) -> tuple[Path, Path]:
    """Little-endian header (m, d, scheme, seed) then the flat parameters as float64, plus ``<path>.json``."""
    has_seed = net.seed is not None
    head = _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, net.m, net.d, SCHEMES.index(net.scheme), int(has_seed), int(net.seed) if has_seed else 0)
    body = np.asarray(net.flat(), dtype="<f8").tobytes()
    p = atomic_write_bytes(path, head + body)
    side = {"m": net.m, "d": net.d, "p": net.p, "scheme": net.scheme, "seed": net.seed, "layout": "a, W (row-major), b, b0", "dtype": "float64-le"}
    side.update(meta or {})
    s = write_json(str(path) + ".json", side)
    return p, s


def load_checkpoint(path) -> NetworkParams:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated checkpoint")
    magic, ver, m, d, scheme, has_seed, seed = _HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC or ver != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a parameter checkpoint")
    theta = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if theta.size != m * d + 2 * m + 1:
        raise ValueError(f"{path}: expected {m * d + 2 * m + 1} parameters, found {theta.size}")
    return NetworkParams.from_flat(theta.astype(float), m, d, SCHEMES[scheme], seed if has_seed else None)


def save_array(path, A) -> Path:
    """Raw float64 array with a small header: ndim then each dimension as uint64."""
    A = np.ascontiguousarray(np.asarray(A, dtype="<f8"))
    head = struct.pack("<Q", A.ndim) + struct.pack(f"<{A.ndim}Q", *A.shape)
    return atomic_write_bytes(path, head + A.tobytes())


def load_array(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (ndim,) = struct.unpack_from("<Q", raw)
    shape = struct.unpack_from(f"<{ndim}Q", raw, 8)
    return np.frombuffer(raw, dtype="<f8", offset=8 + 8 * ndim).reshape(shape).astype(float)


# -- trajectory export -----------------------------------------------------


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def export_trajectory(traj, out_dir) -> dict:
    """times.csv, residuals.csv, test_residuals.csv, xi.csv, gram snapshots and manifest.json.

    Parameter states go to theta_dense.bin / theta_snapshots.bin so verifiers
    can be re-run from disk. Returns the manifest dictionary.
    """
    out = Path(out_dir)
    files = []
    write_csv(out / "times.csv", ["t"], ([t] for t in traj.times))
    files.append("times.csv")
    n = traj.residual_series.shape[1]
    write_csv(out / "residuals.csv", [f"r{i}" for i in range(n)], traj.residual_series)
    files.append("residuals.csv")
    if traj.test_residual_series is not None:
        k = traj.test_residual_series.shape[1]
        write_csv(out / "test_residuals.csv", [f"r{i}" for i in range(k)], traj.test_residual_series)
        files.append("test_residuals.csv")
    write_csv(out / "xi.csv", ["t", "xi", "xi_tilde", "residual_norm"], zip(traj.times, traj.xi_series, traj.xi_tilde_series, traj.residual_norms()))
    files.append("xi.csv")
    grams = []
    for j, (t, g) in enumerate(zip(traj.snapshot_times, traj.gram_snapshots)):
        name = f"gram/gram_{j:03d}.csv"
        write_gram_csv(out / name, g)
        grams.append({"index": j, "t": float(t), "file": name})
        files.append(name)
    save_array(out / "theta_dense.bin", traj.theta_checkpoints)
    save_array(out / "theta_snapshots.bin", traj.snapshot_theta)
    files += ["theta_dense.bin", "theta_snapshots.bin"]
    manifest = {
        "n": int(n),
        "m": traj.net0.m,
        "d": traj.net0.d,
        "scheme": traj.net0.scheme,
        "activation": traj.act.kind,
        "n_dense": int(len(traj.times)),
        "snapshot_times": [float(t) for t in traj.snapshot_times],
        "gram_snapshots": grams,
        "files": {f: sha256_file(out / f) for f in sorted(files)},
    }
    write_json(out / "manifest.json", manifest)
    return manifest
