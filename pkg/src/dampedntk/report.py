"""Markdown report and self-contained SVG line plots for a run directory.

The report is a pure function of the files in the run directory.
"""

from __future__ import annotations

import json
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
import tomli

from .flow import rate_fit
from .io import atomic_write_text, read_csv

REQUIRED = ("manifest.json", "config.toml", "verify.json", "trajectory/times.csv", "trajectory/xi.csv")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


class ReportError(FileNotFoundError):
    def __init__(self, missing):
        super().__init__("missing files: " + ", ".join(missing))
        self.missing = list(missing)


def _f(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def svg_line_plot(series, title: str = "", xlabel: str = "t", ylabel: str = "", logy: bool = False, width: int = 640, height: int = 400, notes=()) -> str:
    """Minimal SVG line chart; ``series`` is a list of (label, x, y)."""
    left, right, top, bottom = 70, 160, 40, 50
    pw, ph = width - left - right, height - top - bottom
    xs = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in series]) if series else np.array([0.0, 1.0])
    ys = []
    for _, _, y in series:
        y = np.asarray(y, dtype=float)
        ys.append(np.log10(np.maximum(y, 1e-300)) if logy else y)
    yall = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    yall = yall[np.isfinite(yall)]
    if logy:
        yall = yall[yall > -300]
    x0, x1 = float(np.min(xs)), float(np.max(xs))
    y0, y1 = (float(np.min(yall)), float(np.max(yall))) if len(yall) else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for tx in _ticks(x0, x1):
        out.append(f'<line x1="{_f(px(tx))}" y1="{top + ph}" x2="{_f(px(tx))}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_f(px(tx))}" y="{top + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{tx:.3g}</text>')
    for ty in _ticks(y0, y1):
        lab = f"1e{ty:.1f}" if logy else f"{ty:.3g}"
        out.append(f'<line x1="{left - 5}" y1="{_f(py(ty))}" x2="{left}" y2="{_f(py(ty))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_f(py(ty) + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{lab}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    ylab = f"{ylabel} (log10)" if logy else ylabel
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylab)}</text>')
    for j, ((label, x, _), y) in enumerate(zip(series, ys)):
        color = PALETTE[j % len(PALETTE)]
        pts = [f"{_f(px(a))},{_f(py(b))}" for a, b in zip(np.asarray(x, dtype=float), y) if np.isfinite(b) and (not logy or b > -300)]
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        ly = top + 14 + 18 * j
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(label)}</text>')
    for j, note in enumerate(notes):
        ly = top + 14 + 18 * (len(series) + 1 + j)
        out.append(f'<text x="{left + pw + 10}" y="{ly}" font-family="sans-serif" font-size="10">{escape(note)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _read_json(path: Path):
    return json.loads(path.read_text())


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "pass" if v else "FAIL"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def report(run_dir, out_dir=None) -> list[Path]:
    """Write report.md plus SVG plots; returns the written paths."""
    run_dir = Path(run_dir)
    missing = [f for f in REQUIRED if not (run_dir / f).exists()]
    if missing:
        raise ReportError(missing)
    out_dir = Path(out_dir) if out_dir is not None else run_dir / "report"
    manifest = _read_json(run_dir / "manifest.json")
    verify = _read_json(run_dir / "verify.json")
    cfg = tomli.loads((run_dir / "config.toml").read_text())
    k_list = cfg.get("verify", {}).get("k_list", [])
    written = []
    md = ["# Run report", "", f"config hash: `{manifest['config_hash']}`", f"version: {manifest['version']}", ""]
    md += ["## Verifiers", "", "| verifier | status |", "|---|---|"]
    for name, ok in sorted(manifest["verifiers"].items()):
        md.append(f"| {name} | {_fmt(bool(ok))} |")
    md.append("")
    ver = verify.get("verifiers", {})
    if "training_identity" in ver:
        ti = ver["training_identity"]
        md += ["## Training-set identity", "", f"max residual / ||r_0||_n: {_fmt(ti['max_relative_residual'])} (tolerance {_fmt(ti['tolerance'])}, G_s source: {ti['gram_source']})"]
        if "quartering_ratio" in ti:
            md.append(f"quartering ratio: {_fmt(ti['quartering_ratio'])}")
        md.append("")
    if "function_identity" in ver:
        fi = ver["function_identity"]
        md += ["## Function-space identity", "", "| mode | relative residual |", "|---|---|"]
        md += [f"| {m} | {_fmt(r)} |" for m, r in zip(fi["modes"], fi["relative_residual"])]
        md.append("")
    if "corollary" in ver:
        md += ["## Per-eigendirection bound margins", "", "| k | lambda_k | min(bound - measured) | status |", "|---|---|---|---|"]
        md += [f"| {r['k']} | {_fmt(r['lambda_k'])} | {_fmt(r['margin'])} | {_fmt(r['passed'])} |" for r in ver["corollary"]["per_k"]]
        md.append("")
    if "xi_envelope" in ver:
        xe = ver["xi_envelope"]
        md += ["## Parameter-norm envelopes", "", f"max xi = {_fmt(xe['xi_max'])}, max xi~ = {_fmt(xe['xi_tilde_max'])}: {_fmt(xe['passed'])}", ""]
    sb = ver.get("spectral_bias")
    if sb:
        md += ["## Spectral bias", "", f"sup_s ||G_ref - G_s||_op = {_fmt(sb['sup_op_deviation'])}", "", "| freq | lambda | fitted rate | rel. error | qualifies | half-energy time |", "|---|---|---|---|---|---|"]
        md += [f"| {r['freq']} | {_fmt(r['lambda'])} | {_fmt(r['fitted_rate'])} | {_fmt(r['relative_error'])} | {_fmt(r['qualifies'])} | {_fmt(r['half_energy_time'])} |" for r in sb["modes"]]
        md.append("")

    proj = run_dir / "projections.csv"
    if k_list and proj.exists():
        header, arr = read_csv(proj)
        series = [(h, arr[:, 0], arr[:, j + 1]) for j, h in enumerate(header[1:])]
        notes = []
        for h, t, y in series:
            try:
                notes.append(f"{h}: rate {rate_fit(t, y).rate:.4g}")
            except ValueError:
                notes.append(f"{h}: no fit")
        p = atomic_write_text(out_dir / "modes.svg", svg_line_plot(series, "Residual projection per eigenspace", "t", "||P r_t||_n", True, notes=notes))
        written.append(p)
        md += ["## Mode decay", "", "![mode decay](modes.svg)", ""]
    dev = run_dir / "deviation.csv"
    if dev.exists():
        _, arr = read_csv(dev)
        p = atomic_write_text(out_dir / "drift.svg", svg_line_plot([("||G_ref - G_t||_op", arr[:, 0], arr[:, 1])], "Kernel deviation", "t", "operator norm"))
        written.append(p)
        md += ["## Kernel deviation", "", "![kernel deviation](drift.svg)", ""]
    _, xi = read_csv(run_dir / "trajectory/xi.csv")
    p = atomic_write_text(out_dir / "residual.svg", svg_line_plot([("||r_t||_n", xi[:, 0], xi[:, 3])], "Training residual", "t", "norm", True))
    written.append(p)
    md += ["## Training residual", "", "![training residual](residual.svg)", ""]
    bmd = run_dir / "bounds.md"
    if bmd.exists():
        md += ["## Constants and hypotheses", "", bmd.read_text()]
    written.insert(0, atomic_write_text(out_dir / "report.md", "\n".join(md) + "\n"))
    return written
