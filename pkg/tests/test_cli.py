import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from dampedntk.cli import main
from dampedntk.config import from_dict, load_config
from dampedntk.recipes import _tree_equal
from dampedntk.report import ReportError, report, svg_line_plot
from dampedntk.runner import LadderError, StageError, half_energy_time, loglog_slope, run, sweep, verify_run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
MINIMAL = CONFIGS / "minimal_circle.toml"


@pytest.fixture(scope="module")
def minimal_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "minimal"
    t0 = time.perf_counter()
    code = main(["run", "--config", str(MINIMAL), "--out", str(out)])
    return out, code, time.perf_counter() - t0


def test_minimal_run_passes_quickly(minimal_run):
    out, code, elapsed = minimal_run
    assert code == 0
    assert elapsed < 60
    import json

    man = json.loads((out / "manifest.json").read_text())
    assert man["verifiers"] and all(man["verifiers"].values())
    for f in ("config.toml", "spectrum.csv", "gram_ref.csv", "theta0.bin", "trajectory/xi.csv", "verify.json", "bounds.md"):
        assert f in man["files"]


def test_rerun_is_byte_identical(minimal_run, tmp_path):
    out, _, _ = minimal_run
    again = tmp_path / "again"
    assert main(["run", "--config", str(MINIMAL), "--out", str(again)]) == 0
    assert _tree_equal(out, again) == []


def test_seed_override_changes_outputs(minimal_run, tmp_path):
    out, _, _ = minimal_run
    other = tmp_path / "other"
    assert main(["run", "--config", str(MINIMAL), "--out", str(other), "--seed-override", "5"]) == 0
    assert (out / "trajectory/residuals.csv").read_bytes() != (other / "trajectory/residuals.csv").read_bytes()


def test_verify_subcommand(minimal_run, tmp_path):
    out, _, _ = minimal_run
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    assert main(["verify", str(copy)]) == 0


def test_verify_detects_tampering(minimal_run, tmp_path):
    out, _, _ = minimal_run
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    from dampedntk.io import load_array, save_array

    theta = load_array(copy / "trajectory/theta_dense.bin")
    theta[len(theta) // 2] += 0.05
    save_array(copy / "trajectory/theta_dense.bin", theta)
    man, _ = verify_run(copy)
    assert not man.passed


def test_report_outputs_and_determinism(minimal_run, tmp_path):
    out, _, _ = minimal_run
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["report", str(out), "--out", str(a)]) == 0
    report(out, b)
    assert _tree_equal(a, b) == []
    assert {p.name for p in a.iterdir()} == {"report.md", "modes.svg", "drift.svg", "residual.svg"}
    svg = (a / "modes.svg").read_text()
    # one curve per target eigenspace (frequencies 1, 2, 3), each with a fitted rate
    assert svg.count("<polyline") == 3
    assert svg.count("rate ") == 3
    assert svg.startswith("<svg") and "http" not in svg.replace("http://www.w3.org/2000/svg", "")


def test_report_without_mode_plots(tmp_path):
    cfg = load_config(MINIMAL)
    raw = cfg.to_dict()
    raw["verify"]["k_list"] = []
    raw["verify"]["function_identity"] = False
    raw["solver"]["T"] = 0.5
    out = tmp_path / "run"
    run(from_dict(raw), out)
    written = report(out)
    assert "modes.svg" not in {p.name for p in written}
    assert "| verifier | status |" in (out / "report" / "report.md").read_text()


def test_report_lists_missing_files(tmp_path):
    (tmp_path / "manifest.json").write_text("{}")
    with pytest.raises(ReportError) as exc:
        report(tmp_path)
    assert "config.toml" in exc.value.missing and "manifest.json" not in exc.value.missing
    assert main(["report", str(tmp_path)]) == 2


def test_svg_plot_is_deterministic():
    s = [("a", [0, 1, 2], [1.0, 0.5, 0.25])]
    assert svg_line_plot(s, logy=True) == svg_line_plot(s, logy=True)


def test_odd_width_doubling_config_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[network]\nm = 7\nscheme = "doubling"\n')
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "network.m" in capsys.readouterr().err


def test_usage_errors_exit_two(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert main(["run", "--out", str(tmp_path)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == 2


def test_bounds_subcommand(tmp_path, capsys):
    assert main(["bounds", "--config", str(MINIMAL), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "bounds.json").exists()
    assert "| D |" in capsys.readouterr().out


def test_short_ladder_rejected(tmp_path):
    cfg = tmp_path / "s.toml"
    cfg.write_text('[network]\nactivation = "erf"\n[kernel]\nmethod = "closed_form"\n[sweep]\nvalues = [64, 256]\n')
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_constant_metric_has_zero_slope():
    slope, se, _ = loglog_slope([1, 2, 4, 8], [3.0, 3.0, 3.0, 3.0])
    assert abs(slope) <= 1e-12 and se <= 1e-12
    with pytest.raises(LadderError):
        loglog_slope([1, 2], [1.0, 2.0])


def test_width_sweep(tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(CONFIGS / "width_sweep.toml"), "--out", str(out)]) == 0
    assert (out / "sweep.csv").exists() and (out / "slope.json").exists()
    import json

    slope = json.loads((out / "slope.json").read_text())["slope"]
    assert -0.8 <= slope <= -0.2


def test_sweep_parallel_matches_serial(tmp_path):
    cfg = load_config(CONFIGS / "width_sweep.toml")
    a = sweep(cfg, tmp_path / "a", jobs=1)
    b = sweep(cfg, tmp_path / "b", jobs=2)
    assert np.array_equal(a.means, b.means)
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_recipe_from_cli(tmp_path, capsys):
    assert main(["run", "--recipe", "c12", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("[PASS] c12")


def test_stage_errors_carry_stage_label():
    cfg = from_dict({"network": {"m": 4}, "data": {"n": 3}, "solver": {"T": 0.1, "n_dense": 3}, "kernel": {"n_seeds": 2}, "verify": {"k_list": [1]}})
    from dampedntk import runner

    orig = runner.integrate_flow

    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    runner.integrate_flow = boom
    try:
        with pytest.raises(StageError) as exc:
            runner.execute(cfg)
        assert exc.value.stage == "flow"
    finally:
        runner.integrate_flow = orig


def test_half_energy_time():
    t = np.linspace(0, 4, 41)
    assert half_energy_time(t, np.exp(-t)) == pytest.approx(np.log(2), abs=1e-3)
    assert half_energy_time(t, np.ones_like(t)) == np.inf
