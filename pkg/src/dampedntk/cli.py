"""Command-line entry point: run, sweep, report, verify, bounds.

Exit codes: 0 all checks pass, 1 a verification failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .deviations import MissingEstimateError, bound_report_markdown
from .io import atomic_write_text, write_json
from .recipes import RECIPES, recipe_config, run_recipe
from .report import ReportError, report
from .runner import LadderError, StageError, bounds_only, run, sweep, verify_run

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dampedntk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, recipe=True):
        sp.add_argument("--config", type=Path, help="experiment config (TOML)")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--seed-override", type=int, default=None, help="replace the config seed")
        if recipe:
            sp.add_argument("--recipe", choices=sorted(RECIPES, key=lambda r: int(r[1:])), help="pinned acceptance recipe")

    sp = sub.add_parser("run", help="run one experiment or a pinned recipe")
    common(sp)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweep recipes")
    sp = sub.add_parser("sweep", help="width or sample-size ladder with log-log slope fit")
    common(sp)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp = sub.add_parser("report", help="Markdown + SVG report for a run directory")
    sp.add_argument("run_dir", type=Path)
    sp.add_argument("--out", type=Path, help="report directory (default <run_dir>/report)")
    sp = sub.add_parser("verify", help="re-run verifiers on an existing run directory")
    sp.add_argument("run_dir", type=Path)
    sp = sub.add_parser("bounds", help="constants and width/sample hypotheses only")
    common(sp)
    return p


def _config(args):
    if args.config is None:
        if getattr(args, "recipe", None):
            return recipe_config(args.recipe, args.seed_override)
        raise ConfigError("--config", "a config file or --recipe is required")
    cfg = load_config(args.config)
    return cfg if args.seed_override is None else cfg.with_seed(args.seed_override)


def _print_verifiers(man) -> None:
    for name, ok in sorted(man.verifiers.items()):
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")


def cmd_run(args) -> int:
    if args.recipe and args.config is None:
        res = run_recipe(args.recipe, args.out, args.seed_override, args.jobs)
        print(res.line())
        return EXIT_OK if res.passed else EXIT_FAIL
    cfg = _config(args)
    man, _ = run(cfg, args.out)
    _print_verifiers(man)
    print(f"config hash {man.config_hash}")
    return EXIT_OK if man.passed else EXIT_FAIL


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = args.out if args.out is not None else cfg.resolve(cfg.out)
    res = sweep(cfg, out, args.jobs)
    for v, mu, se in zip(res.values, res.means, res.std_errors):
        print(f"{res.axis}={int(v)} {res.metric}={mu:.6g} +- {se:.2g}")
    print(f"slope {res.slope:.4f} +- {res.slope_stderr:.4f}")
    return EXIT_OK


def cmd_report(args) -> int:
    for p in report(args.run_dir, args.out):
        print(p)
    return EXIT_OK


def cmd_verify(args) -> int:
    man, _ = verify_run(args.run_dir)
    _print_verifiers(man)
    return EXIT_OK if man.passed else EXIT_FAIL


def cmd_bounds(args) -> int:
    cfg = _config(args)
    rep = bounds_only(cfg)
    text = bound_report_markdown(rep)
    if args.out is not None:
        write_json(args.out / "bounds.json", rep.as_dict())
        atomic_write_text(args.out / "bounds.md", text)
    print(text, end="")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "report": cmd_report, "verify": cmd_verify, "bounds": cmd_bounds}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, LadderError, MissingEstimateError, ReportError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        if isinstance(exc.__cause__, (ConfigError, FileNotFoundError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        raise


if __name__ == "__main__":
    sys.exit(main())
