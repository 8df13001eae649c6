"""Command-line front end: ``withinbias sim1 | sim2 | toy-check``."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from .core import BEYOND_WINDOW, exit_panel, s1_view
from .diagnostics import fe_bias_decomposition
from .estimation import RankDeficientError, RegressionSpec, fit, within_demean, within_time
from .montecarlo import ReplicationError, outcomes_for, percentile, run_mc
from .report import emit_outputs, emit_plot_scripts, write_figure_map
from .sim1 import hazard
from .sim2 import applications, callback_prob

log = logging.getLogger("withinbias")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, kind: str) -> None:
    g = p.add_argument_group("run")
    g.add_argument("--seed", type=int, help=f"base seed (default: {cfg.DEFAULT_SEED})")
    g.add_argument("--n", type=int, help="spells per replication (default: 2000)")
    g.add_argument("--k", type=int, help=f"Monte Carlo replications (default: {cfg.DEFAULT_K})")
    g.add_argument("--tau-bar", dest="tau_bar", type=int, help="censoring duration (default: 15)")
    g.add_argument("--workers", type=int, help="worker processes (default: 1)")
    g.add_argument("--out-dir", dest="out_dir",
                   help=f"output directory (default: ${cfg.OUT_DIR_ENV} or {cfg.DEFAULT_OUT_DIR})")
    g.add_argument("--config", type=Path, help="INI file with a [scenario] section")
    g.add_argument("--forms", type=_str_list, help="duration forms, comma separated (default: linear,saturated)")
    g.add_argument("--controls", type=_str_list,
                   help="controls, comma separated (default: none,true_alpha,fixed_effects)")
    g.add_argument("--emit-plots", dest="emit_plots", action="store_const", const=True,
                   help="also render PNG figures with matplotlib")
    c = p.add_argument_group("calibration")
    if kind == "sim1":
        c.add_argument("--gamma", type=float, action="append",
                       help="hazard slope, repeatable; one run per value (default: 0.05, 0, -0.02)")
        defaults = cfg.SIM1_PARAMS
    else:
        c.add_argument("--proxy-sd", dest="proxy_sd", type=float, action="append",
                       help="noisy heterogeneity proxy sd, repeatable (default: none)")
        defaults = cfg.SIM2_PARAMS
    for name, default in defaults.items():
        c.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float, help=f"(default: {default:g})")


def _str_list(raw: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in raw.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="withinbias", description="Within-estimation duration bias simulations.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("sim1", help="exit-indicator simulation"), "sim1")
    _common(sub.add_parser("sim2", help="job search simulation"), "sim2")
    sub.add_parser("toy-check", help="run the hand-computed oracle examples")
    return p


def parse_cli(argv) -> cfg.ScenarioFile:
    """Parse a sim1/sim2 command line into a resolved scenario."""
    args = build_parser().parse_args(argv)
    if args.command not in ("sim1", "sim2"):
        raise UsageError(f"{args.command} takes no scenario")
    return _resolve(args)


def _resolve(args) -> cfg.ScenarioFile:
    file_values = cfg.read_config_text(args.config.read_text()) if args.config else {}
    keys = {"seed", "n", "k", "tau_bar", "workers", "out_dir", "forms", "controls", "emit_plots"}
    keys |= set(cfg.SIM1_PARAMS if args.command == "sim1" else cfg.SIM2_PARAMS)
    keys.add("gamma" if args.command == "sim1" else "proxy_sd")
    flags = {k: getattr(args, k) for k in keys}
    for k in ("gamma", "proxy_sd"):
        if flags.get(k) is not None:
            flags[k] = tuple(flags[k])
    if flags["out_dir"] is None and os.environ.get(cfg.OUT_DIR_ENV):
        flags["out_dir"] = os.environ[cfg.OUT_DIR_ENV]
    return cfg.resolve(args.command, file_values, flags)


def run_scenarios(sf: cfg.ScenarioFile) -> list[Path]:
    """Run every scenario of a resolved config and write all outputs."""
    root = Path(sf.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "resolved_config").write_text(cfg.dump_scenario(sf))
    csvs: list[Path] = []
    for label, mc in sf.mc_configs():
        out = root / label if label else root
        log.info("scenario %s: k=%d n=%d", label or sf.kind, mc.k, mc.scenario.n)
        summary = run_mc(mc, workers=sf.workers)
        comment = f"seed={sf.seed} scenario={sf.kind}" + (f" {label}" if label else "")
        csvs.extend(emit_outputs(summary, out, comment))
        outcomes = outcomes_for(mc.scenario)
        proxies = [f"OLS+proxy({s:g})" for s in mc.proxy_sds]
        if _has_fe_saturated(mc.specs):
            emit_plot_scripts(out, sf.kind, outcomes, proxies)
        if sf.emit_plots:
            from .plotting import render_figures
            render_figures(summary, out, sf.kind, outcomes, mc.proxy_sds)
    write_figure_map(root, [p.relative_to(root) for p in csvs], sf.kind)
    return csvs


def _has_fe_saturated(specs) -> bool:
    return any(s.duration_form == "saturated" and s.control == "fixed_effects" for s in specs)


# toy oracles --------------------------------------------------------------

def _toy_panel():
    y = np.array([[0, 0, 0], [0, 1, 0]])
    return exit_panel(alpha=[0.0, 0.0], tau=[BEYOND_WINDOW, 2], hazard=np.full((2, 3), 0.1), y=y, tau_bar=3)


def toy_checks() -> list[tuple[str, bool, str]]:
    """Hand-computed oracle examples as (name, passed, detail)."""
    checks = []

    def add(name, value, expected, tol=1e-10):
        ok = bool(np.all(np.abs(np.asarray(value, float) - np.asarray(expected, float)) <= tol))
        checks.append((name, ok, f"got {np.round(value, 12).tolist()} expected {np.round(expected, 12).tolist()}"))

    toy = _toy_panel()
    add("toy FE linear slope = 0.2", fit(toy, RegressionSpec("exit_y", "linear", "fixed_effects")).slope, 0.2)
    add("toy pooled OLS slope = 1/14", fit(toy, RegressionSpec("exit_y", "linear", "none")).slope, 1 / 14)
    num, den = fe_bias_decomposition(toy, "exit_y")
    add("toy bias ratio = 0.2", num / den, 0.2)
    add("within time T=3", within_time(3), [-1, 0, 1], 0)
    add("within time sums to 0 for T=1..15", max(abs(within_time(T).sum()) for T in range(1, 16)), 0, 0)
    add("weighted demeaning of (A,C)=(2,1),(2,0)",
        within_demean(np.array([0.5, 0.0]), np.array([0, 0]), np.array([2.0, 2.0])), [0.25, -0.25])
    add("hazard(alpha=2, gamma=0, t=1)", hazard(2.0, 1, 0.0), 0.119202922, 1e-9)
    add("hazard(alpha=2, gamma=0.05, t=15)", hazard(2.0, 15, 0.05), 1 / (1 + math.exp(2.7)), 1e-12)
    add("applications(7, 15, 0, -0.2) = 4", applications(7, 15, 0, -0.2), 4, 0)
    add("callback prob at alpha=10.5, t=1 = 0.05", callback_prob(10.5, 1), 0.05)
    n_rows = sum(1 for _ in s1_view(exit_panel([0, 0, 0], [1, BEYOND_WINDOW, 4], np.zeros((3, 15)),
                                                np.zeros((3, 15), int), 15)))
    add("S1 rows for T = {1, 15, 4}", n_rows, 20, 0)
    add("nearest-rank p90 of 1..100", percentile(np.arange(1, 101), 90), 90, 0)
    add("nearest-rank p5 of 1..10", percentile(np.arange(1, 11), 5), 1, 0)
    return checks


def _toy_check() -> int:
    failed = 0
    for name, ok, detail in toy_checks():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += not ok
    return EXIT_OK if not failed else EXIT_RUNTIME


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "toy-check":
        return _toy_check()
    try:
        sf = _resolve(args)
    except (cfg.ConfigError, OSError, ValueError) as exc:
        print(f"withinbias: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        run_scenarios(sf)
    except (ReplicationError, RankDeficientError, OSError, RuntimeError, ValueError) as exc:
        print(f"withinbias: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"outputs written to {sf.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
