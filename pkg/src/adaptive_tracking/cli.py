"""Command-line entry point: ``run``, ``verify``, ``list-scenarios``, ``print-config``.

Exit status: 0 on success, 1 on a configuration or output error, 2 when a
run diverged (``run``) or a property failed (``verify``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import config as config_mod
from .config import ConfigError, ExperimentConfig
from .harness import SCENARIO_NAMES, SCHEMA_VERSION, RunRecord, run_mode, scenario_by_name
from .metrics import metrics_for_record
from .properties import verify_properties
from .results import run_log_name, summary_row, write_plot_data, write_run_log, write_summary

OUTPUT_ENV = "ADAPTIVE_TRACKING_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILED = 2


def _run_job(job: Tuple[ExperimentConfig, str, str]) -> RunRecord:
    cfg, scenario_name, mode = job
    sc = scenario_by_name(scenario_name, cfg.seed, cfg.harness)
    return run_mode(sc, mode, cfg.plant, cfg.planner, cfg.estimator,
                    cfg.harness.divergence_bound)


def run_all(cfg: ExperimentConfig, scenarios: Optional[Sequence[str]] = None,
            modes: Optional[Sequence[str]] = None) -> Dict[str, Dict[str, RunRecord]]:
    """Run every (scenario, mode) pair; results are keyed in configuration order."""
    scenarios = tuple(scenarios or cfg.scenarios)
    modes = tuple(modes or cfg.modes)
    jobs = [(cfg, s, m) for s in scenarios for m in modes]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_job, jobs))
    else:
        records = [_run_job(j) for j in jobs]
    out: Dict[str, Dict[str, RunRecord]] = {s: {} for s in scenarios}
    for (_, s, m), rec in zip(jobs, records):
        out[s][m] = rec
    return out


def summary_header(cfg: ExperimentConfig) -> List[str]:
    lines = [f"schema_version={SCHEMA_VERSION}"]
    lines += [f"{k}={json.dumps(v)}" for k, v in config_mod.flatten(cfg)]
    return lines


def _load_config(args) -> ExperimentConfig:
    cfg = config_mod.load(args.config) if args.config else config_mod.default_config()
    overrides = list(args.set or [])
    env_dir = os.environ.get(OUTPUT_ENV)
    if env_dir:
        overrides.append(f"output_dir={json.dumps(env_dir)}")
    if getattr(args, "output_dir", None):
        overrides.append(f"output_dir={json.dumps(args.output_dir)}")
    if getattr(args, "scenario", None):
        overrides.append(f"scenarios={json.dumps(args.scenario)}")
    if getattr(args, "modes", None):
        modes = [m.strip() for m in args.modes.split(",") if m.strip()]
        overrides.append(f"modes={json.dumps(modes)}")
    if getattr(args, "workers", None) is not None:
        overrides.append(f"workers={args.workers}")
    if getattr(args, "no_plot_data", False):
        overrides.append("emit_plot_data=false")
    return config_mod.apply_overrides(cfg, overrides)


def _prepare_output(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def cmd_run(args) -> int:
    if args.list_scenarios:
        return cmd_list_scenarios(args)
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = _prepare_output(cfg.output_dir)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    for line in summary_header(cfg):
        print(f"# {line}")
    records = run_all(cfg)
    rows = []
    diverged = False
    for scenario, by_mode in records.items():
        for mode, rec in by_mode.items():
            write_run_log(rec, out / run_log_name(scenario, mode))
            report = metrics_for_record(rec)
            rows.append(summary_row(rec, report))
            diverged |= rec.diverged
            print(f"{scenario:>13} {mode:>8}  t_r={report.t_r}  d_m={report.d_m:.4f}  "
                  f"t_re={report.t_re}  e_rmser={report.e_rmser}"
                  + ("  DIVERGED" if rec.diverged else ""))
        if cfg.emit_plot_data:
            write_plot_data(scenario, by_mode, out)
    write_summary(rows, out / "summary.csv", summary_header(cfg))
    print(f"wrote {len(rows)} run logs and summary.csv to {out}")
    return EXIT_FAILED if diverged else EXIT_OK


def cmd_verify(args) -> int:
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    records = run_all(cfg, SCENARIO_NAMES, ("mpc", "an_small", "an_large", "van"))
    results = verify_properties(records)
    for r in results:
        print(r.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} properties passed")
    return EXIT_OK if passed == len(results) else EXIT_FAILED


def cmd_list_scenarios(args) -> int:
    for name in SCENARIO_NAMES:
        print(name)
    return EXIT_OK


def cmd_print_config(args) -> int:
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(config_mod.dumps(cfg))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adaptive-tracking",
                                description="Adaptive MPC trajectory-tracking simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_config_args(sp):
        sp.add_argument("--config", help="JSON experiment configuration file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config entry, e.g. planner.horizon=15 (repeatable)")

    run = sub.add_parser("run", help="run scenarios and write CSV results")
    add_config_args(run)
    run.add_argument("--scenario", action="append",
                     help="scenario to run (repeatable; default: the configured list)")
    run.add_argument("--modes", help="comma-separated planner modes")
    run.add_argument("--output-dir", help=f"output directory (overrides ${OUTPUT_ENV})")
    run.add_argument("--workers", type=int, help="parallel worker processes")
    run.add_argument("--no-plot-data", action="store_true", help="skip plot-data CSVs")
    run.add_argument("--list-scenarios", action="store_true", help="list scenarios and exit")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run the full suite and check closed-loop properties")
    add_config_args(ver)
    ver.add_argument("--workers", type=int, help="parallel worker processes")
    ver.set_defaults(func=cmd_verify)

    ls = sub.add_parser("list-scenarios", help="print the built-in scenario names")
    ls.set_defaults(func=cmd_list_scenarios)

    pc = sub.add_parser("print-config", help="print the effective configuration as JSON")
    add_config_args(pc)
    pc.set_defaults(func=cmd_print_config)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
