"""Command-line entry point: ``digsta <experiment> [--config FILE] [flags]``.

Every field of :class:`~digsta.config.ExperimentConfig` is also a flag of the
same name (``--M-list``, ``--R-grid``, ``--refine/--no-refine`` ...).  Exit
codes: 0 success, 2 configuration or data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from typing import Optional, Sequence

import numpy as np

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config
from .experiments import COMMANDS
from .models import ModelDataError
from .plotting import PLOT_KINDS, PlotInputError, emit_plot
from .qcore import DegenerateStateError
from .sim import StepFailure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("digsta")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with [common] and per-experiment sections")
    group = p.add_argument_group("overrides")
    for f in fields(ExperimentConfig):
        if f.name == "experiment":
            continue
        if f.type == "bool":
            group.add_argument(_flag(f.name), dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            group.add_argument(_flag(f.name), dest=f.name, default=None, metavar=f.name.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="digsta", description="Digitized shortcut-to-adiabaticity experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _add_config_flags(sub.add_parser(name, help=f"run the {name} experiment"))
    plot = sub.add_parser("plot", help="render an SVG from an output CSV")
    plot.add_argument("csv")
    plot.add_argument("--kind", required=True, choices=sorted(PLOT_KINDS))
    plot.add_argument("--svg", help="output path (default: next to the CSV)")
    plot.add_argument("--title")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {f.name: getattr(args, f.name) for f in fields(ExperimentConfig) if f.name != "experiment"}


def report(summary: dict) -> str:
    """Short human-readable digest of a driver summary."""
    lines = [f"experiment: {summary['experiment']}"]
    if "target_energy" in summary:
        lines.append(f"target energy: {summary['target_energy']:.6f}")
    for run in summary.get("runs", []):
        head = f"kx0={run['kx0']:+g} {run['branch']} " if "kx0" in run else ""
        lines.append(f"{head}M={run['M']}: F={run['final_F']:.6f} E={run['final_E']:.6f}")
    for pt in summary.get("points", []):
        x = pt.get("R", pt.get("kx_a"))
        flag = f"  [{pt['flag']}]" if "flag" in pt else ""
        lines.append(
            f"{x:+.4f}: E0={pt['ground']['E']:.6f} F0={pt['ground']['F']:.4f} "
            f"E1={pt['excited']['E']:.6f} F1={pt['excited']['F']:.4f}{flag}"
        )
    for pt in summary.get("curve", []):
        lines.append(f"M={pt['M']}: F={pt['F_final']:.6f}")
    if "M_star" in summary:
        m_star = summary["M_star"]
        lines.append(f"M* (F >= {summary['threshold']}): "
                     + (str(m_star) if m_star is not None else f"not reached for M <= {summary['M_max']}"))
    return "\n".join(lines)


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            print(emit_plot(args.csv, args.kind, args.svg, args.title))
            return EXIT_OK
        cfg: ExperimentConfig = load_config(args.command, args.config, _overrides(args))
        summary = COMMANDS[args.command](cfg, True)
    except (ConfigError, ModelDataError, PlotInputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepFailure, DegenerateStateError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(report(summary))
    log.info("outputs written to %s", cfg.out)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
