"""Command-line entry point.

Exit codes: 0 success, 2 configuration or usage error, 3 failed
precondition, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .config import ExperimentConfig, load_config, validate
from .errors import ConfigError, KoperError
from .experiments import OUT_DIR_ENV, rerun_from_manifest, run_preset
from .model import EQUILIBRIUM, EQUILIBRIUM_HEADER, KoperParams, classify_equilibrium, equilibrium_row, jacobian

COMMANDS = {
    "simulate": "custom",
    "fig1": "fig1",
    "fig2": "fig2",
    "fig3": "fig3",
    "manifold": "manifold",
    "tracking": "tracking",
}


def _common(p):
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--seed", type=int, help="random seed (>= 0)")
    p.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_DIR_ENV} or ./koper_out)")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None, help="write SVG plots")


def build_parser():
    parser = argparse.ArgumentParser(prog="koper-slow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, preset in COMMANDS.items():
        _common(sub.add_parser(name, help=f"run the {preset} preset"))
    eq = sub.add_parser("analyze-equilibrium", help="trace, determinant and eigenvalues at P")
    eq.add_argument("--eps", type=float, nargs="+", default=[0.01, 0.05, 0.1])
    eq.add_argument("--out", metavar="DIR", help="also write equilibrium.csv here")
    rr = sub.add_parser("rerun", help="repeat a run from its manifest")
    rr.add_argument("manifest")
    rr.add_argument("--out", metavar="DIR")
    return parser


def _config(args) -> ExperimentConfig:
    preset = COMMANDS[args.command]
    if args.config:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if cfg.preset != preset:
            raise ConfigError(f"config preset {cfg.preset!r} does not match command {args.command!r}")
    else:
        cfg = ExperimentConfig(preset=preset)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.plot is not None:
        changes["plot"] = args.plot
    cfg = cfg.with_(**changes)
    validate(cfg)
    return cfg


def _equilibrium(args):
    rows = []
    for eps in args.eps:
        p = KoperParams(eps=eps)
        rows.append(equilibrium_row(eps, classify_equilibrium(jacobian(EQUILIBRIUM, p))))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(EQUILIBRIUM_HEADER)
    w.writerows(rows)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "equilibrium.csv"), "w", newline="") as f:
            cw = csv.writer(f, lineterminator="\n")
            cw.writerow(EQUILIBRIUM_HEADER)
            cw.writerows(rows)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analyze-equilibrium":
            _equilibrium(args)
            return 0
        if args.command == "rerun":
            art = rerun_from_manifest(args.manifest, args.out)
        else:
            art = run_preset(_config(args))
    except KoperError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    summary = {"preset": art.preset, "out_dir": art.out_dir, "files": sorted(art.files),
               "manifest": art.manifest}
    if art.results:
        summary["results"] = art.results
    print(json.dumps(summary, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
