"""Command-line entry point: hmspectral <command> [options]."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import ConfigError
from .quadrature import SampledField, make_grid
from .basis import Geometry, build_basis
from .yudovich import GrowthFunction, osgood_test, phi_theta, uniqueness_summary

COMMANDS = ("run", "converge-n", "eps-sweep", "delta-sweep", "twin", "osgood", "cz", "basis-table")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="INI configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [run] out)")
    common.add_argument("--seed", type=int, help="seed (overrides [run] seed)")
    common.add_argument("--threads", type=int, default=1, help="parallel sweep members")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config key (repeatable)")
    p = argparse.ArgumentParser(prog="hmspectral", description=__doc__,
                                epilog=ex.config_help(),
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "run": "integrate one configuration",
        "converge-n": "self-convergence over [sweep] n_list",
        "eps-sweep": "Cauchy distances over [sweep] eps_list",
        "delta-sweep": "density regularization trends over [sweep] delta_list",
        "twin": "twin-run stability against [twin] scales",
        "osgood": "Phi_theta, Osgood verdict and Yudovich membership",
        "cz": "W^{2,p} growth study over random fields",
        "basis-table": "CSV of the canonical basis",
    }
    cmds = {}
    for name in COMMANDS:
        cmds[name] = sub.add_parser(name, parents=[common], help=helps[name],
                                    epilog=ex.config_help(),
                                    formatter_class=argparse.RawDescriptionHelpFormatter)
    cmds["osgood"].add_argument("--theta", default="const",
                                help="growth function: const, log, power:B or table:FILE")
    cmds["osgood"].add_argument("--levels", type=int, default=7)
    for name in ("cz", "basis-table"):
        cmds[name].add_argument("--n", type=int, help="basis size (overrides [geometry] n_modes)")
    return p


def _config(args):
    overrides = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        overrides[key.strip()] = val.strip()
    if args.out is not None:
        overrides["run.out"] = args.out
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if getattr(args, "n", None) is not None:
        overrides["geometry.n_modes"] = str(args.n)
    return ex.load_config(args.config, overrides)


def _emit(report, cfg, quiet_keys=()):
    path = ex.write_report(report, cfg.out)
    short = {k: v for k, v in report.items() if k not in quiet_keys}
    print(json.dumps(short, indent=2, default=ex._json_default))
    print(f"report written to {path}", file=sys.stderr)


def _osgood(args, cfg):
    theta = GrowthFunction.parse(args.theta)
    rep = osgood_test(theta, levels=args.levels)
    out = rep.as_dict()
    out = {k: v for k, v in out.items() if k in ("osgood_verdict", "increments",
                                                 "decimal_increments", "note")}
    out["theta"] = theta.label()
    out["phi"] = {f"e^{k}": phi_theta(theta, math.exp(k)) for k in (1, 2, 4, 8, 16)}
    # membership of the canonical singular density log(1 - r^2) on the unit disk
    geo = Geometry.disk()
    basis = build_basis(geo, 16)
    grid = make_grid(geo, basis)
    f = SampledField(grid, np.log(grid.rho))
    out["canonical_density"] = uniqueness_summary(f, [2.0 ** k for k in range(7)])
    return out


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "basis-table":
            text = ex.basis_table(cfg.geometry, cfg.n_modes)
            if args.out:
                Path(cfg.out).mkdir(parents=True, exist_ok=True)
                (Path(cfg.out) / "basis.csv").write_text(text)
            sys.stdout.write(text)
            return 0
        if args.command == "run":
            result = ex.run(cfg)
            print(json.dumps({k: result.manifest[k] for k in ("status", "message", "files",
                                                              "timings")}, indent=2))
            return 0 if result.trajectory.status == "ok" else 3
        if args.command == "converge-n":
            _emit(ex.converge_n(cfg, threads=args.threads, write=True), cfg)
        elif args.command == "eps-sweep":
            _emit(ex.eps_sweep(cfg, threads=args.threads, write=True), cfg)
        elif args.command == "delta-sweep":
            _emit(ex.delta_sweep(cfg, threads=args.threads, write=True), cfg)
        elif args.command == "twin":
            _emit(ex.twin(cfg, threads=args.threads, write=True), cfg, quiet_keys=("times", "Y"))
        elif args.command == "osgood":
            _emit(_osgood(args, cfg), cfg)
        elif args.command == "cz":
            basis, grid, _ = ex.prepare(cfg.geometry, cfg.n_modes)
            _emit(ex.cz_study(basis, grid, cfg.cz_p_list, cfg.cz_trials, cfg.seed), cfg)
        return 0
    except ValueError as exc:
        print(f"hmspectral: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
