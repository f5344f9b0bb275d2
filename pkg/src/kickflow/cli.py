"""Command-line entry point: run experiments, dump potentials, list experiments.

Exit codes: 0 when every asserted check passes, 2 on an assertion failure,
1 on configuration or runtime errors.  The parallelism flag -j changes wall
clock only; reported rows are byte-identical for any degree.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import experiments as exps
from .config import config_hash, selected_experiments, validate_config
from .errors import ConfigError
from .potential import PotentialSpec, sample_potential


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}")
    cfg = validate_config(raw)
    env_seed = os.environ.get("KICKFLOW_SEED")
    if env_seed is not None:
        try:
            cfg["potential"]["master_seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"KICKFLOW_SEED must be an integer, got {env_seed!r}")
        print(f"KICKFLOW_SEED override: master_seed = {cfg['potential']['master_seed']}",
              file=sys.stderr)
    return cfg


def _dispatch(name: str, cfg: dict, jobs: int):
    spec = PotentialSpec(**cfg["potential"])
    g, r, tol = cfg["grid"], cfg["run"], cfg["tolerances"]
    if name == "shape":
        return exps.run_shape(spec, kappas=r["shape_kappas"],
                              velocities=r["velocities"], n=r["shape_n"], seeds=r["seeds"],
                              h=g["h"], halfwidth=g["halfwidth"], jobs=jobs, tolerances=tol)
    if name == "concentration":
        return exps.run_concentration(spec, kappas=r["concentration_kappas"],
                                      n_list=r["n_list"], seeds=r["seeds"], h=g["h"],
                                      halfwidth=g["halfwidth"], jobs=jobs, tolerances=tol)
    if name == "zero_temperature_limit":
        return exps.run_zero_temperature_limit(spec, kappa_ladder=r["kappas"], m=r["m"],
                                               x=r["x"], v=r["v"], N=r["horizon"],
                                               seeds=r["seeds"], h=g["h"],
                                               halfwidth=g["halfwidth"], jobs=jobs,
                                               tolerances=tol)
    if name == "inviscid_limit":
        return exps.run_inviscid_limit(spec, kappa_ladder=r["kappas"], v=r["v"],
                                       n=r["velocity_time"], N=r["velocity_horizon"],
                                       seeds=r["seeds"], h=g["h"], halfwidth=g["halfwidth"],
                                       weight_halfwidth=r["weight_halfwidth"], jobs=jobs,
                                       tolerances=tol)
    if name == "busemann_limit":
        return exps.run_busemann_limit(spec, kappa_ladder=r["kappas"], anchors=r["anchors"],
                                       v=r["v"], horizons=r["horizons"], seeds=r["seeds"],
                                       h=g["h"], halfwidth=g["halfwidth"], jobs=jobs,
                                       tolerances=tol)
    if name == "overlap":
        return exps.run_overlap(spec, kappa=r["overlap_kappa"], sources=r["sources"],
                                v=r["v"], N=r["horizon"], seeds=r["seeds"], h=g["h"],
                                halfwidth=g["halfwidth"], jobs=jobs, tolerances=tol)
    raise ConfigError(f"unknown experiment {name!r}")


def _write_report(report, outdir: str) -> dict:
    os.makedirs(outdir, exist_ok=True)
    stamp = time.strftime("%Y%m%dT%H%M%S", time.gmtime())
    base = f"{report.name}-{stamp}-{report.config_hash()}"
    paths = {
        "rows": os.path.join(outdir, base + ".rows.csv"),
        "report": os.path.join(outdir, base + ".report.json"),
        "summary": os.path.join(outdir, base + ".summary.txt"),
    }
    with open(paths["rows"], "w") as fh:
        fh.write(exps.rows_csv(report))
    with open(paths["report"], "w") as fh:
        fh.write(exps.report_json(report))
    with open(paths["summary"], "w") as fh:
        fh.write(exps.summary_text(report))
    return paths


def cmd_run(config_path: str, outdir=None, jobs: int = 1) -> int:
    try:
        cfg = _load_config(config_path)
        if outdir is not None:
            cfg["output_dir"] = outdir
        names = selected_experiments(cfg)
        all_passed = True
        for name in names:
            report = _dispatch(name, cfg, jobs)
            paths = _write_report(report, cfg["output_dir"])
            for a in report.assertions:
                print(f"[{'PASS' if a['passed'] else 'FAIL'}] {name}:{a['name']} {a['detail']}")
            print(f"{name}: report {paths['report']}")
            all_passed = all_passed and report.passed
        return 0 if all_passed else 2
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (ValueError, FloatingPointError, OSError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 1


def cmd_dump_potential(config_path: str, outdir=None) -> int:
    try:
        cfg = _load_config(config_path)
        if outdir is not None:
            cfg["output_dir"] = outdir
        spec = PotentialSpec(**cfg["potential"])
        r, g = cfg["run"], cfg["grid"]
        horizon = max(r["horizon"], r["velocity_horizon"], max(r["horizons"]))
        vmax = max([abs(r["v"])] + [abs(v) for v in r["velocities"]])
        cov = g["halfwidth"] + vmax * max(horizon, r["shape_n"]) + 1.0
        fld = sample_potential(spec, (min(0, r["m"]), horizon), (-cov, cov))
        os.makedirs(cfg["output_dir"], exist_ok=True)
        path = os.path.join(cfg["output_dir"], f"potential-{config_hash(cfg)}.json")
        with open(path, "w") as fh:
            fh.write(fld.to_json())
        print(path)
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 1


def cmd_list() -> int:
    for name, (_, theorem) in exps.EXPERIMENTS.items():
        print(f"{name}: {theorem}")
    print(f"{len(exps.EXPERIMENTS)} experiments")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kickflow",
                                     description="kick-forcing polymer/Burgers laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run configured experiments")
    p_run.add_argument("-c", "--config", required=True, help="path to JSON config")
    p_run.add_argument("-o", "--outdir", default=None, help="output directory override")
    p_run.add_argument("-j", "--jobs", type=int, default=1,
                       help="worker processes (does not change reported numbers)")

    p_dump = sub.add_parser("dump-potential", help="write the potential coefficient dump")
    p_dump.add_argument("-c", "--config", required=True)
    p_dump.add_argument("-o", "--outdir", default=None)

    sub.add_parser("list", help="list experiments and the property each checks")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.outdir, args.jobs)
    if args.command == "dump-potential":
        return cmd_dump_potential(args.config, args.outdir)
    return cmd_list()


if __name__ == "__main__":
    sys.exit(main())
