"""Command-line runner: cmcnull <scenario> --config path.json [...]."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .scenarios import SCENARIOS, ConfigError, RunConfig, emit_plots_data, run_scenario


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cmcnull",
        description="CMC vacuum slices, wave-equation identities and "
                    "backward null-cone diagnostics on exact backgrounds.")
    p.add_argument("scenario", choices=SCENARIOS + ("plots",),
                   help="scenario to run, or 'plots' to merge a run's CSVs")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--levels", type=int, help="refinement levels (overrides)")
    return p


def main(argv=None) -> int:
    # optional thread ceiling for the underlying BLAS/omp pools
    threads = os.environ.get("CMCNULL_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)

    args = build_parser().parse_args(argv)
    if args.scenario == "plots":
        if not args.out:
            print("plots needs --out <run dir>", file=sys.stderr)
            return 2
        code = emit_plots_data(args.out)
        if code:
            print(f"no mergeable artifacts in {args.out}", file=sys.stderr)
        return code

    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            print(f"config not found: {args.config}", file=sys.stderr)
            return 2
        except json.JSONDecodeError as exc:
            print(f"config parse error at line {exc.lineno}, column "
                  f"{exc.colno}: {exc.msg}", file=sys.stderr)
            return 2
    try:
        cfg = RunConfig.from_dict(raw, scenario=args.scenario)
        if args.out:
            cfg.out_dir = args.out
        if args.levels is not None:
            cfg.levels = args.levels
            cfg.validate()
        code = run_scenario(cfg)
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status = {0: "pass", 1: "ASSERTION FAILURE", 3: "ARTIFACT ERROR"}[code]
    print(f"{cfg.scenario}: {status} (artifacts in {cfg.out_dir})")
    return code


if __name__ == "__main__":
    sys.exit(main())
