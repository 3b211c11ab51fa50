"""Command-line entry points: ``statmc run|analyze|reference``.

``run`` executes a configuration file, ``analyze`` turns a run directory into
estimator CSVs, and ``reference`` emits analytic curves for overlays.
The STATMC_WORKERS environment variable caps concurrent chains.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .exact import CRITICAL_COUPLING, ising1d_free_energy, onsager_specific_heat, spontaneous_magnetization
from .harness import ConfigError, analyze_directory, parse_config, run_experiment, write_analysis_csv


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be start:stop:count")
    return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))


def _cmd_run(args) -> int:
    try:
        config = parse_config(Path(args.config).read_text())
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    manifest = run_experiment(config, workers=args.workers)
    print(f"wrote {manifest}")
    return 0


def _cmd_analyze(args) -> int:
    results = analyze_directory(args.directory, args.observable)
    out = Path(args.output) if args.output else Path(args.directory) / f"{args.observable}.csv"
    write_analysis_csv(results, out)
    print(f"wrote {out}")
    return 0


def _cmd_reference(args) -> int:
    out = Path(args.output)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        if args.curve in ("onsager_c", "m0"):
            writer.writerow(["beta_over_beta_c", "specific_heat", "spontaneous_m"])
            for ratio in args.grid:
                bj = CRITICAL_COUPLING / ratio
                writer.writerow([repr(float(ratio)),
                                 repr(onsager_specific_heat(bj)),
                                 repr(spontaneous_magnetization(bj))])
        else:
            writer.writerow(["beta", "coupling", "field", "n_sites",
                             "free_energy", "per_particle_free_energy"])
            for beta in args.grid:
                res = ising1d_free_energy(float(beta), args.coupling, args.field, args.n_sites)
                writer.writerow([repr(float(beta)), repr(args.coupling), repr(args.field),
                                 args.n_sites, repr(res.free_energy),
                                 repr(res.per_particle_free_energy)])
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="statmc",
                                     description="Lattice and particle sampling simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment configuration")
    p_run.add_argument("config", help="path to the INI configuration")
    p_run.add_argument("--workers", type=int, default=None,
                       help="concurrent chains (default: STATMC_WORKERS or 1)")
    p_run.set_defaults(func=_cmd_run)

    p_an = sub.add_parser("analyze", help="estimate observables from a run directory")
    p_an.add_argument("directory")
    p_an.add_argument("--observable", required=True,
                      help="mean_energy | mean_abs_m | mean_m_norm | specific_heat | "
                           "specific_heat_per_site | iat_abs_m")
    p_an.add_argument("--output", default=None)
    p_an.set_defaults(func=_cmd_analyze)

    p_ref = sub.add_parser("reference", help="emit analytic reference curves")
    p_ref.add_argument("--curve", required=True, choices=["onsager_c", "m0", "ising1d_f"])
    p_ref.add_argument("--grid", required=True, type=_parse_grid,
                       help="start:stop:count (beta_c/beta for 2D curves, beta for 1D)")
    p_ref.add_argument("--output", default="reference.csv")
    p_ref.add_argument("--n-sites", type=int, default=64)
    p_ref.add_argument("--coupling", type=float, default=1.0)
    p_ref.add_argument("--field", type=float, default=0.0)
    p_ref.set_defaults(func=_cmd_reference)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
