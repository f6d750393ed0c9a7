"""Command-line entry point: ``ma-fd-power``.

Subcommands map to the experiment kinds; exit codes are 0 on success, 2 on
configuration errors, and 3 when no feasible layout exists anywhere.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .experiments import ExperimentError, ExperimentSpec
from .pso import NoFeasibleLayoutError, SwarmConfig
from .scenario import (ConfigurationError, ScenarioParseError,
                       desk_scale_config, full_scale_config, load_config)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _parse_seeds(text: str) -> list:
    """Comma list ('0,1,5') or inclusive-exclusive range ('0:10')."""
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi)))
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _parse_floats(text: str) -> list:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _parse_ints(text: str) -> list:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ma-fd-power",
        description="Joint movable-antenna placement and UL/DL transmit-power "
                    "optimization for a full-duplex satellite.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("convergence", "swarm convergence traces over "
                                       "region sizes"),
                       ("tradeoff", "UL/DL power trade-off over the weight "
                                    "grid, MA vs FPA"),
                       ("si-sweep", "total powers versus the SI loss "
                                    "coefficient"),
                       ("single", "one full two-loop run")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="key/value config file "
                                        "(default: desk-scale instance)")
        p.add_argument("--full-scale", action="store_true",
                       help="use the full-size default instance")
        p.add_argument("--seeds", default="0:10",
                       help="comma list or lo:hi range (default 0:10)")
        p.add_argument("--seed", type=int,
                       help="shorthand for a single seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--audit", action="store_true",
                       help="re-solve recorded layouts and verify the CSVs")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--particles", type=int, help="swarm size Z")
        p.add_argument("--iters", type=int, help="swarm iterations Q")
        p.add_argument("--penalty", type=float, help="penalty factor beta")
        p.add_argument("--no-plots", action="store_true")
        if name == "convergence":
            p.add_argument("--region-sizes", default="3,5",
                           help="region sides in wavelengths (default 3,5)")
        if name == "tradeoff":
            p.add_argument("--weight-step", type=float, default=0.1)
        if name == "si-sweep":
            p.add_argument("--rho-grid", default="-120,-110,-100,-90",
                           help="SI loss grid in dB")
            p.add_argument("--antenna-counts",
                           help="comma list of antenna counts per side")
    return parser


# experiment kinds tuned so a default desk-scale sweep finishes in minutes
_SWEEP_SWARM = {"tradeoff": SwarmConfig(num_particles=8, max_iters=20),
                "si_sweep": SwarmConfig(num_particles=8, max_iters=20)}


def spec_from_args(args) -> ExperimentSpec:
    if args.config:
        base = load_config(args.config)
    elif args.full_scale:
        base = full_scale_config()
    else:
        base = desk_scale_config()
    kind = args.command.replace("-", "_")
    swarm = _SWEEP_SWARM.get(kind, SwarmConfig())
    if args.particles:
        swarm.num_particles = args.particles
    if args.iters is not None:
        swarm.max_iters = args.iters
    if args.penalty:
        swarm.penalty = args.penalty
    seeds = [args.seed] if args.seed is not None else _parse_seeds(args.seeds)
    spec = ExperimentSpec(kind=kind, base_config=base, seeds=seeds,
                          out_dir=args.out, swarm=swarm,
                          workers=args.workers, audit=args.audit,
                          make_plots=not args.no_plots)
    if kind == "convergence":
        spec.region_sizes_wl = _parse_floats(args.region_sizes)
    if kind == "tradeoff":
        spec.weight_step = args.weight_step
    if kind == "si_sweep":
        spec.rho_grid_db = _parse_floats(args.rho_grid)
        if args.antenna_counts:
            spec.antenna_counts = _parse_ints(args.antenna_counts)
    return spec


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = spec_from_args(args)
        experiments.run_experiment(spec)
    except (ConfigurationError, ScenarioParseError, ExperimentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoFeasibleLayoutError as exc:
        print(f"no feasible layout: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
