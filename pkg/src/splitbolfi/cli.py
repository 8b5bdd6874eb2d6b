"""Command-line entry point.

Subcommands::

    run         Split-BOLFI sweep from a config file
    abc         marginal rejection-ABC sweep from the config's abc section
    dump-proxy  tabulate one parameter of a saved fit
    simulate    write synthetic observed data for one (model, dim, seed)
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from .simulators.daycare import write_snapshots_csv
from .harness import FULL_SCALE_DIMS, ConfigError, dump_proxy, load_config, make_simulator, run_sweep

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2


def _sweep(args, kind):
    config = load_config(args.config)
    if args.full_scale:
        config.dims = list(FULL_SCALE_DIMS[config.model])
    if args.seed_offset:
        config.seeds = [s + args.seed_offset for s in config.seeds]
    summary, n_failed = run_sweep(config, kind, args.out, args.workers)
    print(summary)
    return EXIT_PARTIAL if n_failed else EXIT_OK


def _dump(args):
    if args.out:
        dump_proxy(args.fit, args.parameter, args.out, w=args.w)
    else:
        dump_proxy(args.fit, args.parameter, sys.stdout, w=args.w)
    return EXIT_OK


def _simulate(args):
    sim = make_simulator(args.model, args.dim, args.seed)
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.join(args.out, f"{args.model}_d{args.dim}_s{args.seed}")
    with open(stem + "_observed.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(sim.summary_names))
        writer.writerow([repr(float(v)) for v in sim.observed_summaries])
    with open(stem + "_truth.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(sim.space.names))
        writer.writerow([repr(float(v)) for v in sim.truth])
    if args.model == "daycare":
        write_snapshots_csv(stem + "_snapshots.csv", sim.info["snapshots"])
    print(stem + "_observed.csv")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="splitbolfi", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "Split-BOLFI sweep"), ("abc", "marginal ABC sweep")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, metavar="PATH", help="YAML experiment config")
        p.add_argument("--seed-offset", type=int, default=0, metavar="INT",
                       help="added to every configured seed")
        p.add_argument("--out", metavar="DIR", help="output directory (default: config output_dir)")
        p.add_argument("--full-scale", action="store_true",
                       help="replace dims by the full-scale grid for the model")
        p.add_argument("--workers", type=int, default=1, help="parallel cells")
    p = sub.add_parser("dump-proxy", help="tabulate surrogate and proxy of one parameter")
    p.add_argument("fit", help="fit JSON written by 'run'")
    p.add_argument("parameter", help="parameter name")
    p.add_argument("--w", type=float, default=1.0, help="tempering weight")
    p.add_argument("--out", metavar="CSV", help="output file (default: stdout)")
    p = sub.add_parser("simulate", help="write synthetic observed data")
    p.add_argument("--model", choices=sorted(FULL_SCALE_DIMS), required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="DIR", default=".")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": lambda a: _sweep(a, "bolfi"), "abc": lambda a: _sweep(a, "abc"),
                "dump-proxy": _dump, "simulate": _simulate}
    try:
        return handlers[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        print("interrupted; completed cells are kept", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
