"""Command line entry point: ``planarcontact run --config FILE --out DIR``."""
import argparse
import logging
import sys
from dataclasses import replace

from .config import ConfigError, load_config
from .harness import run


def build_parser():
    parser = argparse.ArgumentParser(prog="planarcontact",
                                     description="Planar contact estimation scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario and write trace.csv and summary.txt")
    r.add_argument("--config", required=True, help="YAML scenario file")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, help="particle filter and noise seed")
    r.add_argument("--method", choices=("analytic", "pf", "both"))
    r.add_argument("--scenario", choices=("hold", "track"))
    r.add_argument("--threaded", action="store_true",
                   help="estimators on their own thread, wall-clock paced (not deterministic)")
    r.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["particle_filter"] = replace(cfg.particle_filter, seed=args.seed)
        if args.method is not None:
            overrides["method"] = args.method
        if args.scenario is not None:
            overrides["scenario"] = args.scenario
        cfg = replace(cfg, **overrides)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run(cfg, out_dir=args.out, threaded=args.threaded)
    print(result.summary.to_text(), end="")
    if not result.summary.ok:
        print(f"error: run failed: {result.summary.failure}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
