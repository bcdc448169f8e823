"""Command-line entry point: ``confdim <command> [options]``."""

from __future__ import annotations

import argparse
import sys

from .pipeline import COMMANDS, CONFIG_ENV, ConfigError, load_config, run
from .spaces import SpaceFormatError
from .svg import SVGUnsupported

EXIT_OK, EXIT_CERT, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    p = _Parser(prog="confdim", description="Estimate a conformal dimension lower bound "
                "for a finite sample of a metric space.",
                epilog=f"The default config path may be set with ${CONFIG_ENV}.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (overrides $%s)" % CONFIG_ENV)
    p.add_argument("--space", help="space kind, e.g. carpet, cantor_product, interval, file")
    p.add_argument("--level", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--metric", choices=("euclidean", "sup"))
    p.add_argument("--input", help="space file for --space file")
    p.add_argument("--seed", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--samples", type=int, help="connectivity sample budget")
    p.add_argument("--workers", type=int)
    p.add_argument("--beta-policy", dest="beta_policy", choices=("measured", "analytic"))
    p.add_argument("--eps", type=float)
    p.add_argument("--out", help="report (or space file for generate) output path")
    p.add_argument("--svg", help="SVG output path (planar coordinate spaces only)")
    p.add_argument("--timings", action="store_true", default=None,
                   help="include wall-clock timings (breaks byte-identical reruns)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    overrides = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    try:
        cfg = load_config(ns.config, overrides)
        code, text = run(ns.command, cfg)
    except (ConfigError, SpaceFormatError, SVGUnsupported, FileNotFoundError) as exc:
        print(f"confdim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if text is not None and not cfg.out:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
