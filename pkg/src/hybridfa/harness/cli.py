"""``hybridfa`` command line.

Exit codes: 0 success, 1 configuration or runtime error, 2 a verification
gate failed (``mse-verify`` tolerance exceeded).
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..config import ConfigError
from . import experiments
from .spec import KINDS, load_spec_tree, resolve


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridfa", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--spec", help="YAML experiment spec")
        p.add_argument("--seed", type=int, help="root seed (overrides the spec)")
        p.add_argument("--out", help="output directory (overrides the spec)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted override, e.g. system.L=4 (repeatable)")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = resolve(load_spec_tree(args.spec), args.kind, args.seed, args.out, args.override)
        ok = experiments.run(spec)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1
    if not ok:
        print(f"{args.kind}: verification gate failed, see {spec.out}", file=sys.stderr)
        return 2
    print(f"{args.kind}: wrote results to {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
