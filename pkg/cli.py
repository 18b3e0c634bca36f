"""
Command-line front end.

    rollhol describe <spec>
    rollhol holonomy <spec> [--loops N] [--seed S] [--steps K] [--rank-tol T] [--base "x1,..."] [--out file]
    rollhol classify <spec|report>
    rollhol sasaki extract|verify <spec> [--lattice L]
    rollhol cone verify <spec> [--s0 v] [--loops N]
    rollhol roll develop <spec> --curve <file>
    rollhol roll crosscheck <spec> --loop <file>

Exit status: 0 on success, 1 on input error, 2 when a verification
residual exceeded its tolerance.
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from analysis import CONE_HEIGHTS, DEFAULT_LATTICE, STRUCTURE_CHOICES, RollingAnalyzer
from config import load_settings
from errors import RollHolError, SpecError
from report import is_report, load_report, write_report
from speclang import load_curve, read_json, resolve_manifold

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_TOLERANCE = 2


def _point(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _common(parser: argparse.ArgumentParser, seed: bool = True):
    parser.add_argument("--out", default="-", help="Report file, '-' for standard output (default)")
    parser.add_argument("--steps", type=_positive, help="Integration steps per curve segment")
    parser.add_argument("--threads", type=_positive, help="Worker threads (default ROLLHOL_THREADS)")
    if seed:
        parser.add_argument("--seed", type=int, default=0, help="Seed for generated loops and sample points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rollhol", description="Rolling holonomy of Riemannian manifolds")
    parser.add_argument("--debug", action="store_true", help="Enable debugging")
    commands = parser.add_subparsers(dest="command", required=True)

    describe = commands.add_parser("describe", help="Summarize a manifold")
    describe.add_argument("spec", help="Manifold file or built-in tag")
    _common(describe, seed=False)

    holonomy = commands.add_parser("holonomy", help="Estimate and classify the rolling holonomy")
    holonomy.add_argument("spec")
    holonomy.add_argument("--loops", type=int, default=0, help="Random smooth loops added to the rectangles")
    holonomy.add_argument("--rank-tol", type=float, help="Relative singular value cut-off")
    holonomy.add_argument("--base", type=_point, help="Base point as 'x1,...,xn'")
    _common(holonomy)

    classify = commands.add_parser("classify", help="Classify a manifold or an earlier holonomy report")
    classify.add_argument("spec", help="Manifold file, built-in tag or report file")
    classify.add_argument("--loops", type=int, default=0)
    _common(classify)

    sasaki = commands.add_parser("sasaki", help="Sasakian structure from the invariant complex structure")
    sasaki.add_argument("mode", choices=["extract", "verify"])
    sasaki.add_argument("spec")
    sasaki.add_argument("--lattice", type=_positive, default=DEFAULT_LATTICE,
                        help="Number of sample points around the base point")
    sasaki.add_argument("--structure", choices=STRUCTURE_CHOICES, default="auto",
                        help="'hopf' seeds the standard quaternionic triple of a unit sphere")
    _common(sasaki)

    cone = commands.add_parser("cone", help="Cone isomorphism check")
    cone.add_argument("mode", choices=["verify"])
    cone.add_argument("spec")
    cone.add_argument("--s0", type=float, action="append", help="Cone height, repeatable (default 0.5, 1, 3)")
    cone.add_argument("--loops", type=int, default=8)
    _common(cone)

    roll = commands.add_parser("roll", help="Roll the manifold on the unit sphere")
    roll.add_argument("mode", choices=["develop", "crosscheck"])
    roll.add_argument("spec")
    roll.add_argument("--curve", help="Curve file for develop")
    roll.add_argument("--loop", help="Loop file for crosscheck")
    roll.add_argument("--trajectory", action="store_true", help="Include every sampled state in the report")
    _common(roll, seed=False)
    return parser


def _spec_or_report(argument: str):
    if argument.endswith('.json') and Path(argument).is_file():
        if is_report(read_json(argument)):
            return load_report(argument)
    return resolve_manifold(argument)


def dispatch(args: argparse.Namespace, analyzer: RollingAnalyzer) -> dict:
    if args.command == "describe":
        return analyzer.describe(resolve_manifold(args.spec))
    if args.command == "holonomy":
        return analyzer.holonomy(resolve_manifold(args.spec), args.loops, args.seed, args.steps,
                                 args.rank_tol, args.base)
    if args.command == "classify":
        source = _spec_or_report(args.spec)
        if isinstance(source, dict):
            return analyzer.classify(source)
        return analyzer.classify(source, loops=args.loops, seed=args.seed, steps=args.steps)
    if args.command == "sasaki":
        return analyzer.sasaki(resolve_manifold(args.spec), args.mode, args.lattice, args.seed, args.steps,
                               args.structure)
    if args.command == "cone":
        heights = args.s0 or CONE_HEIGHTS
        return analyzer.cone(resolve_manifold(args.spec), heights, args.loops, args.seed, args.steps)
    if args.command == "roll":
        spec = resolve_manifold(args.spec)
        if args.mode == "develop":
            if not args.curve:
                raise SpecError("roll develop needs --curve")
            return analyzer.develop(spec, load_curve(args.curve), args.steps, args.trajectory)
        if not args.loop:
            raise SpecError("roll crosscheck needs --loop")
        return analyzer.crosscheck(spec, load_curve(args.loop), args.steps)
    raise SpecError(f"unknown command {args.command!r}")


def main(argv: Optional[List[str]] = None) -> int:
    """Main function"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INPUT

    settings = load_settings()
    if args.threads:
        settings = replace(settings, threads=args.threads)
    if args.debug:
        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr)
    else:
        logging.basicConfig(level=getattr(logging, settings.log_level, logging.INFO), stream=sys.stderr)

    try:
        report = dispatch(args, RollingAnalyzer(settings))
        write_report(report, args.out)
    except RollHolError as e:
        logger.error("%s", e)
        if args.debug:
            logger.exception("details")
        return e.exit_code
    except OSError as e:
        logger.error("cannot write report: %s", e)
        return EXIT_INPUT
    return EXIT_TOLERANCE if report['status'] == 'tolerance_failure' else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
