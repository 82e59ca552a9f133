"""Command line interface for treechain"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from fractions import Fraction
from pathlib import Path
from typing import Any

from . import __version__
from .acceptance import CHECKS, run_selftest
from .arith import parse_number
from .classify import (
    Verdict,
    classify_by_ends,
    classify_positive_recurrence,
    classify_recurrence,
)
from .config import RunConfig, Thresholds
from .const import InvariantMethod, Outcome, TailMode
from .contfrac import StepWeights, cf_limit, dyck_generating_function, green_aud, green_rw
from .errors import DomainError, SpecFormatError, TreechainError
from .formats import (
    artifact_header,
    measure_rows,
    parse_kernel_spec,
    parse_tree_spec,
    render,
)
from .gw import (
    HomogeneousWalkParams,
    OffspringLaw,
    estimate_total,
    gw_classifier,
    gw_statistics,
    sample_kesten_many,
    spine_log_mass_slope,
)
from .invariant import Measure, h_invariant_det_many, h_invariant_leaf_addition, rw_invariant
from .kernel import AudKernel, check_irreducible, validate_aud
from .oracle import DenseChain, enumerate_paths, simulate, stationary_dense
from .series import PowerSeries
from .sternbrocot import (
    TransitionFamily,
    occupancy_by_node,
    sb_decode,
    sb_encode,
    sb_return_rate,
    sb_trajectory,
)
from .tree import ROOT, NodeWord, TreeSource, truncate

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


class CustomFormatter(logging.Formatter):
    """Custom logging formatter"""

    green = "\x1b[32;20m"
    cyan = "\x1b[36;20m"
    yellow = "\x1b[33;20m"
    red = "\x1b[31;20m"
    bold_red = "\x1b[31;1m"
    reset = "\x1b[0m"
    log_format = "%(asctime)s %(levelname)s [%(name)s] %(message)s"

    FORMATS = {
        logging.DEBUG: cyan + log_format + reset,
        logging.INFO: green + log_format + reset,
        logging.WARNING: yellow + log_format + reset,
        logging.ERROR: red + log_format + reset,
        logging.CRITICAL: bold_red + log_format + reset,
    }

    def format(self, record):
        log_fmt = self.FORMATS.get(record.levelno)
        formatter = logging.Formatter(log_fmt)
        return formatter.format(record)


_LOGGER = logging.getLogger("treechain.cli")


def setup_logging(verbose: bool = False, quiet: bool = False) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(CustomFormatter())

    root = logging.getLogger("treechain")
    root.handlers = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO)
    root.propagate = False


def _load(args: argparse.Namespace, config: RunConfig) -> tuple[TreeSource, AudKernel]:
    tree = parse_tree_spec(args.tree)
    kernel = parse_kernel_spec(args.kernel, tree, config.mode)

    return kernel.source, kernel


def _node(text: str) -> NodeWord:
    return NodeWord.parse(text)


def _verdicts_payload(verdicts: dict[str, Verdict]) -> dict[str, Any]:
    return {name: verdict.to_dict() for name, verdict in verdicts.items()}


def cmd_invariant(args: argparse.Namespace, config: RunConfig):
    source, kernel = _load(args, config)
    trunc = truncate(source, args.depth)
    violations = validate_aud(kernel, trunc)

    if violations:
        raise DomainError(
            f"{len(violations)} AUD violations, first: {violations[0].detail}",
            node=violations[0].node,
        )

    irreducible = check_irreducible(kernel, trunc)

    if not irreducible:
        raise DomainError(f"Not irreducible at {irreducible.node}: {irreducible.reason}")

    method = InvariantMethod(args.method)

    if method == InvariantMethod.DET:
        measure = h_invariant_det_many(kernel, trunc.nodes, jobs=config.jobs)
    elif method == InvariantMethod.LEAF:
        measure = h_invariant_leaf_addition(kernel, trunc)
    else:
        measure = Measure({u: rw_invariant(kernel, u) for u in trunc.nodes})

    whole = source.is_finite and len(trunc) == source.subtree_size(ROOT)

    if whole:
        measure = measure.normalized()

    _LOGGER.info("Computed %d values by %s", len(measure), method.value)

    payload = {
        "method": method.value,
        "normalized": whole,
        "kernel": kernel.describe(),
        "measure": measure.to_dict(),
    }

    return payload, measure_rows(measure)


def cmd_classify(args: argparse.Namespace, config: RunConfig):
    source, kernel = _load(args, config)
    thresholds = Thresholds.from_args(args)
    verdicts: dict[str, Verdict] = {}

    if source.is_finite:
        verdicts["recurrence"] = Verdict(Outcome.RECURRENT, [{"tree": "finite"}])
    else:
        verdicts["recurrence"] = classify_recurrence(
            kernel,
            thresholds.h_max,
            thresholds.eps,
            thresholds.decay_threshold,
            config.jobs,
        )

    verdicts["positive_recurrence"] = classify_positive_recurrence(
        kernel,
        thresholds.depth,
        thresholds.growth_window,
        thresholds.decay_threshold,
        thresholds.ratio_margin,
    )

    if args.ends and source.ends is not None:
        verdicts["ends"] = classify_by_ends(
            kernel, None, thresholds.h_max, thresholds.depth, thresholds.eps, config.jobs
        )

    rows = [
        {"test": name, "outcome": verdict.outcome.value, "reason": verdict.reason or ""}
        for name, verdict in verdicts.items()
    ]

    return _verdicts_payload(verdicts), rows


def cmd_green(args: argparse.Namespace, config: RunConfig):
    if args.dyck is not None:
        x = float(args.dyck)
        limit = cf_limit(StepWeights.dyck(x), tol=args.tol)

        return {
            "dyck": x,
            "continued_fraction": limit.to_dict(),
            "closed_form": dyck_generating_function(x),
        }, None

    _, kernel = _load(args, config)
    u = _node(args.node)

    if args.series:
        x = PowerSeries.variable(args.series)
    else:
        x = parse_number(args.x, config.mode)

    tail = TailMode(args.tail)
    green = green_rw if kernel.is_random_walk else green_aud
    value = green(kernel, u, x, args.depth, tail, args.tol)
    rows = None

    if isinstance(value.value, PowerSeries):
        rows = [{"n": n, "coefficient": c} for n, c in enumerate(value.value.coefficients)]

    return value.to_dict(), rows


def cmd_gw(args: argparse.Namespace, config: RunConfig):
    law = OffspringLaw.parse(args.law)
    params = HomogeneousWalkParams.parse(args.F, args.G)
    statistics = gw_statistics(law, params)
    payload: dict[str, Any] = {
        "law": law.to_dict(),
        "statistics": statistics.to_dict(),
        "verdict": gw_classifier(law, params).to_dict(),
    }
    rows = None

    if args.samples:
        samples = sample_kesten_many(
            law,
            args.spine_length,
            args.samples,
            args.seed,
            with_grafts=args.grafts,
            jobs=config.jobs,
        )
        slope, stderr = spine_log_mass_slope(samples, params)
        payload["samples"] = [sample.to_dict() for sample in samples]
        payload["slope"] = {"value": slope, "stderr": stderr, "expected": statistics.L}

        if args.grafts:
            masses = estimate_total(samples[0], params)
            payload["masses"] = [row.to_dict() for row in masses]
            rows = [row.to_dict() for row in masses]

    return payload, rows


def cmd_sb(args: argparse.Namespace, config: RunConfig):
    if args.encode is not None:
        return {"word": args.encode, "rational": sb_encode(_node(args.encode))}, None

    if args.decode is not None:
        q = Fraction(args.decode)

        return {"rational": q, "word": str(sb_decode(q))}, None

    family = TransitionFamily.parse(args.family)
    start = Fraction(args.start)

    if args.runs > 1:
        rate = sb_return_rate(family, start, args.steps, args.runs, args.seed, config.jobs)

        return {"family": family.to_dict(), "runs": args.runs, "return_rate": rate}, None

    trajectory = sb_trajectory(family, start, args.steps, args.seed)
    occupancy = occupancy_by_node(trajectory)
    rows = [
        {"node": str(u), "rational": sb_encode(u), "visits": occupancy[u]}
        for u in sorted(occupancy, key=NodeWord.sort_key)
    ]

    return {"family": family.to_dict(), "trajectory": trajectory.to_dict()}, rows


def cmd_oracle(args: argparse.Namespace, config: RunConfig):
    source, kernel = _load(args, config)

    if args.action == "simulate":
        run = simulate(kernel, _node(args.start), args.steps, args.seed)

        return run.to_dict(), None

    trunc = None if source.is_finite else truncate(source, args.depth)
    chain = DenseChain.from_kernel(kernel, trunc, defective=trunc is not None)

    if args.action == "stationary":
        measure = stationary_dense(chain)

        return {"measure": measure.to_dict()}, measure_rows(measure)

    x = parse_number(args.x, config.mode) if args.x is not None else None
    value = enumerate_paths(
        chain,
        _node(args.start),
        _node(args.end),
        args.max_length,
        first_hit=args.first_hit,
        x=x,
        strategy=args.strategy,
    )

    if isinstance(value, PowerSeries):
        rows = [{"length": n, "weight": c} for n, c in enumerate(value.coefficients)]

        return {"coefficients": list(value.coefficients)}, rows

    return {"value": value}, None


def cmd_selftest(args: argparse.Namespace, config: RunConfig):
    results = run_selftest(args.quick, args.seed, config.jobs, args.only, _LOGGER)
    payload = {
        "passed": all(result.passed for result in results),
        "checks": [result.to_dict() for result in results],
    }

    return payload, [result.to_dict() for result in results]


def _add_model(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tree", required=True, help="tree shorthand or JSON file")
    parser.add_argument("--kernel", required=True, help="kernel shorthand or JSON file")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    common.add_argument("-q", "--quiet", action="store_true")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default=None, help="write the artifact here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--no-timestamp", action="store_true")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="exact", action="store_true", default=True)
    mode.add_argument("--float", dest="exact", action="store_false")

    parser = argparse.ArgumentParser(prog="treechain", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    invariant = commands.add_parser("invariant", parents=[common])
    _add_model(invariant)
    invariant.add_argument("--depth", type=int, default=4)
    invariant.add_argument(
        "--method", choices=[m.value for m in InvariantMethod], default=InvariantMethod.DET.value
    )
    invariant.set_defaults(func=cmd_invariant)

    classify = commands.add_parser("classify", parents=[common])
    _add_model(classify)
    classify.add_argument("--h-max", dest="h_max", type=int)
    classify.add_argument("--eps", type=float)
    classify.add_argument("--depth", type=int)
    classify.add_argument("--growth-window", dest="growth_window", type=int)
    classify.add_argument("--decay-threshold", dest="decay_threshold", type=float)
    classify.add_argument("--ratio-margin", dest="ratio_margin", type=float)
    classify.add_argument("--ends", action="store_true", help="also classify end by end")
    classify.set_defaults(func=cmd_classify)

    green = commands.add_parser("green", parents=[common])
    green.add_argument("--tree")
    green.add_argument("--kernel")
    green.add_argument("--node", default="∅")
    green.add_argument("--x", default="1/2")
    green.add_argument("--series", type=int, default=0, help="formal series of this degree")
    green.add_argument("--depth", type=int, default=8)
    green.add_argument("--tail", choices=[t.value for t in TailMode], default=TailMode.ZERO.value)
    green.add_argument("--tol", type=float, default=1e-12)
    green.add_argument("--dyck", default=None, help="Dyck continued fraction at this x")
    green.set_defaults(func=cmd_green)

    gw = commands.add_parser("gw", parents=[common])
    gw.add_argument("--law", required=True, help='offspring law, e.g. "0:1/2,2:1/2"')
    gw.add_argument("--F", required=True)
    gw.add_argument("--G", required=True)
    mode = gw.add_mutually_exclusive_group()
    mode.add_argument("--classify", action="store_true", help="verdict and statistics only")
    mode.add_argument(
        "--simulate",
        "--samples",
        dest="samples",
        type=int,
        default=0,
        metavar="N",
        help="also sample N Kesten trees",
    )
    gw.add_argument(
        "--spine", "--spine-length", dest="spine_length", type=int, default=200, metavar="n"
    )
    gw.add_argument("--grafts", action="store_true")
    gw.add_argument("--seed", type=int, default=0)
    gw.set_defaults(func=cmd_gw)

    sb = commands.add_parser("sb", parents=[common])
    sb.add_argument("--family", default="r=1/4,l=1/4,p=1/2,s=0")
    sb.add_argument("--start", default="1/1")
    sb.add_argument("--steps", type=int, default=100_000)
    sb.add_argument("--runs", type=int, default=1)
    sb.add_argument("--seed", type=int, default=0)
    sb.add_argument("--encode", default=None, help="node word to rational")
    sb.add_argument("--decode", default=None, help="rational to node word")
    sb.set_defaults(func=cmd_sb)

    oracle = commands.add_parser("oracle", parents=[common])
    oracle.add_argument("action", choices=("stationary", "paths", "simulate"))
    _add_model(oracle)
    oracle.add_argument("--depth", type=int, default=4)
    oracle.add_argument("--start", default="∅")
    oracle.add_argument("--end", default="∅")
    oracle.add_argument("--max-length", dest="max_length", type=int, default=8)
    oracle.add_argument("--first-hit", dest="first_hit", action="store_true")
    oracle.add_argument("--x", default=None)
    oracle.add_argument("--strategy", choices=("dfs", "layered"), default="dfs")
    oracle.add_argument("--steps", type=int, default=100_000)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.set_defaults(func=cmd_oracle)

    selftest = commands.add_parser("selftest", parents=[common])
    selftest.add_argument("--quick", action="store_true")
    selftest.add_argument("--seed", type=int, default=0)
    selftest.add_argument("--only", action="append", choices=sorted(CHECKS))
    selftest.set_defaults(func=cmd_selftest)

    return parser


def run(args: argparse.Namespace) -> int:
    """Dispatch one parsed command; nothing is written unless it succeeds"""
    config = RunConfig.from_args(args)

    try:
        if args.command == "green" and args.dyck is None and not (args.tree and args.kernel):
            raise SpecFormatError("green needs --tree and --kernel, or --dyck")

        payload, rows = args.func(args, config)
        header = artifact_header(config.resolved(), config.timestamp)
        text = render(config.fmt, header, payload, rows)
    except SpecFormatError as exc:
        _LOGGER.error("Invalid input: %s", str(exc))
        return EXIT_USAGE
    except TreechainError as exc:
        _LOGGER.error("%s: %s", type(exc).__name__, str(exc))
        sys.stdout.write(json.dumps(exc.to_dict(), ensure_ascii=False) + "\n")
        return EXIT_DOMAIN
    except Exception as exc:  # pylint: disable=broad-except
        _LOGGER.error("Unexpected error: %s", str(exc))
        return EXIT_DOMAIN

    if config.out:
        Path(config.out).write_text(text, encoding="utf-8")
        _LOGGER.info("Wrote %s", config.out)
    else:
        sys.stdout.write(text)

    if args.command == "selftest" and not payload["passed"]:
        return EXIT_DOMAIN

    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)

    return run(args)


if __name__ == "__main__":
    sys.exit(main())
