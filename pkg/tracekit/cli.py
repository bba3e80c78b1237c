"""Command-line entry point: ``python -m tracekit <command> ...``.

Exit codes: 0 success, 1 usage error, 2 one or more record-level failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import nullcontext
from typing import List, Optional, Tuple

from pydantic import ValidationError

from tracekit.config import settings
from tracekit.models.schemas import Command, RunConfig, ScorerConfig, ScorerMode, TvpConfig, WindowMode
from tracekit.pipeline import orchestrator
from tracekit.pipeline.orchestrator import EXIT_USAGE


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def parse_window(value: str) -> Tuple[WindowMode, Optional[int]]:
    """``word`` or ``fixed:L``."""
    if value == "word":
        return WindowMode.BY_WORD, None
    if value.startswith("fixed"):
        _, _, length = value.partition(":")
        try:
            size = int(length) if length else 5
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad window length in {value!r}")
        if size < 1:
            raise argparse.ArgumentTypeError("window length must be >= 1")
        return WindowMode.FIXED, size
    raise argparse.ArgumentTypeError(f"--window must be 'word' or 'fixed:L', got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tracekit", description="Trace simplification, tokens, metrics and numeric checks")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--input", nargs="+", default=[], help="input file(s); *.gz is decompressed")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--jobs", type=int, default=settings.jobs)
    common.add_argument("--strict", action="store_true", help="stop at the first failing record")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--width", type=float, default=1000.0, help="image width for records/tokens without one")
    common.add_argument("--height", type=float, default=1000.0)

    p = sub.add_parser("simplify", parents=[common], help="semantic-guided DP over narrative records")
    p.add_argument("--eps-base", type=float, default=settings.eps_base)
    p.add_argument("--scorer", choices=[m.value for m in ScorerMode], default=ScorerMode.HEURISTIC.value)
    p.add_argument("--endpoint", default=settings.scorer_url, help="external scorer URL (env TRACEKIT_SCORER_URL)")

    sub.add_parser("tokenize", parents=[common], help="records or token strings to canonical <traj> lines")

    p = sub.add_parser("eval-lbm", parents=[common], help="LBM between paired PRED and GT lines")
    p.add_argument("--k", type=int, action="append", dest="ks", help="window radius (repeatable; default 0 and 1)")
    p.add_argument("--window", type=parse_window, default=(WindowMode.FIXED, 5), help="word | fixed:L")

    p = sub.add_parser("check-tvp", parents=[common], help="finite-difference check of the TVP gradients")
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--blocks", type=int, default=2)

    p = sub.add_parser("loss", parents=[common], help="segmentation losses for PRED and GT mask files")
    p.add_argument("--text-loss", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=2.0)

    sub.add_parser("stats", parents=[common], help="aggregate statistics of simplify output")
    return parser


def to_run_config(args: argparse.Namespace) -> RunConfig:
    scorer = ScorerConfig(
        mode=getattr(args, "scorer", ScorerMode.HEURISTIC.value),
        endpoint_url=getattr(args, "endpoint", "") or "",
        token=settings.scorer_token,
        timeout=settings.scorer_timeout,
        eps_base=getattr(args, "eps_base", settings.eps_base),
        max_in_flight=settings.scorer_max_in_flight,
    )
    window, length = getattr(args, "window", (WindowMode.FIXED, 5))
    fields = dict(
        command=Command(args.command),
        inputs=args.input,
        output=args.output,
        eps_base=scorer.eps_base,
        scorer=scorer,
        seed=args.seed,
        jobs=args.jobs,
        strict=args.strict,
        window=window,
        window_length=length or 5,
        image_width=args.width,
        image_height=args.height,
    )
    if getattr(args, "ks", None):
        fields["ks"] = sorted(set(args.ks))
    for flag, name in (("d_model", "d_model"), ("heads", "n_heads"), ("blocks", "n_blocks"),
                       ("text_loss", "text_loss"), ("alpha", "alpha")):
        if hasattr(args, flag):
            fields[name] = getattr(args, flag)
    return RunConfig(**fields)


def _check_inputs(config: RunConfig):
    wants = {Command.EVAL_LBM: 2, Command.LOSS: 2, Command.CHECK_TVP: 0}
    n = wants.get(config.command)
    if n is not None and len(config.inputs) != n:
        raise UsageError(f"{config.command.value} takes {n} input file(s), got {len(config.inputs)}")
    if n is None and not config.inputs:
        raise UsageError(f"{config.command.value} needs --input")
    if config.command == Command.CHECK_TVP:
        TvpConfig(d_model=config.d_model, n_heads=config.n_heads, n_blocks=config.n_blocks)


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=settings.log_level, stream=sys.stderr)
    try:
        config = to_run_config(build_parser().parse_args(argv))
        _check_inputs(config)
    except (UsageError, ValidationError) as e:
        print(f"tracekit: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        with open(config.output, "w", encoding="utf-8") if config.output else nullcontext(sys.stdout) as out:
            return orchestrator.run(config, out, sys.stderr)
    except OSError as e:
        print(f"tracekit: {e}", file=sys.stderr)
        return EXIT_USAGE
