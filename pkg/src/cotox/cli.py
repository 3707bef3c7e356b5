"""Command-line interface.

Exit codes: 0 success, 1 configuration or usage error, 2 data error,
3 provider error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from .config import load_config, with_overrides
from .errors import ConfigError, CotoxError
from .pipeline import cmd_evaluate, cmd_gsea_context, cmd_predict, cmd_prepare
from .prompts import PromptStrategy, StructureFormat

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cotox", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="path to the TOML config")
        p.add_argument("--out", default=None, help="override the output directory")

    p_prepare = sub.add_parser(
        "prepare", help="build the context store (labels, context, structures, split)"
    )
    common(p_prepare)

    p_predict = sub.add_parser("predict", help="query the model for the test set")
    common(p_predict)
    p_predict.add_argument(
        "--strategy",
        choices=[s.value for s in PromptStrategy],
        default=None,
        help="prompting strategy (overrides the config)",
    )
    p_predict.add_argument(
        "--format",
        choices=[f.value for f in StructureFormat],
        default=None,
        help="structure representation (overrides the config)",
    )

    p_eval = sub.add_parser("evaluate", help="score prediction files against labels")
    common(p_eval)
    p_eval.add_argument("predictions", nargs="+", help="exchange JSONL files")

    p_gsea = sub.add_parser(
        "gsea-context", help="derive context from expression rankings"
    )
    common(p_gsea)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config)
        config = with_overrides(
            config,
            strategy=getattr(args, "strategy", None),
            structure_format=getattr(args, "format", None),
            output_dir=args.out,
        )
        if args.command == "prepare":
            cmd_prepare(config)
        elif args.command == "predict":
            cmd_predict(config)
        elif args.command == "evaluate":
            cmd_evaluate(config, args.predictions, args.out)
        elif args.command == "gsea-context":
            cmd_gsea_context(config, args.out)
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    except CotoxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
