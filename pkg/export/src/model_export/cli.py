"""Command-line entry: export a model or pre-generate an embedding dump.

    model-export --model <id-or-dir> --mode {model,dump} [--words <file>]
                 --out <dir> [--layers all] [--setting nc-nospec]
                 [--revision <sha>] [--template "This is a <word>"]

Exit codes: 0 success, 1 usage error, 2 export/data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .export import DEFAULT_TEMPLATE, SETTINGS, ExportError, ExportSpec, export_model, generate_dump


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="model-export", description=__doc__)
    parser.add_argument("--version", action="version", version=f"model-export {__version__}")
    parser.add_argument("--model", required=True, help="hub identifier or local weight directory")
    parser.add_argument("--mode", required=True, choices=("model", "dump"))
    parser.add_argument("--words", type=Path,
                        help="word list (.txt, one per line) or sentence list (.jsonl)")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--layers", default="all", help="all, K, or LO-HI (encoder layers)")
    parser.add_argument("--setting", default="nc-nospec", choices=SETTINGS)
    parser.add_argument("--template", default=DEFAULT_TEMPLATE)
    parser.add_argument("--revision", help="pinned model revision for hub identifiers")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        spec = ExportSpec(
            model=args.model,
            out_dir=args.out,
            mode=args.mode,
            words_path=args.words,
            layers=args.layers,
            setting=args.setting,
            template=args.template,
            revision=args.revision,
        )
        if args.mode == "model":
            paths = export_model(spec)
            print(f"exported model -> {paths['model']} (+ tokenizer, manifest)")
        else:
            outcome = generate_dump(spec)
            print(f"wrote {outcome.n_records} records -> {outcome.out_dir} "
                  f"({len(outcome.misses)} misses)")
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
