"""stdec-bridge command line.

Exit codes: 0 success, 1 usage errors, 2 session failures (unknown model,
tokenizer mismatch, capture or I/O errors).
"""

from __future__ import annotations

import argparse
import sys

from .errors import SessionError
from .export import export_prompt_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SESSION = 2


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures on exit code 1 instead of 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _cmd_export(args) -> int:
    written = export_prompt_file(
        args.model, args.prompt_file, args.out,
        gen_length=args.gen_len, steps=args.steps, block_size=args.block,
    )
    for path in written:
        print(f"wrote {path}")
    print(f"exported {len(written)} trace(s) from model {args.model}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stdec-bridge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="export one trace per prompt line")
    p.add_argument("--model", default="toy",
                   help="model id: 'toy' or 'toy-<seed>' (default toy)")
    p.add_argument("--prompt-file", dest="prompt_file", required=True,
                   help="text file, one prompt per line (ints or words)")
    p.add_argument("--gen-len", dest="gen_len", type=int, default=64)
    p.add_argument("--steps", type=int, default=16,
                   help="approximate step budget; sets commits per step")
    p.add_argument("--block", type=int, default=32,
                   help="block size (must divide --gen-len)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SessionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SESSION


if __name__ == "__main__":
    sys.exit(main())
