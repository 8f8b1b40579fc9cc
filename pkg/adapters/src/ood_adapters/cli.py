"""Command-line entry points for the export adapters."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exports import DEFAULT_EMBEDDING_MODEL, DEFAULT_TOP_K, ExportJob, export_embeddings, export_mask_logprobs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ood-adapters",
        description="Export LM embeddings and mask log-probabilities in the "
        "harness file formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-embeddings", help="one sentence vector per instance")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", default=DEFAULT_EMBEDDING_MODEL,
                   help="model identifier or local path")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True)

    p = sub.add_parser("export-logprobs", help="top-k mask tokens per instance")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True, help="masked-LM identifier or local path")
    p.add_argument("--template", required=True,
                   help='cloze template, e.g. "The sentiment of [TEXT] is [MASK]"')
    p.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--device", default="cpu")
    p.add_argument("--out", required=True)
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExportJob(
        corpus=Path(args.corpus),
        model=args.model,
        output=Path(args.out),
        template=getattr(args, "template", None),
        top_k=getattr(args, "top_k", DEFAULT_TOP_K),
        batch_size=args.batch_size,
        device=args.device,
    )
    try:
        if args.command == "export-embeddings":
            export_embeddings(job)
        else:
            export_mask_logprobs(job)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
