"""Command-line entry point: floodbench evaluate | ablate | verify | serve."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .commands import cmd_ablate, cmd_evaluate, cmd_verify
from .errors import FloodbenchError
from .manifest import load_manifest


def _configure_logging() -> None:
    level = os.environ.get("FLOODBENCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floodbench",
        description="Evaluate flood-mask predictions, run bootstrap ablation studies, "
        "verify the loss kernels, and host the pairwise rating service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="score every model against the labeled dataset")
    p_eval.add_argument("--manifest", required=True, help="study manifest (JSON)")
    p_eval.add_argument("--out", help="output directory (overrides the manifest)")

    p_ablate = sub.add_parser("ablate", help="paired bootstrap study over all technique/metric cells")
    p_ablate.add_argument("--manifest", required=True, help="study manifest (JSON)")
    p_ablate.add_argument("--out", help="output directory (overrides the manifest)")
    p_ablate.add_argument("--seed", type=int, help="bootstrap seed (overrides the manifest)")
    p_ablate.add_argument("--resamples", type=int, help="bootstrap resamples (overrides the manifest)")

    p_verify = sub.add_parser("verify", help="run kernel invariant and gradient checks")
    p_verify.add_argument("--tolerance", type=float, default=1e-4, help="relative gradient tolerance")
    p_verify.add_argument("--instances", type=int, default=20, help="random instances per kernel")
    p_verify.add_argument("--seed", type=int, default=0)

    p_serve = sub.add_parser("serve", help="host the pairwise rating service")
    p_serve.add_argument("--pairs", required=True, help="directory with pairs.json and images")
    p_serve.add_argument("--vote-log", required=True, help="append-only JSONL vote log")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--quota", type=int, default=3, help="votes collected per pair")
    p_serve.add_argument("--static", help="directory with the rating UI bundle to serve at /")

    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "evaluate":
            outputs = cmd_evaluate(load_manifest(args.manifest), out_dir=args.out)
            print(f"wrote {outputs.metrics_csv} and {outputs.summary_json}")
            return 0
        if args.command == "ablate":
            outputs = cmd_ablate(
                load_manifest(args.manifest),
                out_dir=args.out,
                seed=args.seed,
                n_resamples=args.resamples,
            )
            print(f"wrote {outputs.ablation_csv} and {outputs.ablation_json}")
            return 0
        if args.command == "verify":
            report = cmd_verify(tolerance=args.tolerance, instances=args.instances, seed=args.seed)
            return 0 if report.passed else 1
        if args.command == "serve":
            from .service import serve_eval

            serve_eval(
                port=args.port,
                pairs_dir=args.pairs,
                vote_log=args.vote_log,
                host=args.host,
                quota=args.quota,
                static_dir=args.static,
            )
            return 0
    except FloodbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
