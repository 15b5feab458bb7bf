"""Command line entry points: `parley serve` and `parley simulate`."""

from __future__ import annotations

import argparse
import json
import sys

from .demo import ProfilePaths, data_path, load_profile
from .harness import SimConfig, load_suite, render_summary, run_repeated


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parley", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve_p = sub.add_parser("serve", help="run the hub gateway")
    serve_p.add_argument("--port", type=int, default=8765)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--norms", default=data_path("norms.json"))
    serve_p.add_argument("--flow", default=data_path("flow.json"))
    serve_p.add_argument("--bindings", default=data_path("bindings.json"))
    serve_p.add_argument("--embeddings", default=data_path("embeddings.txt"))
    serve_p.add_argument("--trainset", default=data_path("trainset.jsonl"))
    serve_p.add_argument("--corpus", default=data_path("corpus"))
    serve_p.add_argument("--context", default=None, help="directory for context logs/snapshots")

    sim_p = sub.add_parser("simulate", help="replay dialogue scripts against a hub")
    sim_p.add_argument("--suite", default=data_path("suites", "d1.json"))
    sim_p.add_argument("--endpoint", default="ws://127.0.0.1:8765/ws")
    sim_p.add_argument("--users", type=int, default=1)
    sim_p.add_argument("--max-wait", type=float, default=30.0, help="seconds per expected response")
    sim_p.add_argument("--repeat", type=int, default=1)
    sim_p.add_argument("--out", default=None, help="write the JSON report here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        from .server import serve

        paths = ProfilePaths(
            norms=args.norms,
            flow=args.flow,
            bindings=args.bindings,
            embeddings=args.embeddings,
            trainset=args.trainset,
            corpus=args.corpus,
            context=args.context,
        )
        profile = load_profile(paths)
        print(f"parley hub listening on ws://{args.host}:{args.port}/ws", flush=True)
        serve(profile, host=args.host, port=args.port)
        return 0

    if args.command == "simulate":
        suite = load_suite(args.suite)
        config = SimConfig(endpoint=args.endpoint, users=args.users, max_wait_s=args.max_wait)
        run = run_repeated(suite, config, repeat=args.repeat)
        last = run.reports[-1]
        print(render_summary(run.summaries[-1]))
        if args.repeat > 1:
            stddev = run.median_stddev()
            worst = max(stddev.values()) if stddev else 0.0
            print(f"\nrepetitions: {args.repeat}; worst per-rId median stddev: {worst:.2f} ms")
        for failure in last.failures():
            print(
                f"FAIL user={failure.user} dialogue={failure.dialogue} step={failure.step} "
                f"response={failure.response_index}: {failure.detail}",
                file=sys.stderr,
            )
        for err in last.connection_errors:
            print(f"CONNECTION ERROR: {err}", file=sys.stderr)
        if args.out:
            doc = {
                "reports": [r.to_json() for r in run.reports],
                "summary": [vars(row) for row in run.summaries[-1]],
            }
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2)
            print(f"report written to {args.out}")
        return 0 if run.passed else 1

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
