"""Command-line interface.

Exit codes: 0 success, 1 validation error or bad arguments, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .pipeline import STAGES, PipelineConfig, StageError, run_pipeline
from .synthetic import SyntheticSpec, write_synthetic

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

_STAGE_COMMANDS = {
    "ingest": "ingest",
    "encode": "encode",
    "similarity": "similarity",
    "cluster": "cluster",
    "profile": "profile",
    "align": "align",
    "mutations": "mutations",
    "evolve": "evolution",
    "pipeline": "evolution",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p):
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--out", type=Path, help="output directory (overrides config)")
    p.add_argument("--threads", type=int, help="worker threads (overrides config)")
    p.add_argument("--input", help="trace file (overrides config)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="botdna", description="Behavioural DNA analysis of account traces.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "ingest": "parse and validate a trace file",
        "encode": "encode accounts as block sequences",
        "similarity": "pairwise cosine similarity of block vectors",
        "cluster": "average-linkage families",
        "profile": "family block profiles and segment trends",
        "align": "per-family block alignment",
        "mutations": "classify and summarise mutations",
        "evolve": "shared mutations, density, transfers and event study",
        "events": "event-emoji study only",
        "pipeline": "run every stage",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "cluster":
            p.add_argument("--k", type=int, help="number of families")
    p = sub.add_parser("synth", help="write a synthetic trace and its ground truth")
    _common(p)
    p.add_argument("--seed", type=int)
    return parser


def _load_config(args) -> PipelineConfig:
    data = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
    cfg = PipelineConfig.from_dict(data)
    if args.out is not None:
        cfg.output_dir = str(args.out)
    if args.threads is not None:
        cfg.threads = args.threads
    if args.input is not None:
        cfg.input = args.input
    if getattr(args, "k", None) is not None:
        cfg.k = args.k
    if not cfg.input:
        raise ValueError("no input trace given (config 'input' or --input)")
    return cfg.validate()


def _synth(args):
    data = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    spec = SyntheticSpec.from_dict(data)
    if args.seed is not None:
        spec.seed = args.seed
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    write_synthetic(spec, out / "trace.jsonl", out / "truth.json")
    print(out / "trace.jsonl")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"botdna: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            _synth(args)
            return EXIT_OK
        cfg = _load_config(args)
        events_only = args.command == "events"
        until = "evolution" if events_only else _stage_for(args.command)
        run = run_pipeline(cfg, until=until, events_only=events_only)
        print(run.out / "manifest.json")
    except OSError as exc:
        print(f"botdna: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, StageError) as exc:
        print(f"botdna: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _stage_for(command):
    stage = _STAGE_COMMANDS[command]
    assert stage in STAGES
    return stage


if __name__ == "__main__":
    sys.exit(main())
