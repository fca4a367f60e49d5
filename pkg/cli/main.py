"""
av-duplex command line.

    python -m cli [--config PATH] [--seed N] [--out DIR] [--verbose] COMMAND ...

Commands: gen-corpus, train, eval, sweep, run-session, latency, replay.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

import argparse
import json
import logging
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from agents.backbones import BACKBONES
from agents.core.interfaces import SessionMode
from cli import commands
from config.logging import configure_logging
from config.settings import load_settings
from evaluation.runner import EvalTask
from exceptions import AVDuplexError, ConfigurationError

logger = logging.getLogger(__name__)

VARIANTS = ("dual", "unified", "unified-no-sot")
CONDITIONS = ("clean", "bg", "interf")
MODALITIES = ("a", "v", "av")

COMMANDS: Dict[str, Callable] = {
    "gen-corpus": commands.cmd_gen_corpus,
    "train": commands.cmd_train,
    "eval": commands.cmd_eval,
    "sweep": commands.cmd_sweep,
    "run-session": commands.cmd_run_session,
    "latency": commands.cmd_latency,
    "replay": commands.cmd_replay,
}


def parse_override(text: str) -> Dict[str, Any]:
    """``section.key=value`` as a nested dict; the value is read as TOML, else kept as a string."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise ConfigurationError(f"override must look like section.key=value, got {text!r}")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    node: Dict[str, Any] = {}
    out = node
    parts = key.split(".")
    for part in parts[:-1]:
        node[part] = {}
        node = node[part]
    node[parts[-1]] = value
    return out


def _merge(into: Dict[str, Any], other: Dict[str, Any]) -> Dict[str, Any]:
    for key, value in other.items():
        if isinstance(value, dict) and isinstance(into.get(key), dict):
            _merge(into[key], value)
        else:
            into[key] = value
    return into


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", "--ckpt", dest="ckpt", type=Path, help="Model checkpoint; an untrained model when omitted")
    parser.add_argument("--variant", choices=VARIANTS, help="Expected model variant")
    parser.add_argument("--backbone", choices=BACKBONES, help="Response backbone for dual sessions")
    parser.add_argument("--backbone-ckpt", type=Path, help="Stage-1 checkpoint for the tinylm backbone")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="av-duplex",
        description="Streaming full-duplex audio-visual dialogue engine",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", type=Path, help="TOML run configuration")
    parser.add_argument("--seed", type=int, help="Run seed (overrides the config)")
    parser.add_argument("--out", type=Path, help="Output directory (default: $AVDUPLEX_OUTPUT_ROOT or ./runs)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a config value, e.g. --set stage2.steps=100")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="Generate the synthetic corpus")
    p.add_argument("--n", type=int, help="Number of conversations")

    p = sub.add_parser("train", help="Run one training stage")
    p.add_argument("--stage", type=int, choices=(1, 2), required=True)
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--init", type=Path, help="Stage-1 checkpoint to start stage 2 from")
    p.add_argument("--no-stage1", action="store_true", help="Train stage 2 from scratch")
    p.add_argument("--steps", type=int, help="Optimizer steps (default from config)")

    p = sub.add_parser("eval", help="Evaluate a model under one condition")
    p.add_argument("--task", choices=[t.value for t in EvalTask], default="avsr")
    p.add_argument("--condition", choices=CONDITIONS, default="clean")
    p.add_argument("--modality", choices=MODALITIES, default="av")
    p.add_argument("--snr", type=float, help="Fixed SNR in dB; drawn from the eval range when omitted")
    p.add_argument("--n", type=int, help="Number of cases")
    p.add_argument("--name", help="Model label in the report")
    _add_model_flags(p)

    p = sub.add_parser("sweep", help="Evaluate models across SNR bins")
    p.add_argument("--task", choices=("avsr", "turns"), default="avsr")
    p.add_argument("--condition", choices=CONDITIONS, default="interf")
    p.add_argument("--modality", choices=MODALITIES, default="av")
    p.add_argument("--n", type=int, help="Samples per bin")
    p.add_argument("--ckpt", action="append", metavar="[NAME=]PATH", help="Checkpoint to include; repeatable")
    p.add_argument("--backbone", choices=BACKBONES)
    p.add_argument("--backbone-ckpt", type=Path)

    p = sub.add_parser("run-session", help="Run one duplex session and store its trace")
    p.add_argument("--mode", choices=[m.value for m in SessionMode], help="Session mode; must match the model variant")
    p.add_argument("--audio", type=Path, help="Audio token grid file")
    p.add_argument("--visual", type=Path, help="Visual feature grid file")
    p.add_argument("--out", dest="trace_out", type=Path, help="Trace file (default: the trace store under the output directory)")
    p.add_argument("--conversation", type=int, help="Corpus conversation index when no grid files are given (default 0)")
    p.add_argument("--frames", type=int, help="Truncate the session to this many frames")
    p.add_argument("--condition", choices=CONDITIONS, default="clean")
    p.add_argument("--snr", type=float)
    p.add_argument("--ground-truth", action="store_true", help="Store the annotation trace instead of running a model")
    p.add_argument("--print-transcript", action="store_true")
    _add_model_flags(p)

    p = sub.add_parser("latency", help="Print the algorithmic latency")
    p.add_argument("--lookahead", type=int, help="Visual lookahead in frames")

    p = sub.add_parser("replay", help="Render a trace as a transcript")
    p.add_argument("path", type=Path)
    p.add_argument("--from-transcript", action="store_true", help="Parse a transcript back into a trace")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides: Dict[str, Any] = {}
        for text in args.overrides:
            _merge(overrides, parse_override(text))
        if args.seed is not None:
            overrides["seed"] = args.seed
        settings = load_settings(args.config, overrides)
        configure_logging(settings, args.verbose)
        out = Path(args.out) if args.out else Path(settings.output_root)
        out.mkdir(parents=True, exist_ok=True)
        logger.info(f"{args.command}: seed {settings.seed}, output {out}")
        summary = COMMANDS[args.command](settings, args, out, settings.seed)
    except AVDuplexError as e:
        logger.error(f"{args.command} failed: {e.message}")
        print(json.dumps(e.to_dict(), sort_keys=True, default=str), file=sys.stderr)
        return e.exit_code
    print(commands.dumps(summary))
    return 0
