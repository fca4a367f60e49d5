"""Command implementations.

Each ``cmd_*`` takes the resolved settings plus the parsed arguments, writes
its artifacts under the output directory and returns a JSON-ready summary
that `main` prints.
"""

import asyncio
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from agents.backbones import build_backbone
from agents.core.interfaces import SessionMode, SessionTrace
from agents.core.replay import parse_transcript, render_trace
from agents.core.runner import RunnerConfig, SessionRunner, algorithmic_latency, session_inputs
from agents.core.session_service import JsonlTraceStore
from agents.core.streamers import TransformerStreamer
from agents.helpers import derive_seed, scope_session_id
from config.environments.base import BaseSettings
from config.settings import config_hash
from corpus.mixing import MixCondition
from corpus.store import manifest_hash, write_corpus
from corpus.world import CorpusWorld
from encoders.grids import FrontEnd, load_grid_pair, null_grid
from encoders.types import AcousticTokenGrid, EncoderConfig, GridKind, VisualFeatureGrid
from evaluation.reports import row_from_result, rows_from_sweep, write_cases, write_histogram, write_report
from evaluation.runner import EvalTask, Evaluator, Modality, make_cases
from evaluation.sweep import sweep_snr
from evaluation.turns import ground_truth_trace
from exceptions import ConfigurationError, SessionError
from model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from model.config import ModelConfig, ModelVariant
from model.params import init_parameters
from model.training import LossLog, Stage2Trainer, train_stage1, train_stage2
from model.transformer import DuplexTransformer
from streams.grid import FrameGrid
from streams.targets import default_horizon

logger = logging.getLogger(__name__)


def _world(settings: BaseSettings, seed: int, n: Optional[int] = None) -> Tuple[CorpusWorld, FrontEnd]:
    world = CorpusWorld(settings, seed=seed, n_conversations=n)
    return world, FrontEnd(world, EncoderConfig.from_settings(settings.encoder))


def _load_model(world: CorpusWorld, settings: BaseSettings, ckpt: Optional[Path], seed: int, variant: Optional[str] = None) -> DuplexTransformer:
    """Checkpointed model, or a fresh initialisation when `ckpt` is None."""
    if ckpt is None:
        config = ModelConfig.from_settings(settings, len(world.vocab), variant)
        logger.warning(f"No checkpoint given; using an untrained {config.variant.value} model")
        return DuplexTransformer(config, init_parameters(config, derive_seed(seed, "init")))
    checkpoint = load_checkpoint(ckpt, world.vocab.hash())
    if variant is not None and checkpoint.config.variant != ModelVariant.parse(variant):
        raise ConfigurationError(
            f"checkpoint holds a {checkpoint.config.variant.value} model, not {variant}",
            details={"checkpoint": str(ckpt)},
        )
    return DuplexTransformer(checkpoint.config, checkpoint.params)


def _backbone_factory(world: CorpusWorld, settings: BaseSettings, name: Optional[str], backbone_ckpt: Optional[Path]):
    name = name or settings.orchestrator.backbone
    text_model = None
    if name == "tinylm":
        if backbone_ckpt is None:
            raise ConfigurationError("the tinylm backbone needs --backbone-ckpt")
        text_model = _load_model(world, settings, backbone_ckpt, 0)
    max_tokens = settings.orchestrator.max_response_tokens
    # Fail on an unusable name before any session starts.
    build_backbone(name, world.lexicon, world.vocab, text_model, max_tokens)
    return lambda: build_backbone(name, world.lexicon, world.vocab, text_model, max_tokens)


def cmd_gen_corpus(settings: BaseSettings, args, out: Path, seed: int) -> Dict[str, Any]:
    """Generate conversations, render audio and mixtures, write manifest and stats."""
    world, _ = _world(settings, seed, args.n)
    corpus_dir = out / "corpus"
    stats = write_corpus(world, corpus_dir, derive_seed(seed, "mix"))
    return {
        "corpus": str(corpus_dir),
        "manifest_hash": manifest_hash(corpus_dir),
        "config_hash": config_hash(settings),
        "seed": seed,
        **stats.model_dump(),
    }


def cmd_train(settings: BaseSettings, args, out: Path, seed: int) -> Dict[str, Any]:
    """Run one training stage and write its checkpoint and loss log."""
    world, frontend = _world(settings, seed)
    variant = ModelVariant.parse(args.variant or settings.model.variant)
    config = ModelConfig.from_settings(settings, len(world.vocab), variant.value)
    stage = int(args.stage)
    name = f"stage{stage}-{variant.value}"
    log = LossLog(out / f"{name}.loss.jsonl")

    try:
        if stage == 1:
            if args.init or args.no_stage1:
                raise ConfigurationError("--init and --no-stage1 apply to stage 2 only")
            result = train_stage1(world, frontend, settings, config, seed, steps=args.steps, log=log)
            extra: Dict[str, Any] = {}
        else:
            if args.init is None and not args.no_stage1:
                raise ConfigurationError("stage 2 needs --init STAGE1_CKPT, or --no-stage1 to train from scratch")
            if args.init is not None and args.no_stage1:
                raise ConfigurationError("--init and --no-stage1 are mutually exclusive")
            init = load_checkpoint(args.init, world.vocab.hash()).params if args.init else None
            result = train_stage2(world, frontend, settings, config, seed, params=init, steps=args.steps, log=log)
            heldout = Stage2Trainer(world, frontend, settings, config, settings.stage2.optim, seed, result.params).heldout_loss()
            extra = {"heldout_loss": heldout, "init": str(args.init) if args.init else None}
    finally:
        log.close()

    ckpt_path = out / f"{name}.ckpt"
    save_checkpoint(
        ckpt_path,
        Checkpoint(
            config=config,
            params=result.params,
            vocab_hash=world.vocab.hash(),
            step=result.steps,
            config_hash=config_hash(settings),
            extra={"stage": stage, "seed": seed, **extra},
        ),
    )
    return {"checkpoint": str(ckpt_path), "stage": stage, "variant": variant.value, "steps": result.steps, "seed": seed, **extra}


def cmd_eval(settings: BaseSettings, args, out: Path, seed: int) -> Dict[str, Any]:
    """Evaluate one model on held-out conversations under one condition and modality."""
    world, frontend = _world(settings, seed)
    task, modality, condition = EvalTask(args.task), Modality(args.modality), MixCondition(args.condition)
    model = _load_model(world, settings, args.ckpt, seed, args.variant)
    make_backbone = _backbone_factory(world, settings, args.backbone, args.backbone_ckpt)
    name = args.name or (Path(args.ckpt).stem if args.ckpt else "untrained")
    evaluator = Evaluator(world, frontend, model, settings, make_backbone, name=name)
    evaluator.check_task(task)

    cases = make_cases(world, condition, args.n or settings.eval.n_eval_conversations, seed, args.snr)
    result = evaluator.evaluate(cases, task, modality, condition.value, args.snr)
    row = row_from_result(name, result, settings, seed)
    stem = f"eval-{task.value}-{condition.value}-{modality.value}"
    paths = write_report(out, stem, [row], settings, seed)
    write_cases(out / f"{stem}.cases.jsonl", result)
    if task == EvalTask.TURNS:
        write_histogram(out / f"{stem}.fto_hist.csv", evaluator.histogram(result))
    return {"report": str(paths["jsonl"]), **row.model_dump(mode="json")}


def cmd_sweep(settings: BaseSettings, args, out: Path, seed: int) -> Dict[str, Any]:
    """Evaluate one or more checkpoints across the SNR bins of a condition."""
    world, frontend = _world(settings, seed)
    make_backbone = _backbone_factory(world, settings, args.backbone, args.backbone_ckpt)
    evaluators = {}
    for spec in args.ckpt or [None]:
        name, path = _named_checkpoint(spec)
        model = _load_model(world, settings, path, seed)
        evaluators[name] = Evaluator(world, frontend, model, settings, make_backbone, name=name)
        evaluators[name].check_task(EvalTask(args.task))

    report = sweep_snr(
        evaluators, MixCondition(args.condition), world, settings, seed,
        task=EvalTask(args.task), modality=Modality(args.modality), samples_per_bin=args.n,
    )
    stem = f"sweep-{args.task}-{args.condition}-{args.modality}"
    paths = write_report(out, stem, rows_from_sweep(report, settings), settings, seed, kind="sweep")
    return {"report": str(paths["jsonl"]), "bins": [str(b) for b in report.bins], "rows": _finite_rows(report.rows())}


def _named_checkpoint(spec: Optional[str]) -> Tuple[str, Optional[Path]]:
    """``NAME=PATH`` or ``PATH`` (named after its stem)."""
    if spec is None:
        return "untrained", None
    name, sep, path = spec.partition("=")
    if not sep:
        return Path(spec).stem, Path(spec)
    return name, Path(path)


def _finite_rows(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    return [{k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in row.items()} for row in rows]


def _session_mode(model: DuplexTransformer, requested: Optional[str]) -> SessionMode:
    """Session mode implied by the model; an explicit ``--mode`` must agree with it."""
    mode = SessionMode.UNIFIED if model.config.variant.is_unified else SessionMode.DUAL
    if requested is not None and SessionMode(requested) != mode:
        raise SessionError(
            f"--mode {requested} does not match the {model.config.variant.value} model",
            details={"mode": requested, "variant": model.config.variant.value},
        )
    return mode


def cmd_run_session(settings: BaseSettings, args, out: Path, seed: int) -> Dict[str, Any]:
    """Stream one session through the orchestrator and store its trace.

    Inputs are either a pair of grid files (``--audio``/``--visual``) or a
    corpus conversation encoded on the fly (``--conversation``, the default).
    """
    world, frontend = _world(settings, seed)
    from_files = args.audio is not None or args.visual is not None
    if from_files:
        if args.audio is None or args.visual is None:
            raise ConfigurationError("--audio and --visual must be given together")
        if args.conversation is not None or args.ground_truth:
            raise ConfigurationError("grid files replace --conversation and --ground-truth")
        if args.condition != MixCondition.CLEAN.value or args.snr is not None:
            raise ConfigurationError("--condition and --snr apply to corpus conversations only")

    trace = _run_from_files(world, settings, args, seed) if from_files else _run_from_corpus(world, frontend, settings, args, seed)
    frames = int(trace.meta.get("frames", 0))

    if args.trace_out is not None:
        target = Path(args.trace_out)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(trace.to_jsonl(), encoding="utf-8")
        trace_location = str(target)
    else:
        trace.session_id = scope_session_id("sessions", trace.session_id)
        store = JsonlTraceStore(out / "traces")

        async def save() -> None:
            await store.initialize()
            await store.save_trace(trace)

        asyncio.run(save())
        trace_location = str(store.root)

    if args.print_transcript:
        print(render_trace(trace, world.grid), end="")
    return {"session_id": trace.session_id, "frames": frames, "events": len(trace), "turns": len(trace.sot_frames()), "trace": trace_location}


def _run_model_session(world: CorpusWorld, settings: BaseSettings, args, model: DuplexTransformer, audio, visual, session_id: str, rng_seed: int, meta: Dict[str, Any]) -> SessionTrace:
    mode = _session_mode(model, args.mode)
    backbone = _backbone_factory(world, settings, args.backbone, args.backbone_ckpt)() if mode == SessionMode.DUAL else None
    implicit = model.config.variant == ModelVariant.UNIFIED_NO_SOT
    config = RunnerConfig.from_settings(settings.orchestrator, mode, rng_seed, implicit_turns=implicit)
    trace = SessionRunner(config, world.vocab).run(session_inputs(audio, visual, session_id, meta), TransformerStreamer(model), backbone)
    return trace


def _run_from_files(world: CorpusWorld, settings: BaseSettings, args, seed: int) -> SessionTrace:
    audio, visual, grid_hash = load_grid_pair(args.audio, args.visual)
    model = _load_model(world, settings, args.ckpt, seed, args.variant)
    frames = audio.frames if args.frames is None else min(args.frames, audio.frames)
    frames = min(frames, model.config.max_context)
    if frames < audio.frames:
        logger.info(f"Truncating session grids from {audio.frames} to {frames} frames")
        audio = AcousticTokenGrid(audio.tokens[:frames], audio.codebook_size, audio.fps)
        visual = VisualFeatureGrid(visual.features[:frames], visual.present[:frames], visual.lookahead)
    if grid_hash != EncoderConfig.from_settings(settings.encoder).hash():
        logger.warning("Session grids were encoded with a different encoder config than the current settings")
    session_id = Path(args.audio).name.split(".")[0]
    meta = {"audio": str(args.audio), "visual": str(args.visual), "grid_config_hash": grid_hash}
    return _run_model_session(world, settings, args, model, audio, visual, session_id, derive_seed(seed, "session", session_id), meta)


def _run_from_corpus(world: CorpusWorld, frontend: FrontEnd, settings: BaseSettings, args, seed: int) -> SessionTrace:
    if not world.conversations:
        raise ConfigurationError("the corpus has no conversations")
    index = 0 if args.conversation is None else args.conversation
    if not 0 <= index < len(world.conversations):
        raise ConfigurationError(f"conversation index {index} out of range 0..{len(world.conversations) - 1}")
    conv = world.conversations[index]
    frames = default_horizon(conv, world.grid) if args.frames is None else args.frames

    if args.ground_truth:
        trace = ground_truth_trace(conv, world.grid, world.vocab, horizon=frames)
        trace.meta["frames"] = frames
        return trace

    model = _load_model(world, settings, args.ckpt, seed, args.variant)
    frames = min(frames, model.config.max_context)
    rng_seed = derive_seed(seed, "session", conv.id)
    condition = MixCondition(args.condition)
    spec = None
    if condition != MixCondition.CLEAN:
        spf = world.grid.samples_per_frame(world.sample_rate)
        spec = world.augmenter.resolve(world.augmenter.eval_spec(np.random.default_rng(rng_seed), condition, args.snr), frames * spf)
    if frames == 0:
        audio = null_grid(GridKind.AUDIO, 0, frontend.config)
        visual = null_grid(GridKind.VISUAL, 0, frontend.config)
    else:
        audio, visual = frontend.encode(conv, frames, spec)
    meta = {"conversation": conv.id, "spec": spec.to_dict() if spec else None}
    return _run_model_session(world, settings, args, model, audio, visual, conv.id, rng_seed, meta)


def cmd_latency(settings: BaseSettings, args, out: Path, seed: int) -> Dict[str, Any]:
    """Algorithmic latency: one chunk plus the visual lookahead."""
    lookahead = settings.encoder.lookahead if args.lookahead is None else args.lookahead
    frame_ms = settings.grid.frame_duration * 1000.0
    return {"latency_ms": algorithmic_latency(lookahead, frame_ms, frame_ms), "lookahead_frames": lookahead, "frame_ms": frame_ms}


def cmd_replay(settings: BaseSettings, args, out: Path, seed: int) -> Dict[str, Any]:
    """Render a stored trace as a transcript, or rebuild a trace from a transcript."""
    path = Path(args.path)
    if not path.exists():
        raise ConfigurationError(f"no such file: {path}")
    text = path.read_text(encoding="utf-8")
    if args.from_transcript:
        trace = parse_transcript(text, session_id=path.stem)
        target = out / f"{path.stem}.trace.jsonl"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(trace.to_jsonl(), encoding="utf-8")
        return {"trace": str(target), "events": len(trace)}
    trace = SessionTrace.from_jsonl(text)
    print(render_trace(trace, FrameGrid.from_settings(settings.grid)), end="")
    return {"session_id": trace.session_id, "events": len(trace)}


def dumps(summary: Dict[str, Any]) -> str:
    return json.dumps(summary, sort_keys=True, default=str)
