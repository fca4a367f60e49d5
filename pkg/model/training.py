"""Two-stage training.

Stage 1 aligns the modalities with the text space through four tasks
(text continuation, ASR, audio captioning, AVSR). Stage 2 trains on whole
conversations: the dual model learns the delayed transcript and the turn
stream, the unified model learns one interleaved response stream.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO

import numpy as np
from pydantic import BaseModel

from agents.helpers import derive_seed
from config.environments.base import BaseSettings, OptimSettings
from corpus.conversation import USER, SideScript, SyntheticConversation
from corpus.synth import Waveform
from corpus.world import CorpusWorld
from encoders.grids import FrontEnd
from encoders.visual import visual_encode
from exceptions import DataError, NonFiniteLossError
from model.config import ModelConfig, ModelVariant
from model.loss import StreamTarget, dual_targets, stream_target, unified_targets, weighted_ce_loss
from model.optim import AdamW
from model.params import Parameters, init_parameters
from model.transformer import TEXT_HEAD, DuplexTransformer
from streams.targets import (
    Stage1Payload,
    Stage1Sample,
    Stage1Task,
    StreamInputs,
    build_stage1_targets,
    build_stage2_dual_targets,
    build_unified_targets,
    default_horizon,
    teacher_forced,
)
from streams.types import StreamKind, WordTiming
from streams.vocab import NULL_ID, SOT_ID

logger = logging.getLogger(__name__)

SEGMENT_MARGIN = 0.1
CAPTION_SECONDS = (1.0, 2.0)
AUDIO_ONLY = "audio_only"
AUDIO_VISUAL = "audio_visual"


class LossRecord(BaseModel):
    step: int
    task: str
    loss: float


class LossLog:
    """Line-delimited {step, task, loss} records, optionally mirrored to a file."""

    def __init__(self, path: Optional[Path] = None):
        self.records: List[LossRecord] = []
        self._fh: Optional[TextIO] = None
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(path, "w", encoding="utf-8")

    def append(self, step: int, task: str, loss: float) -> None:
        record = LossRecord(step=step, task=task, loss=loss)
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(record.model_dump_json() + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def mean(self, task: Optional[str] = None, last: Optional[int] = None) -> float:
        values = [r.loss for r in self.records if task is None or r.task == task]
        if last is not None:
            values = values[-last:]
        return float(np.mean(values)) if values else float("nan")


@dataclass
class TrainingSample:
    task: str
    inputs: StreamInputs
    targets: Dict[str, StreamTarget]
    meta: Dict = field(default_factory=dict)


@dataclass
class TrainResult:
    params: Parameters
    steps: int
    log: LossLog


def _categorical(rng: np.random.Generator, mixture: Dict[str, float]) -> str:
    names = sorted(mixture)
    return names[int(rng.choice(len(names), p=[mixture[n] for n in names]))]


class Trainer:
    """Shared optimisation loop: sample, forward, weighted loss, backward, clip, step.

    Args:
        world: Corpus world
        frontend: Encoders over the same world
        settings: Resolved run settings
        model_config: Model shape
        optim: Optimizer settings of this stage
        seed: Seed for sampling and augmentation
        params: Initial parameters; a fresh init when None
    """

    stage = "stage"

    def __init__(
        self,
        world: CorpusWorld,
        frontend: FrontEnd,
        settings: BaseSettings,
        model_config: ModelConfig,
        optim: OptimSettings,
        seed: int,
        params: Optional[Parameters] = None,
    ):
        self.world = world
        self.frontend = frontend
        self.settings = settings
        self.config = model_config
        self.seed = seed
        self.params = params.copy() if params is not None else init_parameters(model_config, derive_seed(seed, "init"))
        self.model = DuplexTransformer(model_config, self.params)
        self.optimizer = AdamW(self.params, optim)
        self.rng = np.random.default_rng(derive_seed(seed, self.stage))

    @property
    def pool(self) -> List[SyntheticConversation]:
        if not self.world.train:
            raise DataError("training split is empty")
        return self.world.train

    def sample(self, rng: np.random.Generator, pool: Sequence[SyntheticConversation]) -> TrainingSample:
        raise NotImplementedError

    def sample_loss(self, sample: TrainingSample, scale: float = 1.0, backward: bool = True) -> float:
        out = self.model.forward_sequence(sample.inputs)
        loss, grads = weighted_ce_loss(out.logits, sample.targets)
        if backward:
            self.model.backward({k: g * scale for k, g in grads.items()})
        return loss

    def train(self, steps: int, batch_size: int, log: Optional[LossLog] = None) -> TrainResult:
        """Run `steps` optimizer steps; zero steps returns the initial parameters.

        Raises:
            NonFiniteLossError: When any sample produces a NaN or infinite loss
        """
        log = log or LossLog()
        for step in range(steps):
            self.params.zero_grad()
            batch = [self.sample(self.rng, self.pool) for _ in range(batch_size)]
            for sample in batch:
                loss = self.sample_loss(sample, scale=1.0 / batch_size)
                if not np.isfinite(loss):
                    raise NonFiniteLossError(step, sample.task, loss)
                log.append(step, sample.task, loss)
            norm = self.optimizer.clip_gradients()
            if not np.isfinite(norm):
                raise NonFiniteLossError(step, batch[0].task, norm)
            self.optimizer.step()
            if step % 50 == 0 or step == steps - 1:
                logger.info(f"{self.stage} step {step}/{steps}: loss {log.mean(last=batch_size * 10):.4f}, grad norm {norm:.3f}")
        return TrainResult(params=self.params, steps=steps, log=log)

    def evaluate(self, pool: Sequence[SyntheticConversation], n_samples: int, seed: int) -> Dict[str, float]:
        """Mean loss per task on `n_samples` fixed draws from `pool`, without updates."""
        rng = np.random.default_rng(seed)
        losses: Dict[str, List[float]] = {}
        for _ in range(n_samples):
            sample = self.sample(rng, pool)
            losses.setdefault(sample.task, []).append(self.sample_loss(sample, backward=False))
        return {task: float(np.mean(v)) for task, v in sorted(losses.items())}


def segment_side(side: SideScript, words: Sequence[WordTiming], t0: float) -> SideScript:
    """The given words of `side`, re-timed relative to `t0`."""
    return SideScript(words=[WordTiming(w.word, w.t_start - t0, w.t_end - t0) for w in words], turns=[])


class Stage1Trainer(Trainer):
    """Multi-task alignment over text, ASR, captioning and AVSR samples."""

    stage = "stage1"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.stage_settings = self.settings.stage1

    def sample_task(self, rng: np.random.Generator) -> Stage1Task:
        return Stage1Task(_categorical(rng, self.stage_settings.mixture))

    def _user_floor(self, rng: np.random.Generator, pool: Sequence[SyntheticConversation]):
        for _ in range(32):
            conv = pool[int(rng.integers(len(pool)))]
            floors = [words for _, words in conv.sides[USER].floor_segments() if words]
            if floors:
                return conv, floors[int(rng.integers(len(floors)))]
        raise DataError("no user floor with words in the conversation pool")

    def _speech_payload(self, task: Stage1Task, rng: np.random.Generator, pool: Sequence[SyntheticConversation]) -> Stage1Payload:
        conv, words = self._user_floor(rng, pool)
        grid = self.world.grid
        spf = grid.samples_per_frame(self.world.sample_rate)
        max_body = self.stage_settings.max_frames - 2
        while True:
            t0 = max(0.0, words[0].t_start - SEGMENT_MARGIN)
            f0 = grid.frame_floor(t0)
            f1 = grid.frame_ceil(words[-1].t_end + SEGMENT_MARGIN)
            n_pieces = len(self.world.vocab.encode_words([w.word for w in words]))
            if (f1 - f0) + n_pieces <= max_body or len(words) == 1:
                break
            words = words[:-1]

        full = self.world.side_waveform(conv, USER).fit(max(f1, 1) * spf)
        clean = Waveform(full.samples[f0 * spf:f1 * spf], full.sample_rate)
        heard = clean
        if task == Stage1Task.AVSR:
            heard, _ = self.world.augmenter.augment(clean, rng)
        audio = self.frontend.encode_waveform(heard).tokens
        visual = None
        if task == Stage1Task.AVSR:
            script = segment_side(conv.sides[USER], words, grid.to_seconds(f0))
            visual = visual_encode(script, clean, self.frontend.config, frames=len(audio), fps=grid.fps).features
        return Stage1Payload(words=[w.word for w in words], audio=audio, visual=visual)

    def _caption_payload(self, rng: np.random.Generator) -> Stage1Payload:
        bank = self.world.noise_bank
        clip = bank.clip(int(rng.integers(len(bank))))
        seconds = float(rng.uniform(*CAPTION_SECONDS))
        waveform = bank.render(clip.noise_id, int(seconds * bank.sample_rate), float(rng.random()))
        return Stage1Payload(words=list(clip.caption), audio=self.frontend.encode_waveform(waveform).tokens)

    def _text_payload(self, rng: np.random.Generator, pool: Sequence[SyntheticConversation]) -> Stage1Payload:
        _, words = self._user_floor(rng, pool)
        user = [w.word for w in words]
        return Stage1Payload(words=user + self.world.lexicon.respond(user))

    def build_sample(self, task: Stage1Task, rng: np.random.Generator, pool: Sequence[SyntheticConversation]) -> Stage1Sample:
        if task == Stage1Task.TEXT:
            payload = self._text_payload(rng, pool)
        elif task == Stage1Task.CAPTION:
            payload = self._caption_payload(rng)
        else:
            payload = self._speech_payload(task, rng, pool)
        return build_stage1_targets(task, payload, self.world.vocab, self.config.visual_dim)

    def sample(self, rng: np.random.Generator, pool: Sequence[SyntheticConversation]) -> TrainingSample:
        task = self.sample_task(rng)
        built = self.build_sample(task, rng, pool)
        target = stream_target(built.target, StreamKind.AVSR, self.world.vocab, self.settings.loss_weights)
        return TrainingSample(task=task.value, inputs=built.inputs, targets={TEXT_HEAD: target}, meta=built.meta)


class Stage2Trainer(Trainer):
    """Conversation training for the dual and unified variants."""

    stage = "stage2"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.stage_settings = self.settings.stage2
        self.variant = self.config.variant

    def targets_for(self, conv: SyntheticConversation, horizon: int):
        """(previous-token inputs, loss targets) for one conversation."""
        vocab, weights, grid = self.world.vocab, self.settings.loss_weights, self.world.grid
        if self.variant == ModelVariant.DUAL:
            streams = build_stage2_dual_targets(conv, USER, grid, vocab, horizon)
            return (teacher_forced(streams.U), teacher_forced(streams.T)), dual_targets(streams.U, streams.T, vocab, weights)
        unified = build_unified_targets(conv, USER, grid, vocab, horizon, strip_sot=self.variant == ModelVariant.UNIFIED_NO_SOT)
        no_turn = np.full(horizon, NULL_ID, dtype=np.int64)
        return (teacher_forced(unified.R), no_turn), unified_targets(unified.R, vocab, weights)

    def verify_no_sot(self) -> None:
        """Check every training conversation's targets are SOT-free for the no-SOT variant."""
        if self.variant != ModelVariant.UNIFIED_NO_SOT:
            return
        for conv in self.pool:
            R = build_unified_targets(conv, USER, self.world.grid, self.world.vocab, strip_sot=True).R
            if np.any(R == SOT_ID):
                raise DataError(f"{conv.id}: SOT found in targets of a no-SOT model")
        logger.info(f"Verified {len(self.pool)} unified targets are SOT-free")

    def build_sample(
        self,
        conv: SyntheticConversation,
        source: str,
        rng: Optional[np.random.Generator],
        window: Optional[int] = None,
    ) -> TrainingSample:
        """Encode one conversation; `rng=None` keeps it clean and uncropped."""
        grid = self.world.grid
        horizon = min(default_horizon(conv, grid), self.config.max_context)
        spec = None
        if rng is not None:
            spf = grid.samples_per_frame(self.world.sample_rate)
            augmenter = self.world.augmenter
            spec = augmenter.resolve(augmenter.draw_spec(rng), horizon * spf)
        audio, visual = self.frontend.encode(conv, horizon, spec)
        (prev_text, prev_turn), targets = self.targets_for(conv, horizon)
        inputs = StreamInputs(audio.tokens, visual.features, visual.present, prev_text, prev_turn)
        if source == AUDIO_ONLY:
            inputs = inputs.without_visual()

        start = 0
        if window is not None and horizon > window:
            start = int(rng.integers(0, horizon - window + 1)) if rng is not None else 0
            stop = start + window
            inputs = inputs.window(start, stop)
            targets = {
                name: StreamTarget(t.classes[start:stop], t.weights[start:stop], t.valid[start:stop])
                for name, t in targets.items()
            }
        meta = {"conversation": conv.id, "spec": spec.to_dict() if spec else None, "start": start}
        return TrainingSample(task=source, inputs=inputs, targets=targets, meta=meta)

    def sample(self, rng: np.random.Generator, pool: Sequence[SyntheticConversation]) -> TrainingSample:
        source = _categorical(rng, self.stage_settings.mixture)
        conv = pool[int(rng.integers(len(pool)))]
        return self.build_sample(conv, source, rng, self.stage_settings.window_frames)

    def heldout_loss(self, pool: Optional[Sequence[SyntheticConversation]] = None) -> Dict[str, float]:
        """Per-head loss on clean audio-visual held-out conversations."""
        pool = self.world.held_out if pool is None else pool
        per_head: Dict[str, List[float]] = {}
        for conv in pool:
            sample = self.build_sample(conv, AUDIO_VISUAL, None)
            out = self.model.forward_sequence(sample.inputs)
            for name, target in sample.targets.items():
                loss, _ = weighted_ce_loss({name: out.logits[name]}, {name: target})
                per_head.setdefault(name, []).append(loss)
        return {name: float(np.mean(v)) for name, v in sorted(per_head.items())}


def train_stage1(
    world: CorpusWorld,
    frontend: FrontEnd,
    settings: BaseSettings,
    model_config: ModelConfig,
    seed: int,
    params: Optional[Parameters] = None,
    steps: Optional[int] = None,
    log: Optional[LossLog] = None,
) -> TrainResult:
    trainer = Stage1Trainer(world, frontend, settings, model_config, settings.stage1.optim, seed, params)
    steps = settings.stage1.steps if steps is None else steps
    return trainer.train(steps, settings.stage1.batch_size, log)


def train_stage2(
    world: CorpusWorld,
    frontend: FrontEnd,
    settings: BaseSettings,
    model_config: ModelConfig,
    seed: int,
    params: Optional[Parameters] = None,
    steps: Optional[int] = None,
    log: Optional[LossLog] = None,
) -> TrainResult:
    """Conversation stage from `params` (a stage-1 result) or from scratch.

    Stage-1 parameters load by name, so a dual stage-1 run can initialise a
    unified model; heads absent from `params` keep their fresh init.
    """
    init = init_parameters(model_config, derive_seed(seed, "init"))
    if params is not None:
        copied = init.load_matching(params)
        logger.info(f"Initialised {len(copied)}/{len(init)} tensors from stage-1 parameters")
    trainer = Stage2Trainer(world, frontend, settings, model_config, settings.stage2.optim, seed, init)
    trainer.verify_no_sot()
    steps = settings.stage2.steps if steps is None else steps
    return trainer.train(steps, settings.stage2.batch_size, log)
