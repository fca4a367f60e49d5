"""
Evaluation runner - streams held-out conversations through a model and scores them.

A case is one conversation under one corruption. The runner encodes it,
masks the modality under test, runs a full session, and scores the trace
(WER of the transcription, turn-taking offsets, judged responses) or the
teacher-forced target stream (perplexity). Cases run concurrently in worker
threads; results are aggregated in case order.
"""

import asyncio
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from agents.backbones import build_backbone
from agents.core.interfaces import BackboneInterface, SessionMode, SessionTrace
from agents.core.runner import RunnerConfig, SessionRunner, session_inputs
from agents.core.streamers import TransformerStreamer
from agents.helpers import derive_seed
from config.environments.base import BaseSettings
from corpus.conversation import USER, SyntheticConversation
from corpus.mixing import MixCondition, MixSpec
from corpus.world import CorpusWorld
from encoders.grids import FrontEnd, null_grid
from encoders.types import GridKind
from evaluation.judge import Judge, LexicalOverlapJudge, Preference, judge_turns, pickup_ratio, responses_by_frame
from evaluation.perplexity import NLLSum, sequence_nll
from evaluation.turns import FTORecord, TurnMetrics, conversation_records, fto_histogram, pooled_metrics
from evaluation.wer import EditCounts, edit_counts
from exceptions import ConfigurationError
from model.config import ModelVariant
from model.transformer import DuplexTransformer
from streams.align import align_transcript
from streams.targets import StreamInputs, build_stage2_dual_targets, build_unified_targets, default_horizon, teacher_forced
from streams.vocab import NULL_ID, join_pieces

logger = logging.getLogger(__name__)


class EvalTask(str, Enum):
    AVSR = "avsr"
    TURNS = "turns"
    PPL = "ppl"


class Modality(str, Enum):
    """Which input grids the model sees; the other one is replaced by NULL."""

    AUDIO = "a"
    VISUAL = "v"
    AUDIO_VISUAL = "av"


@dataclass(frozen=True)
class EvalCase:
    """One conversation under one corruption."""

    conversation: SyntheticConversation
    spec: MixSpec
    seed: int
    index: int = 0

    @property
    def session_id(self) -> str:
        return f"{self.conversation.id}-{self.index}"


@dataclass
class CaseResult:
    case_id: str
    conversation: str
    condition: str
    snr_db: Optional[float]
    edits: EditCounts = field(default_factory=EditCounts)
    records: List[FTORecord] = field(default_factory=list)
    preferences: List[Preference] = field(default_factory=list)
    nll: NLLSum = field(default_factory=NLLSum)
    trace: Optional[SessionTrace] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case_id,
            "conversation": self.conversation,
            "condition": self.condition,
            "snr_db": self.snr_db,
            "wer": self.edits.wer if self.edits.ref_length or self.edits.errors else None,
            "records": [r.to_dict() for r in self.records],
            "preferences": [p.value for p in self.preferences],
            "nll": self.nll.total,
            "n_tokens": self.nll.count,
        }


@dataclass
class EvalResult:
    """Aggregate over a set of cases.

    Attributes:
        wer: Corpus-level WER (summed errors over summed reference length)
        turns: Pooled turn-taking metrics
        pickup: Pickup ratio of judged responses
        perplexity: exp of the pooled mean NLL
        n: Number of cases
    """

    task: EvalTask
    modality: Modality
    condition: str
    snr_db: Optional[float]
    wer: float = math.nan
    turns: Optional[TurnMetrics] = None
    pickup: float = math.nan
    perplexity: float = math.nan
    n: int = 0
    cases: List[CaseResult] = field(default_factory=list)

    @property
    def records(self) -> List[FTORecord]:
        return [r for c in self.cases for r in c.records]


def make_cases(
    world: CorpusWorld,
    condition: MixCondition,
    n: int,
    seed: int,
    snr_db: Optional[float] = None,
    pool: Optional[Sequence[SyntheticConversation]] = None,
) -> List[EvalCase]:
    """`n` cases cycling over the held-out conversations.

    Case i draws its corruption from a seed of (seed, condition, snr, i), so
    two calls with equal arguments build identical cases.
    """
    pool = list(world.held_out if pool is None else pool)
    if not pool:
        raise ConfigurationError("no held-out conversations to evaluate; raise corpus.held_out_fraction")
    condition = MixCondition(condition)
    spf = world.grid.samples_per_frame(world.sample_rate)
    cases = []
    for i in range(n):
        conv = pool[i % len(pool)]
        case_seed = derive_seed(seed, "case", condition.value, "none" if snr_db is None else snr_db, i)
        spec = world.augmenter.eval_spec(np.random.default_rng(case_seed), condition, snr_db)
        spec = world.augmenter.resolve(spec, default_horizon(conv, world.grid) * spf)
        cases.append(EvalCase(conv, spec, derive_seed(seed, "session", conv.id), i))
    return cases


class Evaluator:
    """Scores one model on eval cases.

    Args:
        world: Corpus world the cases come from
        frontend: Encoder front-end
        model: Trained transformer; its parameters are shared read-only
        settings: Run settings (orchestrator and eval sections)
        make_backbone: Factory for a fresh response backbone per dual session
        judge: Response judge for the turn task
        name: Label used in reports
    """

    def __init__(
        self,
        world: CorpusWorld,
        frontend: FrontEnd,
        model: DuplexTransformer,
        settings: BaseSettings,
        make_backbone: Optional[Callable[[], BackboneInterface]] = None,
        judge: Optional[Judge] = None,
        name: str = "model",
    ):
        self.world = world
        self.frontend = frontend
        self.model = model
        self.settings = settings
        self.variant = model.config.variant
        self.mode = SessionMode.UNIFIED if self.variant.is_unified else SessionMode.DUAL
        self.make_backbone = make_backbone or (
            lambda: build_backbone(settings.orchestrator.backbone, world.lexicon, world.vocab)
        )
        self.judge = judge or LexicalOverlapJudge()
        self.name = name

    def check_task(self, task: EvalTask) -> None:
        """Reject task/model combinations that cannot produce the metric.

        Raises:
            ConfigurationError: For transcription on a unified model
        """
        if EvalTask(task) == EvalTask.AVSR and self.variant.is_unified:
            raise ConfigurationError("--task avsr needs a dual model; unified models have no transcription stream")

    def _inputs(self, case: EvalCase, modality: Modality, frames: int):
        audio, visual = self.frontend.encode(case.conversation, frames, case.spec)
        if modality == Modality.VISUAL:
            audio = null_grid(GridKind.AUDIO, frames, self.frontend.config)
        elif modality == Modality.AUDIO:
            visual = null_grid(GridKind.VISUAL, frames, self.frontend.config)
        return audio, visual

    def _horizon(self, conv: SyntheticConversation) -> int:
        frames = default_horizon(conv, self.world.grid)
        if frames > self.model.config.max_context:
            logger.info(f"{conv.id}: evaluating the first {self.model.config.max_context} of {frames} frames")
        return min(frames, self.model.config.max_context)

    def _session(self, case: EvalCase, audio, visual) -> SessionTrace:
        config = RunnerConfig.from_settings(
            self.settings.orchestrator,
            self.mode,
            case.seed,
            implicit_turns=self.variant == ModelVariant.UNIFIED_NO_SOT,
        )
        backbone = self.make_backbone() if self.mode == SessionMode.DUAL else None
        streamer = TransformerStreamer(self.model)
        inputs = session_inputs(audio, visual, case.session_id, {"conversation": case.conversation.id, "spec": case.spec.to_dict()})
        return SessionRunner(config, self.world.vocab).run(inputs, streamer, backbone)

    def _target_streams(self, conv: SyntheticConversation, frames: int) -> Tuple[np.ndarray, np.ndarray]:
        """(scored stream, previous turn tokens): the transcript for dual models, the response stream for unified ones."""
        grid, vocab = self.world.grid, self.world.vocab
        if self.variant == ModelVariant.DUAL:
            streams = build_stage2_dual_targets(conv, USER, grid, vocab, frames)
            return streams.U, teacher_forced(streams.T)
        R = build_unified_targets(conv, USER, grid, vocab, frames, strip_sot=self.variant == ModelVariant.UNIFIED_NO_SOT).R
        return R, np.full(frames, NULL_ID, dtype=np.int64)

    def _judge(self, trace: SessionTrace, conv: SyntheticConversation, records: List[FTORecord]) -> List[Preference]:
        by_frame = responses_by_frame(trace)
        grid = self.world.grid
        pairs = conv.responses(USER)[: len(records)]
        model_responses, gt_responses, references = [], [], []
        for record, (user_words, agent_words) in zip(records, pairs):
            frame = grid.frame_floor(record.agent_sot) if record.responded else None
            model_responses.append(by_frame.get(frame, []))
            gt_responses.append(agent_words)
            references.append(self.world.lexicon.respond(user_words))
        return judge_turns(model_responses, gt_responses, references, self.judge)

    def run_case(self, case: EvalCase, task: EvalTask, modality: Modality = Modality.AUDIO_VISUAL) -> CaseResult:
        task, modality = EvalTask(task), Modality(modality)
        conv = case.conversation
        frames = self._horizon(conv)
        audio, visual = self._inputs(case, modality, frames)
        result = CaseResult(case.session_id, conv.id, case.spec.condition.value, case.spec.snr_db)

        if task == EvalTask.PPL:
            tokens, prev_turn = self._target_streams(conv, frames)
            inputs = StreamInputs(audio.tokens, visual.features, visual.present, teacher_forced(tokens), prev_turn)
            # One transformer wrapper per case; forward_sequence keeps activations on the instance.
            scorer = DuplexTransformer(self.model.config, self.model.params)
            result.nll = sequence_nll(scorer, inputs, tokens)
            return result

        trace = self._session(case, audio, visual)
        result.trace = trace
        if task == EvalTask.AVSR:
            ref_tokens = align_transcript(conv.sides[USER].words, self.world.grid, frames, self.world.vocab).tokens
            if self.settings.eval.wer_unit == "token":
                ref = [self.world.vocab.piece_of(int(t)) for t in ref_tokens if self.world.vocab.is_text(int(t))]
                hyp = trace.user_pieces()
            else:
                ref = self.world.vocab.decode_words(ref_tokens)
                hyp = join_pieces(trace.user_pieces())
            result.edits = edit_counts(ref, hyp)
        else:
            result.records = conversation_records(trace, conv, self.world.grid, self.settings.eval.pairing_lookback)
            result.preferences = self._judge(trace, conv, result.records)
        return result

    async def _run_async(self, cases: Sequence[EvalCase], task: EvalTask, modality: Modality, workers: int) -> List[CaseResult]:
        semaphore = asyncio.Semaphore(max(1, workers))

        async def one(case: EvalCase) -> CaseResult:
            async with semaphore:
                return await asyncio.to_thread(self.run_case, case, task, modality)

        return list(await asyncio.gather(*(one(case) for case in cases)))

    def run_cases(self, cases: Sequence[EvalCase], task: EvalTask, modality: Modality, workers: int = 1) -> List[CaseResult]:
        if workers <= 1:
            return [self.run_case(case, task, modality) for case in cases]
        # Audio and the interferer pool are built lazily; build them before the threads start.
        _ = self.world.augmenter
        return asyncio.run(self._run_async(cases, task, modality, workers))

    def evaluate(
        self,
        cases: Sequence[EvalCase],
        task: EvalTask,
        modality: Modality = Modality.AUDIO_VISUAL,
        condition: Optional[str] = None,
        snr_db: Optional[float] = None,
        workers: Optional[int] = None,
    ) -> EvalResult:
        task, modality = EvalTask(task), Modality(modality)
        self.check_task(task)
        workers = self.settings.eval.workers if workers is None else workers
        results = self.run_cases(cases, task, modality, workers)
        condition = condition or (cases[0].spec.condition.value if cases else "clean")
        out = EvalResult(task, modality, condition, snr_db, n=len(results), cases=results)

        if task == EvalTask.AVSR:
            total = EditCounts()
            for r in results:
                total = total + r.edits
            out.wer = total.wer if results else math.nan
        elif task == EvalTask.TURNS:
            out.turns = pooled_metrics([r.records for r in results], tuple(self.settings.eval.response_window))
            out.pickup = pickup_ratio([p for r in results for p in r.preferences])
        else:
            total = NLLSum()
            for r in results:
                total = total + r.nll
            out.perplexity = total.perplexity
        logger.info(
            f"{self.name} {task.value}/{modality.value}/{condition} snr={snr_db}: "
            f"wer={out.wer:.3f} ratio={out.turns.response_ratio if out.turns else math.nan:.3f} "
            f"ppl={out.perplexity:.3f} n={out.n}"
        )
        return out

    def histogram(self, result: EvalResult):
        eval_settings = self.settings.eval
        return fto_histogram(result.records, eval_settings.histogram_bin, -eval_settings.pairing_lookback, eval_settings.histogram_max)
