"""Duplex session runner.

Walks the input grids frame by frame, steps the model, and drives the
LISTENING/SPEAKING state machine. In DUAL mode the model's text head
transcribes the user and its turn head decides when to take the floor; the
response comes from a backbone, one piece per frame. In UNIFIED mode the
model's single head produces turn tokens and response pieces itself.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from agents.core.interfaces import (
    BackboneInterface,
    DialogueMode,
    LatencyBudget,
    SessionInputs,
    SessionMode,
    SessionTrace,
    StreamingModel,
    TraceEventKind,
)
from config.environments.base import OrchestratorSettings
from encoders.types import AcousticTokenGrid, VisualFeatureGrid
from exceptions import GridMismatchError, SessionError
from model.decode import decode
from model.transformer import TEXT_HEAD, TURN_HEAD
from streams.vocab import BACKCHANNEL_ID, BOS_ID, EMP_ID, EOS_ID, NULL_ID, SOT_ID, TURN_TOKEN_IDS, Vocabulary

logger = logging.getLogger(__name__)


def algorithmic_latency(lookahead_frames: int = 2, chunk_ms: float = 40.0, frame_ms: float = 40.0) -> float:
    """Chunk size plus visual lookahead, in milliseconds."""
    return LatencyBudget(chunk_ms, lookahead_frames, frame_ms).total_ms


@dataclass
class RunnerConfig:
    """Configuration for one session.

    Attributes:
        mode: DUAL or UNIFIED
        debounce_frames: Consecutive non-EMP user tokens needed to yield the floor
        max_response_tokens: Cap on agent tokens per turn
        backchannel_ack: Acknowledgement recorded for a decoded BACKCHANNEL
        temperature: 0 for greedy decoding
        seed: Sampling seed
        implicit_turns: Treat the first response token of a unified model as a turn start
    """

    mode: SessionMode = SessionMode.DUAL
    debounce_frames: int = 1
    max_response_tokens: int = 24
    backchannel_ack: str = "mhm"
    temperature: float = 0.0
    seed: int = 0
    implicit_turns: bool = False

    @classmethod
    def from_settings(cls, settings: OrchestratorSettings, mode: SessionMode, seed: int = 0, implicit_turns: bool = False) -> "RunnerConfig":
        return cls(
            mode=SessionMode(mode),
            debounce_frames=settings.debounce_frames,
            max_response_tokens=settings.max_response_tokens,
            backchannel_ack=settings.backchannel_ack,
            temperature=settings.temperature,
            seed=seed,
            implicit_turns=implicit_turns,
        )


class SessionRunner:
    """Runs one session at a time; call `run` once per session.

    Args:
        config: Session configuration
        vocab: Vocabulary shared with the model
    """

    def __init__(self, config: RunnerConfig, vocab: Vocabulary):
        self.config = config
        self.vocab = vocab

    def run(
        self,
        inputs: SessionInputs,
        model: StreamingModel,
        backbone: Optional[BackboneInterface] = None,
    ) -> SessionTrace:
        """Run the state machine over every frame of `inputs`.

        Raises:
            SessionError: If the model's heads do not match the mode, or DUAL has no backbone
        """
        mode = self.config.mode
        if mode == SessionMode.DUAL and TURN_HEAD not in model.head_names:
            raise SessionError("dual sessions need a model with a turn head")
        if mode == SessionMode.UNIFIED and TURN_HEAD in model.head_names:
            raise SessionError("unified sessions need a single-head model")
        if mode == SessionMode.DUAL and backbone is None:
            raise SessionError("dual sessions need a response backbone")

        model.reset()
        if backbone is not None:
            backbone.reset()
        self._rng = np.random.default_rng(self.config.seed)
        trace = SessionTrace(
            session_id=inputs.session_id,
            meta={
                "mode": mode.value,
                "frames": inputs.frames,
                "seed": self.config.seed,
                "backbone": getattr(backbone, "name", None),
                **inputs.meta,
            },
        )
        if mode == SessionMode.DUAL:
            self._run_dual(inputs, model, backbone, trace)
        else:
            self._run_unified(inputs, model, trace)
        logger.debug(f"Session {inputs.session_id}: {inputs.frames} frames, {len(trace)} events, {len(trace.sot_frames())} turns")
        return trace

    def _decode(self, logits: np.ndarray) -> int:
        return decode(logits, self.config.temperature, self._rng)

    def _run_dual(self, inputs: SessionInputs, model: StreamingModel, backbone: BackboneInterface, trace: SessionTrace) -> None:
        state = DialogueMode.LISTENING
        response: Optional[Iterator[str]] = None
        emitted = 0
        user_run = 0
        prev_text, prev_turn = BOS_ID, BOS_ID

        for n in range(inputs.frames):
            logits = model.step(*inputs.frame(n), prev_text, prev_turn)
            u = self._decode(logits[TEXT_HEAD])
            t = TURN_TOKEN_IDS[self._decode(logits[TURN_HEAD])]
            prev_text, prev_turn = u, t

            if self.vocab.is_text(u):
                piece = self.vocab.piece_of(u)
                trace.append(n, TraceEventKind.USER_TOKEN, token=piece)
                user_run += 1
                if state == DialogueMode.SPEAKING and user_run >= self.config.debounce_frames:
                    trace.append(n, TraceEventKind.YIELD)
                    trace.append(n, TraceEventKind.STATE_CHANGE, mode=DialogueMode.LISTENING.value, reason="yield")
                    state, response = DialogueMode.LISTENING, None
                if state == DialogueMode.LISTENING:
                    backbone.ingest_user_token(piece)
            else:
                user_run = 0

            if state == DialogueMode.SPEAKING:
                piece = next(response, None) if emitted < self.config.max_response_tokens else None
                if piece is None:
                    trace.append(n, TraceEventKind.STATE_CHANGE, mode=DialogueMode.LISTENING.value, reason="complete")
                    state, response = DialogueMode.LISTENING, None
                else:
                    trace.append(n, TraceEventKind.AGENT_TOKEN, token=piece)
                    emitted += 1

            if t == SOT_ID:
                trace.append(n, TraceEventKind.TURN_TOKEN, token="SOT")
                if state == DialogueMode.LISTENING:
                    trace.append(n, TraceEventKind.STATE_CHANGE, mode=DialogueMode.SPEAKING.value)
                    state, response, emitted = DialogueMode.SPEAKING, iter(backbone.on_turn()), 0
                    user_run = 0
            elif t == BACKCHANNEL_ID:
                trace.append(n, TraceEventKind.TURN_TOKEN, token="BACKCHANNEL")
                if state == DialogueMode.LISTENING:
                    trace.append(n, TraceEventKind.BACKCHANNEL, ack=self.config.backchannel_ack)

    def _run_unified(self, inputs: SessionInputs, model: StreamingModel, trace: SessionTrace) -> None:
        state = DialogueMode.LISTENING
        emitted = 0
        prev = BOS_ID

        for n in range(inputs.frames):
            logits = model.step(*inputs.frame(n), prev, NULL_ID)
            r = self._decode(logits[TEXT_HEAD])
            prev = r

            if state == DialogueMode.SPEAKING:
                if self.vocab.is_text(r) and emitted < self.config.max_response_tokens:
                    trace.append(n, TraceEventKind.AGENT_TOKEN, token=self.vocab.piece_of(r))
                    emitted += 1
                    continue
                trace.append(n, TraceEventKind.STATE_CHANGE, mode=DialogueMode.LISTENING.value, reason="complete")
                state = DialogueMode.LISTENING

            if r == SOT_ID:
                trace.append(n, TraceEventKind.TURN_TOKEN, token="SOT")
                trace.append(n, TraceEventKind.STATE_CHANGE, mode=DialogueMode.SPEAKING.value)
                state, emitted = DialogueMode.SPEAKING, 0
            elif r == BACKCHANNEL_ID:
                trace.append(n, TraceEventKind.TURN_TOKEN, token="BACKCHANNEL")
                trace.append(n, TraceEventKind.BACKCHANNEL, ack=self.config.backchannel_ack)
            elif self.vocab.is_text(r) and self.config.implicit_turns:
                # The first response piece of a model trained without SOT opens the turn.
                trace.append(n, TraceEventKind.TURN_TOKEN, token="SOT", implicit=True)
                trace.append(n, TraceEventKind.STATE_CHANGE, mode=DialogueMode.SPEAKING.value)
                trace.append(n, TraceEventKind.AGENT_TOKEN, token=self.vocab.piece_of(r))
                state, emitted = DialogueMode.SPEAKING, 1
            elif r not in (EMP_ID, NULL_ID, EOS_ID):
                logger.debug(f"Frame {n}: ignoring token {self.vocab.piece_of(r)!r} while listening")


def session_inputs(
    audio: AcousticTokenGrid,
    visual: VisualFeatureGrid,
    session_id: str = "session",
    meta: Optional[dict] = None,
) -> SessionInputs:
    """Pair the two grids of a session, checking they cover the same frames."""
    if audio.frames != visual.frames:
        raise GridMismatchError(audio.frames, visual.frames)
    return SessionInputs(audio.tokens, visual.features, visual.present, session_id, dict(meta or {}))


def run_session(
    audio: AcousticTokenGrid,
    visual: VisualFeatureGrid,
    model: StreamingModel,
    backbone: Optional[BackboneInterface],
    mode: SessionMode,
    vocab: Vocabulary,
    seed: int = 0,
    settings: Optional[OrchestratorSettings] = None,
    implicit_turns: bool = False,
    session_id: str = "session",
) -> SessionTrace:
    """Functional entry point over `SessionRunner`."""
    config = RunnerConfig.from_settings(settings or OrchestratorSettings(), mode, seed, implicit_turns)
    return SessionRunner(config, vocab).run(session_inputs(audio, visual, session_id), model, backbone)
