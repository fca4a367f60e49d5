"""Model inputs and targets for the Stage-1 tasks, Stage-2 dual training and the unified model."""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Any, Dict, Optional, Sequence

import numpy as np

from exceptions import DataError, GridMismatchError, HorizonMismatchError, UnknownTaskError
from streams.align import align_transcript, align_turn_events
from streams.grid import FrameGrid
from streams.types import AlignedTargetStreams, TurnKind, UnifiedTargetStream
from streams.vocab import (
    AC_ID,
    ASR_ID,
    BACKCHANNEL_ID,
    BOS_ID,
    EMP_ID,
    EOS_ID,
    NULL_CODE,
    NULL_ID,
    SOT_ID,
    TRANS_ID,
    Vocabulary,
)

if TYPE_CHECKING:
    from corpus.conversation import SyntheticConversation

logger = logging.getLogger(__name__)

N_CODEBOOKS = 16


class Stage1Task(str, Enum):
    TEXT = "text"
    ASR = "asr"
    AVSR = "avsr"
    CAPTION = "caption"


TASK_PREFIX = {Stage1Task.ASR: ASR_ID, Stage1Task.AVSR: TRANS_ID, Stage1Task.CAPTION: AC_ID}


def teacher_forced(target: np.ndarray) -> np.ndarray:
    """Previous-token stream: BOS at frame 0, then the target shifted by one."""
    prev = np.empty(len(target), dtype=np.int64)
    if len(target):
        prev[0] = BOS_ID
        prev[1:] = target[:-1]
    return prev


@dataclass
class StreamInputs:
    """Frame-aligned model inputs.

    Attributes:
        audio: (F, 16) acoustic codes; NULL_CODE marks a missing frame
        visual: (F, D_v) visual features
        visual_present: (F,) False where the visual frame is NULL
        prev_text: (F,) previous text-stream (or unified-stream) token
        prev_turn: (F,) previous turn-stream token; NULL when unused
    """

    audio: np.ndarray
    visual: np.ndarray
    visual_present: np.ndarray
    prev_text: np.ndarray
    prev_turn: np.ndarray

    def __post_init__(self):
        frames = len(self.audio)
        if self.audio.ndim != 2 or self.audio.shape[1] != N_CODEBOOKS:
            raise DataError(f"audio grid must have {N_CODEBOOKS} codebook columns, got shape {self.audio.shape}")
        if len(self.visual) != frames or len(self.visual_present) != frames:
            raise GridMismatchError(frames, len(self.visual))
        for name in ("prev_text", "prev_turn"):
            if len(getattr(self, name)) != frames:
                raise HorizonMismatchError(frames, len(getattr(self, name)), name)

    @property
    def frames(self) -> int:
        return len(self.audio)

    @classmethod
    def empty(cls, frames: int, visual_dim: int) -> "StreamInputs":
        """All-NULL inputs of the given length."""
        return cls(
            audio=np.full((frames, N_CODEBOOKS), NULL_CODE, dtype=np.int64),
            visual=np.zeros((frames, visual_dim)),
            visual_present=np.zeros(frames, dtype=bool),
            prev_text=np.full(frames, NULL_ID, dtype=np.int64),
            prev_turn=np.full(frames, NULL_ID, dtype=np.int64),
        )

    def without_audio(self) -> "StreamInputs":
        return replace(self, audio=np.full_like(self.audio, NULL_CODE))

    def without_visual(self) -> "StreamInputs":
        return replace(self, visual=np.zeros_like(self.visual), visual_present=np.zeros_like(self.visual_present))

    def window(self, start: int, stop: int) -> "StreamInputs":
        return StreamInputs(
            self.audio[start:stop], self.visual[start:stop], self.visual_present[start:stop],
            self.prev_text[start:stop], self.prev_turn[start:stop],
        )


@dataclass
class Stage1Payload:
    """Task material: words plus whichever modality grids the task uses."""

    words: Sequence[str] = ()
    audio: Optional[np.ndarray] = None
    visual: Optional[np.ndarray] = None


@dataclass
class Stage1Sample:
    task: Stage1Task
    inputs: StreamInputs
    target: np.ndarray
    mask: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)


def build_stage1_targets(task: str, payload: Stage1Payload, vocab: Vocabulary, visual_dim: int) -> Stage1Sample:
    """Lay out one Stage-1 sample.

    Audio tasks present their modality frames first with NULL targets, then
    the task prefix, the transcript and EOS. TEXT has no modality frames and
    no prefix. Frames where a modality is absent are NULL in the inputs, and
    NULL target frames carry zero loss.

    Args:
        task: One of text, asr, avsr, caption
        payload: Words and modality grids
        vocab: Vocabulary
        visual_dim: Width of the visual grid

    Returns:
        Inputs, target stream and loss mask of equal length

    Raises:
        UnknownTaskError: For any other task name
        DataError: If the payload does not match the task
    """
    try:
        task = Stage1Task(task)
    except ValueError:
        raise UnknownTaskError(str(task))

    needs_audio = task != Stage1Task.TEXT
    needs_visual = task == Stage1Task.AVSR
    if needs_audio != (payload.audio is not None) or (needs_visual and payload.visual is None):
        raise DataError(
            f"payload does not match task {task.value}",
            details={"audio": payload.audio is not None, "visual": payload.visual is not None},
        )
    if task != Stage1Task.AVSR and payload.visual is not None:
        raise DataError(f"task {task.value} takes no visual payload")

    n_audio = len(payload.audio) if needs_audio else 0
    if needs_visual and len(payload.visual) != n_audio:
        raise GridMismatchError(n_audio, len(payload.visual))

    body = vocab.encode_words(payload.words)
    prefix = [TASK_PREFIX[task]] if task in TASK_PREFIX else []
    target = np.array([NULL_ID] * n_audio + prefix + body + [EOS_ID], dtype=np.int64)
    frames = len(target)

    inputs = StreamInputs.empty(frames, visual_dim)
    if needs_audio:
        inputs.audio[:n_audio] = payload.audio
    if needs_visual:
        inputs.visual[:n_audio] = payload.visual
        inputs.visual_present[:n_audio] = True
    inputs.prev_text[:] = teacher_forced(target)

    mask = (target != NULL_ID).astype(np.float64)
    return Stage1Sample(task=task, inputs=inputs, target=target, mask=mask, meta={"n_modality_frames": n_audio})


def default_horizon(conv: "SyntheticConversation", grid: FrameGrid) -> int:
    return grid.frames_for(conv.duration) + grid.recognition_delay


def build_stage2_dual_targets(
    conv: "SyntheticConversation",
    user_side: int,
    grid: FrameGrid,
    vocab: Vocabulary,
    horizon: Optional[int] = None,
) -> AlignedTargetStreams:
    """U = user words delayed by d; T = the other side's turn events, undelayed."""
    horizon = default_horizon(conv, grid) if horizon is None else horizon
    user = conv.sides[user_side]
    agent = conv.sides[1 - user_side]
    text = align_transcript(user.words, grid, horizon, vocab)
    turns = align_turn_events(agent.turns, grid, horizon)
    if text.horizon != turns.horizon:
        raise HorizonMismatchError(text.horizon, turns.horizon, "T")
    return AlignedTargetStreams(
        U=text.tokens,
        T=turns.tokens,
        meta={
            "conversation": conv.id,
            "user_side": user_side,
            "dropped_words": text.dropped,
            "dropped_events": turns.dropped,
            "shifted_events": turns.shifted,
        },
    )


def build_unified_targets(
    conv: "SyntheticConversation",
    user_side: int,
    grid: FrameGrid,
    vocab: Vocabulary,
    horizon: Optional[int] = None,
    strip_sot: bool = False,
) -> UnifiedTargetStream:
    """Interleave the agent's turn events with its response pieces.

    SOT and BACKCHANNEL land on ``frame_floor(t_turn)``; each response starts
    on the frame after its SOT. An event that falls inside the previous
    response moves to the first free frame. With `strip_sot` the SOT frame
    stays EMP and only the response pieces remain.
    """
    horizon = default_horizon(conv, grid) if horizon is None else horizon
    agent = conv.sides[1 - user_side]
    R = np.full(horizon, EMP_ID, dtype=np.int64)

    responses = {id(turn): words for turn, words in agent.floor_segments()}
    next_free = 0
    spilled = 0
    dropped = 0

    def put(frame: int, token: int) -> None:
        nonlocal dropped
        if frame < horizon:
            R[frame] = token
        else:
            dropped += 1

    for event in agent.turns:
        frame = grid.frame_floor(event.t_turn)
        if frame < next_free:
            logger.info(f"{conv.id}: agent event at {event.t_turn:.3f}s overlaps the previous response; moved to frame {next_free}")
            frame = next_free
            spilled += 1
        if event.kind == TurnKind.BACKCHANNEL:
            put(frame, BACKCHANNEL_ID)
            next_free = frame + 1
            continue
        put(frame, EMP_ID if strip_sot else SOT_ID)
        pieces = vocab.encode_words([w.word for w in responses.get(id(event), [])])
        for k, token in enumerate(pieces):
            put(frame + 1 + k, token)
        next_free = frame + 1 + len(pieces)

    if dropped:
        logger.warning(f"{conv.id}: unified targets dropped {dropped} tokens beyond horizon {horizon}")
    return UnifiedTargetStream(
        R=R,
        meta={"conversation": conv.id, "user_side": user_side, "spilled": spilled, "dropped": dropped, "strip_sot": strip_sot},
    )
