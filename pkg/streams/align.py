"""Frame placement of words and turn events, and per-token loss weights."""

import logging
from typing import Optional, Sequence

import numpy as np

from config.environments.base import LossWeightSettings
from exceptions import AlignmentError, VocabularyError
from streams.grid import FrameGrid
from streams.types import Alignment, StreamKind, TurnAnnotation, TurnKind, WordTiming
from streams.vocab import BACKCHANNEL_ID, EMP_ID, NULL_ID, SOT_ID, Vocabulary

logger = logging.getLogger(__name__)


def align_transcript(
    words: Sequence[WordTiming],
    grid: FrameGrid,
    horizon: int,
    vocab: Vocabulary,
    delay: Optional[int] = None,
) -> Alignment:
    """Place each word's pieces on the text stream.

    The first piece of a word lands on ``frame_ceil(t_start) + d`` and the
    remaining pieces on the following frames. A word whose slot is still
    occupied by the previous word starts at the first free frame after it.

    Args:
        words: Word timings sorted by t_start
        grid: Frame clock
        horizon: Stream length in frames
        vocab: Vocabulary used to split words into pieces
        delay: Override for the grid's recognition delay (Stage-1 uses 0)

    Returns:
        Alignment with EMP on every frame that carries no piece

    Raises:
        AlignmentError: If words are not sorted by start time
    """
    d = grid.recognition_delay if delay is None else delay
    tokens = np.full(horizon, EMP_ID, dtype=np.int64)
    dropped = 0
    shifted = 0
    next_free = 0
    previous_start = -1.0

    for word in words:
        if word.t_start < previous_start:
            raise AlignmentError(
                f"word {word.word!r} starts at {word.t_start} before the previous word ({previous_start})",
                details={"word": word.word, "t_start": word.t_start},
            )
        previous_start = word.t_start

        pieces = vocab.encode_word(word.word)
        anchor = grid.frame_ceil(word.t_start) + d
        position = max(anchor, next_free)
        if position > anchor:
            shifted += 1
        for k, token in enumerate(pieces):
            frame = position + k
            if frame >= horizon:
                dropped += 1
                continue
            tokens[frame] = token
        next_free = position + len(pieces)

    if dropped:
        logger.warning(f"Transcript alignment dropped {dropped} pieces beyond horizon {horizon}")
    if shifted:
        logger.debug(f"Transcript alignment spilled {shifted} words past their anchor frame")
    return Alignment(tokens=tokens, dropped=dropped, shifted=shifted)


def turn_token_of(kind: TurnKind) -> int:
    """NORMAL and OVERLAPPING turns share SOT; backchannels get their own token."""
    return BACKCHANNEL_ID if kind == TurnKind.BACKCHANNEL else SOT_ID


def align_turn_events(events: Sequence[TurnAnnotation], grid: FrameGrid, horizon: int) -> Alignment:
    """Place turn events at ``frame_floor(t_turn)`` with no recognition delay.

    An event whose frame is already taken moves forward to the next free frame.

    Raises:
        AlignmentError: If events are not sorted by t_turn
    """
    tokens = np.full(horizon, EMP_ID, dtype=np.int64)
    dropped = 0
    shifted = 0
    last_frame = -1
    previous_t = -1.0

    for event in events:
        if event.t_turn < previous_t:
            raise AlignmentError(
                f"turn event at {event.t_turn} precedes the previous event ({previous_t})",
                details={"t_turn": event.t_turn},
            )
        previous_t = event.t_turn

        frame = grid.frame_floor(event.t_turn)
        if frame <= last_frame:
            logger.info(f"Turn event at {event.t_turn:.3f}s collides with frame {last_frame}; shifted forward")
            frame = last_frame + 1
            shifted += 1
        last_frame = frame
        if frame >= horizon:
            dropped += 1
            continue
        tokens[frame] = turn_token_of(event.kind)

    if dropped:
        logger.warning(f"Turn alignment dropped {dropped} events beyond horizon {horizon}")
    return Alignment(tokens=tokens, dropped=dropped, shifted=shifted)


def loss_weight_of(token: int, stream_kind: StreamKind, vocab: Vocabulary, weights: LossWeightSettings) -> float:
    """Loss weight of one target token on a given stream.

    NULL always weighs 0. On the AVSR stream EMP weighs ``weights.emp`` and
    every other token ``weights.text``; on the turn stream only EMP, SOT and
    BACKCHANNEL are legal.

    Raises:
        VocabularyError: For tokens that cannot appear on the stream
    """
    token = int(token)
    if token == NULL_ID:
        return 0.0
    if token == EMP_ID:
        return weights.emp

    if stream_kind == StreamKind.AVSR:
        if token in (SOT_ID, BACKCHANNEL_ID):
            raise VocabularyError("turn tokens cannot appear on the text stream", details={"token": token})
        return weights.text

    if token == SOT_ID:
        return weights.sot
    if token == BACKCHANNEL_ID:
        return weights.backchannel
    if stream_kind == StreamKind.TURN:
        raise VocabularyError(
            f"token {vocab.piece_of(token)!r} cannot appear on the turn stream",
            details={"token": token},
        )
    return weights.text


def loss_weights_for(
    tokens: np.ndarray, stream_kind: StreamKind, vocab: Vocabulary, weights: LossWeightSettings
) -> np.ndarray:
    """Vectorised `loss_weight_of` over a whole target stream."""
    table = {}
    out = np.empty(len(tokens), dtype=np.float64)
    for i, token in enumerate(tokens):
        token = int(token)
        if token not in table:
            table[token] = loss_weight_of(token, stream_kind, vocab, weights)
        out[i] = table[token]
    return out
