"""Floor-transfer offsets and turn-taking metrics.

Every user turn end is an opportunity for the agent to take the floor. An
opportunity is answered by the earliest unclaimed agent start-of-turn in the
window ``[turn_end - lookback, next_turn_end)``; an opportunity without one
is a non-response. Offsets are in seconds and negative for overlaps.
"""

import logging
import math
import statistics
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from agents.core.interfaces import DialogueMode, SessionTrace, TraceEventKind
from corpus.conversation import USER, SyntheticConversation
from streams.align import align_transcript
from streams.grid import FrameGrid
from streams.types import TurnKind
from streams.vocab import Vocabulary

logger = logging.getLogger(__name__)

# Marks an opportunity the agent never answered.
NO_RESPONSE = None

RESPONSE_WINDOW = (-2.0, 3.0)
PAIRING_LOOKBACK = 2.0


@dataclass(frozen=True)
class FTORecord:
    """One user turn end and the agent turn start paired with it.

    Attributes:
        gt_turn_end: User turn end in seconds
        agent_sot: Agent start-of-turn in seconds, or NO_RESPONSE
        gt_fto: Reference offset for the same opportunity, when known
    """

    gt_turn_end: float
    agent_sot: Optional[float] = NO_RESPONSE
    gt_fto: Optional[float] = None

    @property
    def responded(self) -> bool:
        return self.agent_sot is not NO_RESPONSE

    @property
    def fto(self) -> Optional[float]:
        if not self.responded:
            return NO_RESPONSE
        return self.agent_sot - self.gt_turn_end

    def to_dict(self) -> Dict[str, Any]:
        return {**asdict(self), "fto": self.fto}


@dataclass(frozen=True)
class TurnMetrics:
    """Aggregate turn-taking quality.

    Attributes:
        response_ratio: Share of all opportunities answered inside the response window
        fto_mae: Mean |fto - gt_fto| over answered opportunities; NaN when none
        median_fto: Median offset over answered opportunities; NaN when none
        n_no_response: Opportunities without an agent turn
        n_turns: All opportunities
    """

    response_ratio: float
    fto_mae: float
    median_fto: float
    n_no_response: int
    n_turns: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def extract_ftos(
    trace: SessionTrace,
    gt: Sequence[float],
    grid: Optional[FrameGrid] = None,
    gt_ftos: Optional[Sequence[float]] = None,
    lookback: float = PAIRING_LOOKBACK,
) -> List[FTORecord]:
    """Pair each user turn end with at most one agent start-of-turn.

    Args:
        trace: Session trace; explicit and implicit SOTs both count
        gt: User turn ends in seconds, sorted
        grid: Frame clock converting trace frames to seconds
        gt_ftos: Reference offsets aligned with `gt`, for the MAE
        lookback: How far before a turn end an overlapping start may begin

    Returns:
        One record per turn end, in order
    """
    grid = grid or FrameGrid()
    gt = [float(t) for t in gt]
    if any(b < a for a, b in zip(gt, gt[1:])):
        raise ValueError("user turn ends must be sorted")
    if gt_ftos is not None and len(gt_ftos) != len(gt):
        raise ValueError(f"{len(gt_ftos)} reference offsets for {len(gt)} turn ends")

    sots = sorted(grid.to_seconds(f) for f in trace.sot_frames())
    claimed = [False] * len(sots)
    records = []
    for i, end in enumerate(gt):
        lo = end - lookback
        hi = gt[i + 1] if i + 1 < len(gt) else math.inf
        match = NO_RESPONSE
        for j, t in enumerate(sots):
            if t >= hi:
                break
            if not claimed[j] and t >= lo - 1e-9:
                claimed[j] = True
                match = t
                break
        records.append(FTORecord(end, match, None if gt_ftos is None else float(gt_ftos[i])))

    unclaimed = claimed.count(False)
    if unclaimed:
        logger.debug(f"{trace.session_id}: {unclaimed} SOTs paired with no user turn end")
    return records


def turn_metrics(records: Sequence[FTORecord], window: Tuple[float, float] = RESPONSE_WINDOW) -> TurnMetrics:
    """Response ratio, offset MAE and median over `records`.

    Non-responses count in the response-ratio denominator only.
    """
    lo, hi = window
    answered = [r for r in records if r.responded]
    in_window = sum(1 for r in answered if lo - 1e-9 <= r.fto <= hi + 1e-9)
    errors = [abs(r.fto - r.gt_fto) for r in answered if r.gt_fto is not None]
    return TurnMetrics(
        response_ratio=in_window / len(records) if records else 0.0,
        fto_mae=statistics.fmean(errors) if errors else math.nan,
        median_fto=statistics.median(r.fto for r in answered) if answered else math.nan,
        n_no_response=len(records) - len(answered),
        n_turns=len(records),
    )


def pooled_metrics(groups: Sequence[Sequence[FTORecord]], window: Tuple[float, float] = RESPONSE_WINDOW) -> TurnMetrics:
    return turn_metrics([r for group in groups for r in group], window)


@dataclass
class FTOHistogram:
    """Counts of offsets in fixed-width bins plus one overflow bucket.

    The overflow bucket holds offsets past the last edge and every
    non-response.
    """

    edges: np.ndarray
    counts: np.ndarray
    overflow: int = 0
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.overflow

    def rows(self) -> List[Dict[str, Any]]:
        out = [
            {"bin": f"[{a:g},{b:g})", "lo": float(a), "hi": float(b), "count": int(c)}
            for a, b, c in zip(self.edges[:-1], self.edges[1:], self.counts)
        ]
        out.append({"bin": f">{self.edges[-1]:g} / no-response", "lo": float(self.edges[-1]), "hi": math.inf, "count": self.overflow})
        return out


def fto_histogram(
    records: Sequence[FTORecord],
    bin_width: float = 0.5,
    lo: float = -PAIRING_LOOKBACK,
    hi: float = 10.0,
) -> FTOHistogram:
    n_bins = int(round((hi - lo) / bin_width))
    edges = lo + bin_width * np.arange(n_bins + 1)
    ftos = np.array([r.fto for r in records if r.responded], dtype=np.float64)
    inside = ftos[(ftos >= lo) & (ftos <= hi)]
    counts, _ = np.histogram(inside, bins=edges)
    overflow = int(np.sum(ftos > hi)) + sum(1 for r in records if not r.responded)
    below = int(np.sum(ftos < lo))
    if below:
        logger.warning(f"{below} offsets below {lo:g}s left out of the histogram")
    return FTOHistogram(edges, counts.astype(np.int64), overflow, {"bin_width": bin_width})


def ground_truth_ftos(conv: SyntheticConversation, grid: FrameGrid, user_side: int = USER) -> Tuple[List[float], List[float]]:
    """User turn ends and the reference offsets measured on the frame grid.

    The agent's start is taken at ``frame_floor(t_turn)`` so that a trace
    built from the annotations reproduces the reference offsets exactly.
    """
    ends, ftos = [], []
    for transfer in conv.transfers:
        if transfer.from_side != user_side:
            continue
        ends.append(transfer.prev_end)
        ftos.append(grid.to_seconds(grid.frame_floor(transfer.t_turn)) - transfer.prev_end)
    return ends, ftos


# Sort order of events sharing a frame.
_ORDER = {"user": 0, "complete": 1, "turn": 2, "speaking": 3, "agent": 4, "ack": 5}


def ground_truth_trace(
    conv: SyntheticConversation,
    grid: FrameGrid,
    vocab: Vocabulary,
    user_side: int = USER,
    horizon: Optional[int] = None,
) -> SessionTrace:
    """The corpus annotations as a session trace.

    User pieces sit where the text stream places them. Each agent floor
    opens with an SOT at ``frame_floor(t_turn)`` followed by its response
    pieces one per frame, cut short at the agent's next event.
    Backchannels appear as a turn token plus the spoken acknowledgement.
    """
    horizon = grid.frames_for(conv.duration) + grid.recognition_delay if horizon is None else horizon
    pending: List[Tuple[int, int, int, TraceEventKind, Dict[str, Any]]] = []

    def add(frame: int, order: str, kind: TraceEventKind, **payload: Any) -> None:
        if frame < horizon:
            pending.append((frame, _ORDER[order], len(pending), kind, payload))

    text = align_transcript(conv.sides[user_side].words, grid, horizon, vocab).tokens
    for frame, token in enumerate(text):
        if vocab.is_text(int(token)):
            add(frame, "user", TraceEventKind.USER_TOKEN, token=vocab.piece_of(int(token)))

    agent = conv.sides[1 - user_side]
    responses = {id(turn): words for turn, words in agent.floor_segments()}
    event_frames = [grid.frame_floor(e.t_turn) for e in agent.turns]
    for k, event in enumerate(agent.turns):
        frame = event_frames[k]
        if event.kind == TurnKind.BACKCHANNEL:
            ack = next((w.word for w in agent.words if abs(w.t_start - event.t_turn) < 1e-9), "")
            add(frame, "turn", TraceEventKind.TURN_TOKEN, token="BACKCHANNEL")
            add(frame, "ack", TraceEventKind.BACKCHANNEL, ack=ack)
            continue
        add(frame, "turn", TraceEventKind.TURN_TOKEN, token="SOT")
        add(frame, "speaking", TraceEventKind.STATE_CHANGE, mode=DialogueMode.SPEAKING.value)
        limit = event_frames[k + 1] if k + 1 < len(agent.turns) else horizon
        pieces = [vocab.piece_of(t) for t in vocab.encode_words([w.word for w in responses.get(id(event), [])])]
        room = max(0, limit - frame - 1)
        if len(pieces) > room:
            logger.debug(f"{conv.id}: response at frame {frame} cut to {room} of {len(pieces)} pieces")
            pieces = pieces[:room]
        for i, piece in enumerate(pieces):
            add(frame + 1 + i, "agent", TraceEventKind.AGENT_TOKEN, token=piece)
        add(frame + 1 + len(pieces), "complete", TraceEventKind.STATE_CHANGE, mode=DialogueMode.LISTENING.value, reason="complete")

    trace = SessionTrace(session_id=f"gt-{conv.id}", meta={"source": "annotations", "conversation": conv.id, "frames": horizon})
    for frame, _, _, kind, payload in sorted(pending, key=lambda e: e[:3]):
        trace.append(frame, kind, **payload)
    return trace


def conversation_records(
    trace: SessionTrace,
    conv: SyntheticConversation,
    grid: FrameGrid,
    lookback: float = PAIRING_LOOKBACK,
    user_side: int = USER,
) -> List[FTORecord]:
    """`extract_ftos` against a conversation's own turn ends and reference offsets."""
    ends, ftos = ground_truth_ftos(conv, grid, user_side)
    return extract_ftos(trace, ends, grid, ftos, lookback)
