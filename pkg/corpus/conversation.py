"""Synthetic dyadic conversations with ground-truth timings and turn events.

Side 0 is the user, side 1 the agent. Floors alternate starting with the user;
every agent floor replies to the preceding user floor through the lexicon's
fixed pairing, so the correct response to any user turn is known exactly.
"""

import json
import logging
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.environments.base import CorpusSettings
from corpus.lexicon import Lexicon
from exceptions import CorpusError
from streams.types import TurnAnnotation, TurnKind, WordTiming

logger = logging.getLogger(__name__)

USER = 0
AGENT = 1

LEAD_IN = 0.3
TAIL = 0.5
# Overlapping turns start this far before the previous word end.
OVERLAP_RANGE = (0.1, 1.0)
MIN_SAME_SIDE_GAP = 0.05
BACKCHANNEL_DURATION = 0.2


@dataclass
class SideScript:
    """What one side says, and the turn events it makes."""

    words: List[WordTiming] = field(default_factory=list)
    turns: List[TurnAnnotation] = field(default_factory=list)

    @property
    def end(self) -> float:
        return max((w.t_end for w in self.words), default=0.0)

    def floor_segments(self) -> List[Tuple[TurnAnnotation, List[WordTiming]]]:
        """Group words under the NORMAL/OVERLAPPING turn that started them.

        Backchannel words are excluded. Words spoken before the first turn
        event are dropped.
        """
        floors = [t for t in self.turns if t.kind != TurnKind.BACKCHANNEL]
        backchannel_starts = {round(t.t_turn, 9) for t in self.turns if t.kind == TurnKind.BACKCHANNEL}
        segments: List[Tuple[TurnAnnotation, List[WordTiming]]] = [(t, []) for t in floors]
        for word in self.words:
            if round(word.t_start, 9) in backchannel_starts:
                continue
            owner = None
            for i, turn in enumerate(floors):
                if turn.t_turn <= word.t_start + 1e-9:
                    owner = i
            if owner is not None:
                segments[owner][1].append(word)
        return segments

    def to_dict(self) -> Dict[str, Any]:
        return {"words": [w.to_dict() for w in self.words], "turns": [t.to_dict() for t in self.turns]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], speaker: int) -> "SideScript":
        return cls(
            words=[WordTiming(w["w"], w["t_start"], w["t_end"]) for w in data.get("words", [])],
            turns=[TurnAnnotation(TurnKind(t["kind"]), t["t_turn"], speaker) for t in data.get("turns", [])],
        )


@dataclass(frozen=True)
class FloorTransfer:
    """One floor change and its ground-truth offset."""

    from_side: int
    to_side: int
    prev_end: float
    t_turn: float
    kind: TurnKind

    @property
    def fto(self) -> float:
        return self.t_turn - self.prev_end


@dataclass
class SyntheticConversation:
    """A two-sided conversation with exact annotations.

    Attributes:
        id: Conversation identifier
        sides: User script then agent script
        duration: Seconds, covering every word plus a short tail
        transfers: Floor transfers in time order
        voice_seeds: Synthesizer voice per side
    """

    id: str
    sides: Tuple[SideScript, SideScript]
    duration: float
    transfers: List[FloorTransfer] = field(default_factory=list)
    voice_seeds: Tuple[int, int] = (0, 1)

    @property
    def fto_list(self) -> List[float]:
        return [t.fto for t in self.transfers]

    def user_turn_ends(self, user_side: int = USER) -> List[float]:
        """End times of the floors held by `user_side` that were followed by a transfer."""
        return [t.prev_end for t in self.transfers if t.from_side == user_side]

    def responses(self, user_side: int = USER) -> List[Tuple[List[str], List[str]]]:
        """(user floor words, following agent floor words) pairs."""
        user = [[w.word for w in ws] for _, ws in self.sides[user_side].floor_segments()]
        agent = [[w.word for w in ws] for _, ws in self.sides[1 - user_side].floor_segments()]
        return list(zip(user, agent))

    def to_record(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "duration": self.duration,
            "voice_seeds": list(self.voice_seeds),
            "sides": [s.to_dict() for s in self.sides],
            "transfers": [
                {"from": t.from_side, "to": t.to_side, "prev_end": t.prev_end, "t_turn": t.t_turn, "kind": t.kind.value}
                for t in self.transfers
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_record(cls, data: Dict[str, Any]) -> "SyntheticConversation":
        sides = data["sides"]
        if len(sides) != 2:
            raise CorpusError(f"conversation {data.get('id')} has {len(sides)} sides, expected 2")
        return cls(
            id=data["id"],
            sides=(SideScript.from_dict(sides[0], USER), SideScript.from_dict(sides[1], AGENT)),
            duration=float(data["duration"]),
            transfers=[
                FloorTransfer(t["from"], t["to"], t["prev_end"], t["t_turn"], TurnKind(t["kind"]))
                for t in data.get("transfers", [])
            ],
            voice_seeds=tuple(data.get("voice_seeds", (0, 1))),
        )


@dataclass(frozen=True)
class ConversationParams:
    """Generator parameters; `from_settings` maps the corpus config section."""

    n_turns: int = 6
    words_per_turn: Tuple[int, int] = (2, 5)
    backchannel_rate: float = 0.3
    overlap_rate: float = 0.1
    fto_distribution: str = "lognormal"
    fto_median: float = 1.5
    fto_sigma: float = 0.45

    @classmethod
    def from_settings(cls, settings: CorpusSettings) -> "ConversationParams":
        return cls(
            n_turns=settings.n_turns,
            words_per_turn=tuple(settings.words_per_turn),
            backchannel_rate=settings.backchannel_rate,
            overlap_rate=settings.overlap_rate,
            fto_distribution=settings.fto_distribution,
            fto_median=settings.fto_median,
            fto_sigma=settings.fto_sigma,
        )


class FTOSampler:
    """Floor-transfer offsets whose overall median is the configured target.

    A fraction `overlap_rate` of draws is negative (overlapping turns); the
    rest are lognormal with the scale chosen so the quantile at 0.5 of the
    whole mixture equals `median`. The constant distribution always returns
    the median for non-overlapping draws.

    `gen_conversation` may move an onset later than the drawn offset: a turn
    starts at least 0.1 s after the previous floor began and 0.05 s after the
    speaker's own last word. Both bounds fall less than 1.05 s after the previous
    floor ends, since an overlap is at most 1 s deep. Raised draws therefore
    stay below any median above that, and the realized median equals the
    configured one. Only the shape of the short and overlapping tail changes.
    """

    def __init__(self, params: ConversationParams):
        self.params = params
        p = params.overlap_rate
        self._normal = NormalDist()
        v0 = (0.5 - p) / (1.0 - p)
        self._scale = params.fto_median / float(np.exp(params.fto_sigma * self._normal.inv_cdf(v0)))

    def draw(self, rng: np.random.Generator) -> Tuple[float, TurnKind]:
        p = self.params.overlap_rate
        u = float(rng.random())
        if u < p:
            lo, hi = OVERLAP_RANGE
            return -(hi - (hi - lo) * (u / p)), TurnKind.OVERLAPPING
        if self.params.fto_distribution == "constant":
            return self.params.fto_median, TurnKind.NORMAL
        v = min(max((u - p) / (1.0 - p), 1e-9), 1.0 - 1e-9)
        return self._scale * float(np.exp(self.params.fto_sigma * self._normal.inv_cdf(v))), TurnKind.NORMAL


def _word_duration(word: str, rng: np.random.Generator) -> float:
    n_syllables = word.count("-") + 1
    return 0.10 + 0.09 * n_syllables + float(rng.uniform(0.0, 0.04))


def gen_conversation(
    seed: int,
    params: ConversationParams,
    lexicon: Lexicon,
    conv_id: Optional[str] = None,
    voice_seeds: Tuple[int, int] = (0, 1),
) -> SyntheticConversation:
    """Generate one conversation as a pure function of (seed, params, lexicon).

    Args:
        seed: Seed for every random draw
        params: Turn counts, rates and FTO distribution
        lexicon: Word inventory and reply pairing
        conv_id: Identifier; defaults to ``conv-{seed}``
        voice_seeds: Synthesizer voice per side

    Returns:
        The generated conversation

    Raises:
        CorpusError: If the lexicon has no words
    """
    if not lexicon.words:
        raise CorpusError("cannot generate a conversation from an empty vocabulary")

    rng = np.random.default_rng(seed)
    sampler = FTOSampler(params)
    sides = (SideScript(), SideScript())
    busy_until = [0.0, 0.0]
    transfers: List[FloorTransfer] = []
    last_user_words: List[str] = []
    previous_floor: Optional[Tuple[int, float, float]] = None  # (side, start, end)

    for turn_index in range(params.n_turns):
        speaker = USER if turn_index % 2 == 0 else AGENT
        if speaker == USER:
            lo, hi = params.words_per_turn
            words = [lexicon.words[int(i)] for i in rng.integers(0, len(lexicon.words), size=int(rng.integers(lo, hi + 1)))]
            last_user_words = words
        else:
            words = lexicon.respond(last_user_words)

        if previous_floor is None:
            t_turn, kind = LEAD_IN, TurnKind.NORMAL
        else:
            prev_side, prev_start, prev_end = previous_floor
            fto, kind = sampler.draw(rng)
            t_turn = max(prev_end + fto, prev_start + 0.1, busy_until[speaker] + MIN_SAME_SIDE_GAP)
            kind = TurnKind.OVERLAPPING if t_turn < prev_end else TurnKind.NORMAL
            transfers.append(FloorTransfer(prev_side, speaker, prev_end, t_turn, kind))

        sides[speaker].turns.append(TurnAnnotation(kind, t_turn, speaker))
        t = t_turn
        timings: List[WordTiming] = []
        for k, word in enumerate(words):
            if k:
                t += float(rng.uniform(0.04, 0.16))
            duration = _word_duration(word, rng)
            timings.append(WordTiming(word, t, t + duration))
            t += duration
        sides[speaker].words.extend(timings)
        floor_end = timings[-1].t_end if timings else t_turn
        busy_until[speaker] = floor_end

        listener = 1 - speaker
        if timings and float(rng.random()) < params.backchannel_rate:
            midpoint = 0.5 * (t_turn + floor_end)
            earliest = max(midpoint, busy_until[listener] + MIN_SAME_SIDE_GAP)
            latest = floor_end - BACKCHANNEL_DURATION - 0.02
            if latest > earliest:
                t_bc = float(rng.uniform(earliest, latest))
                word = lexicon.backchannel_words[int(rng.integers(len(lexicon.backchannel_words)))]
                sides[listener].words.append(WordTiming(word, t_bc, t_bc + BACKCHANNEL_DURATION))
                sides[listener].turns.append(TurnAnnotation(TurnKind.BACKCHANNEL, t_bc, listener))
                busy_until[listener] = t_bc + BACKCHANNEL_DURATION

        previous_floor = (speaker, t_turn, floor_end)

    for side in sides:
        side.words.sort(key=lambda w: w.t_start)
        side.turns.sort(key=lambda e: e.t_turn)

    duration = max(sides[0].end, sides[1].end) + TAIL if params.n_turns else 0.0
    conv = SyntheticConversation(
        id=conv_id or f"conv-{seed}",
        sides=sides,
        duration=round(duration, 6),
        transfers=transfers,
        voice_seeds=voice_seeds,
    )
    logger.debug(f"Generated {conv.id}: {params.n_turns} floors, {len(transfers)} transfers, {conv.duration:.2f}s")
    return conv
