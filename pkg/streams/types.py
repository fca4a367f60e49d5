"""Timed annotations and frame-aligned stream containers."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Any

import numpy as np

from exceptions import AlignmentError, HorizonMismatchError


class TurnKind(str, Enum):
    """Turn-taking event taxonomy."""

    NORMAL = "normal"
    OVERLAPPING = "overlapping"
    BACKCHANNEL = "backchannel"


class StreamKind(str, Enum):
    """Which loss-weight table a target stream uses."""

    AVSR = "avsr"
    TURN = "turn"
    UNIFIED = "unified"


@dataclass(frozen=True)
class WordTiming:
    """One spoken word with its start/end time in seconds."""

    word: str
    t_start: float
    t_end: float

    def __post_init__(self):
        if not 0 <= self.t_start < self.t_end:
            raise AlignmentError(
                f"word {self.word!r} has invalid timing [{self.t_start}, {self.t_end})",
                details={"word": self.word, "t_start": self.t_start, "t_end": self.t_end},
            )

    def to_dict(self) -> Dict[str, Any]:
        return {"w": self.word, "t_start": self.t_start, "t_end": self.t_end}


@dataclass(frozen=True)
class TurnAnnotation:
    """A turn-taking event at `t_turn` seconds by `speaker`."""

    kind: TurnKind
    t_turn: float
    speaker: int

    def __post_init__(self):
        if self.t_turn < 0:
            raise AlignmentError(f"turn event at negative time {self.t_turn}")

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "t_turn": self.t_turn}


@dataclass
class Alignment:
    """Frame-indexed token ids plus bookkeeping from the placement pass.

    Attributes:
        tokens: int64 array of length horizon
        dropped: Tokens that fell beyond the horizon
        shifted: Tokens moved forward by a collision policy
    """

    tokens: np.ndarray
    dropped: int = 0
    shifted: int = 0

    @property
    def horizon(self) -> int:
        return len(self.tokens)


@dataclass
class AlignedTargetStreams:
    """Dual-model targets: text stream U and turn-event stream T."""

    U: np.ndarray
    T: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.U) != len(self.T):
            raise HorizonMismatchError(len(self.U), len(self.T), "T")

    @property
    def horizon(self) -> int:
        return len(self.U)


@dataclass
class UnifiedTargetStream:
    """Unified-model target: turn events interleaved with agent response text."""

    R: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.R)
