"""Frame clock, vocabulary, alignment and target construction."""

from streams.grid import FrameGrid
from streams.types import (
    AlignedTargetStreams,
    Alignment,
    StreamKind,
    TurnAnnotation,
    TurnKind,
    UnifiedTargetStream,
    WordTiming,
)
from streams.vocab import Special, Vocabulary

__all__ = [
    "FrameGrid",
    "AlignedTargetStreams",
    "Alignment",
    "StreamKind",
    "TurnAnnotation",
    "TurnKind",
    "UnifiedTargetStream",
    "WordTiming",
    "Special",
    "Vocabulary",
]
