"""Echo and scripted response backbones.

Both buffer the user pieces ingested since the last turn and answer from
that buffer when the orchestrator hands them the floor.
"""

import logging
from typing import Iterator, List

from corpus.lexicon import Lexicon
from streams.vocab import join_pieces, split_pieces

logger = logging.getLogger(__name__)


class BufferedBackbone:
    """Collects user pieces between turns."""

    name = "buffered"

    def __init__(self):
        self.buffer: List[str] = []

    def ingest_user_token(self, token: str) -> None:
        self.buffer.append(token)

    def reset(self) -> None:
        self.buffer = []

    def take_words(self) -> List[str]:
        words = join_pieces(self.buffer)
        self.buffer = []
        return words


class EchoBackbone(BufferedBackbone):
    """Repeats the user's last words back."""

    name = "echo"

    def on_turn(self) -> Iterator[str]:
        words = self.take_words()
        return iter([p for w in words for p in split_pieces(w)])


class ScriptedBackbone(BufferedBackbone):
    """Answers with the lexicon's deterministic reply to the user's words.

    Words the lexicon does not know (partial or misrecognised pieces) pass
    through unchanged, as `Lexicon.respond` leaves them.
    """

    name = "scripted"

    def __init__(self, lexicon: Lexicon):
        super().__init__()
        self.lexicon = lexicon

    def on_turn(self) -> Iterator[str]:
        reply = self.lexicon.respond(self.take_words())
        logger.debug(f"Scripted reply: {' '.join(reply)}")
        return iter([p for w in reply for p in split_pieces(w)])
