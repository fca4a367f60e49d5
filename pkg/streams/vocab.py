"""Token inventory: special tokens plus the closed word-piece vocabulary."""

import hashlib
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from exceptions import VocabularyError

logger = logging.getLogger(__name__)

CONTINUATION = "##"


class Special(str, Enum):
    """Special tokens; their ids are their positions in this enum."""

    EMP = "<EMP>"
    SOT = "<SOT>"
    BACKCHANNEL = "<BC>"
    NULL = "<NULL>"
    ASR = "<ASR>"
    TRANS = "<TRANS>"
    AC = "<AC>"
    BOS = "<BOS>"
    EOS = "<EOS>"


SPECIAL_IDS: Dict[Special, int] = {tok: i for i, tok in enumerate(Special)}
EMP_ID = SPECIAL_IDS[Special.EMP]
SOT_ID = SPECIAL_IDS[Special.SOT]
BACKCHANNEL_ID = SPECIAL_IDS[Special.BACKCHANNEL]
NULL_ID = SPECIAL_IDS[Special.NULL]
ASR_ID = SPECIAL_IDS[Special.ASR]
TRANS_ID = SPECIAL_IDS[Special.TRANS]
AC_ID = SPECIAL_IDS[Special.AC]
BOS_ID = SPECIAL_IDS[Special.BOS]
EOS_ID = SPECIAL_IDS[Special.EOS]

# Acoustic code marking a missing audio frame; embeds to zero.
NULL_CODE = -1

# Turn-head classes, in head output order.
TURN_TOKEN_IDS = (EMP_ID, SOT_ID, BACKCHANNEL_ID)


def split_pieces(word: str) -> List[str]:
    """Split a hyphen-joined syllable word into word-pieces.

    ``"ka-lo-mi"`` becomes ``["ka", "##lo", "##mi"]``.
    """
    syllables = [s for s in word.split("-") if s]
    if not syllables:
        raise VocabularyError(f"cannot split empty word {word!r}")
    return [syllables[0]] + [CONTINUATION + s for s in syllables[1:]]


def join_pieces(pieces: Sequence[str]) -> List[str]:
    """Collapse word-pieces back into words."""
    words: List[str] = []
    for piece in pieces:
        if piece.startswith(CONTINUATION) and words:
            words[-1] = words[-1] + "-" + piece[len(CONTINUATION):]
        else:
            words.append(piece.removeprefix(CONTINUATION))
    return words


class Vocabulary:
    """Closed vocabulary of special tokens followed by text word-pieces.

    Special tokens occupy ids ``0..len(Special)-1``; text pieces follow in
    sorted order so that identical word lists always give identical ids.
    """

    def __init__(self, pieces: Iterable[str]):
        unique = sorted(set(pieces))
        clash = [p for p in unique if p in {s.value for s in Special}]
        if clash:
            raise VocabularyError("text pieces collide with special tokens", details={"pieces": clash})
        self._pieces: List[str] = [s.value for s in Special] + unique
        self._ids: Dict[str, int] = {p: i for i, p in enumerate(self._pieces)}

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocabulary":
        pieces: List[str] = []
        for word in words:
            pieces.extend(split_pieces(word))
        return cls(pieces)

    def __len__(self) -> int:
        return len(self._pieces)

    @property
    def n_special(self) -> int:
        return len(Special)

    @property
    def text_pieces(self) -> List[str]:
        return self._pieces[self.n_special:]

    def id_of(self, piece: str) -> int:
        try:
            return self._ids[piece]
        except KeyError:
            raise VocabularyError(f"unknown piece {piece!r}", details={"piece": piece})

    def piece_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._pieces):
            raise VocabularyError(f"token id {token_id} out of range", details={"id": int(token_id)})
        return self._pieces[token_id]

    def is_text(self, token_id: int) -> bool:
        return self.n_special <= token_id < len(self._pieces)

    def is_continuation(self, token_id: int) -> bool:
        return self.is_text(token_id) and self._pieces[token_id].startswith(CONTINUATION)

    def encode_word(self, word: str) -> List[int]:
        return [self.id_of(p) for p in split_pieces(word)]

    def encode_words(self, words: Iterable[str]) -> List[int]:
        ids: List[int] = []
        for word in words:
            ids.extend(self.encode_word(word))
        return ids

    def decode_words(self, token_ids: Iterable[int]) -> List[str]:
        """Drop non-text tokens and collapse word-pieces into words."""
        return join_pieces([self._pieces[int(t)] for t in token_ids if self.is_text(int(t))])

    def manifest(self) -> Dict[str, object]:
        return {"pieces": self._pieces, "n_special": self.n_special, "hash": self.hash()}

    def hash(self) -> str:
        return hashlib.sha256("\n".join(self._pieces).encode("utf-8")).hexdigest()

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2))
        logger.debug(f"Saved vocabulary manifest ({len(self)} entries) to {path}")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        data = json.loads(Path(path).read_text())
        pieces = data["pieces"]
        if pieces[: len(Special)] != [s.value for s in Special]:
            raise VocabularyError(f"manifest {path} has a different special-token layout")
        vocab = cls(pieces[len(Special):])
        if vocab.hash() != data.get("hash", vocab.hash()):
            raise VocabularyError(f"manifest {path} hash mismatch")
        return vocab
