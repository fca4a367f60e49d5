"""Closed synthetic lexicon with a deterministic response pairing."""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from config.environments.base import LexiconSettings
from exceptions import CorpusError
from streams.vocab import Vocabulary

logger = logging.getLogger(__name__)

CONSONANTS = "ptkbdgmnlsr"
VOWELS = "aeiou"
# Disjoint consonant set for babble voices, so noise never speaks a lexicon word.
BABBLE_CONSONANTS = "fvzhjwy"

BACKCHANNEL_WORDS = ("mhm", "yeah")
CAPTION_WORDS = ("steady", "hiss", "hum", "rumble", "crowd", "chatter", "noise", "soft", "loud", "low")

# Formant regions: the band [0, 8 kHz) is split into 8 regions of 1 kHz.
N_REGIONS = 8


def _digest(text: str) -> int:
    return int.from_bytes(hashlib.md5(text.encode("utf-8")).digest()[:8], "little")


def syllable_regions(syllable: str) -> Tuple[int, int]:
    """Formant regions (low half, high half) that identify a syllable."""
    h = _digest(syllable)
    return h % (N_REGIONS // 2), N_REGIONS // 2 + (h >> 8) % (N_REGIONS // 2)


def syllable_class(syllable: str) -> int:
    """One of 16 classes; equal classes mean equal spectral envelopes."""
    low, high = syllable_regions(syllable)
    return low * (N_REGIONS // 2) + (high - N_REGIONS // 2)


def word_pitch_offset(word: str) -> float:
    """Word-dependent relative pitch offset in [-1, 1]."""
    return ((_digest("pitch:" + word) % 2001) - 1000) / 1000.0


def _make_words(rng: np.random.Generator, n: int, max_syllables: int, consonants: str) -> List[str]:
    words: List[str] = []
    seen = set()
    attempts = 0
    while len(words) < n:
        attempts += 1
        if attempts > 100 * n + 1000:
            raise CorpusError(f"could not draw {n} distinct words from the syllable inventory")
        n_syl = int(rng.integers(1, max_syllables + 1))
        syllables = [consonants[rng.integers(len(consonants))] + VOWELS[rng.integers(len(VOWELS))] for _ in range(n_syl)]
        word = "-".join(syllables)
        if word in seen:
            continue
        seen.add(word)
        words.append(word)
    return words


@dataclass(frozen=True)
class Lexicon:
    """Words the synthetic world can say.

    Attributes:
        words: Content words used in user and agent turns
        caption_words: Words that describe noise clips
        backchannel_words: Short acknowledgements
        pairing: Fixed permutation mapping each content word to its reply word
    """

    words: Tuple[str, ...]
    caption_words: Tuple[str, ...] = CAPTION_WORDS
    backchannel_words: Tuple[str, ...] = BACKCHANNEL_WORDS
    pairing: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.words:
            raise CorpusError("lexicon has no content words")

    @property
    def spoken_words(self) -> Tuple[str, ...]:
        return self.words + self.backchannel_words

    def word_id(self, word: str) -> int:
        """Stable integer id for synthesis; unknown words hash outside the lexicon range."""
        try:
            return self.spoken_words.index(word)
        except ValueError:
            return len(self.spoken_words) + _digest(word) % 100_000

    def respond(self, user_words: Sequence[str]) -> List[str]:
        """Deterministic reply: the paired words of the user turn in reverse order."""
        return [self.pairing.get(w, w) for w in reversed(list(user_words))]

    def vocabulary(self) -> Vocabulary:
        return Vocabulary.from_words(list(self.spoken_words) + list(self.caption_words))


def build_lexicon(settings: LexiconSettings) -> Lexicon:
    """Draw the content words and the reply permutation from the lexicon seed."""
    rng = np.random.default_rng(settings.seed)
    words = _make_words(rng, settings.n_words, settings.max_syllables, CONSONANTS)
    permutation = rng.permutation(len(words))
    pairing = {w: words[int(j)] for w, j in zip(words, permutation)}
    captions = CAPTION_WORDS[: settings.n_caption_words]
    logger.debug(f"Built lexicon with {len(words)} content words, {len(captions)} caption words")
    return Lexicon(words=tuple(words), caption_words=tuple(captions), pairing=pairing)


def babble_words(seed: int, n: int) -> List[str]:
    """Off-vocabulary words for babble voices."""
    return _make_words(np.random.default_rng(seed), n, 2, BABBLE_CONSONANTS)
