"""Word error rate by minimal edit distance."""

import logging
from dataclasses import dataclass
from typing import Hashable, Iterable, List, Sequence

import numpy as np

from streams.vocab import Vocabulary

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EditCounts:
    """Substitutions, deletions and insertions of one minimal alignment."""

    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    ref_length: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return rate(self.errors, self.ref_length)

    def __add__(self, other: "EditCounts") -> "EditCounts":
        return EditCounts(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_length + other.ref_length,
        )


def rate(errors: int, ref_length: int) -> float:
    """errors / ref_length; an empty reference counts against a denominator of 1."""
    if ref_length == 0:
        if errors:
            logger.debug(f"Empty reference with {errors} insertions; using a denominator of 1")
        return float(errors)
    return errors / ref_length


def edit_counts(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> EditCounts:
    """Levenshtein alignment of `hyp` against `ref`, split into error kinds.

    Among minimal alignments the backtrace prefers substitutions, then
    deletions, then insertions.
    """
    n, m = len(ref), len(hyp)
    dist = np.zeros((n + 1, m + 1), dtype=np.int64)
    dist[:, 0] = np.arange(n + 1)
    dist[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            dist[i, j] = min(dist[i - 1, j - 1] + cost, dist[i - 1, j] + 1, dist[i, j - 1] + 1)

    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i, j] == dist[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += int(ref[i - 1] != hyp[j - 1])
            i, j = i - 1, j - 1
        elif i > 0 and dist[i, j] == dist[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditCounts(subs, dels, ins, n)


def wer(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> float:
    """(S + D + I) / len(ref); 0 when both are empty."""
    return edit_counts(ref, hyp).wer


def stream_words(tokens: Iterable[int], vocab: Vocabulary) -> List[str]:
    """Words of a decoded text stream: specials dropped, pieces collapsed."""
    return vocab.decode_words(tokens)


def stream_pieces(tokens: Iterable[int], vocab: Vocabulary) -> List[str]:
    return [vocab.piece_of(int(t)) for t in tokens if vocab.is_text(int(t))]


def corpus_counts(pairs: Iterable[tuple]) -> EditCounts:
    """Summed counts over (ref, hyp) pairs, for a corpus-level rate."""
    total = EditCounts()
    for ref, hyp in pairs:
        total = total + edit_counts(ref, hyp)
    return total
