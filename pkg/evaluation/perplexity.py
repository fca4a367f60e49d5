"""Perplexity of target streams under a model's text head."""

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from model.layers import log_softmax
from model.transformer import TEXT_HEAD, DuplexTransformer
from streams.targets import StreamInputs
from streams.vocab import EMP_ID, NULL_ID

SKIPPED = (EMP_ID, NULL_ID)


@dataclass(frozen=True)
class NLLSum:
    """Summed negative log-likelihood and the number of scored tokens."""

    total: float = 0.0
    count: int = 0

    def __add__(self, other: "NLLSum") -> "NLLSum":
        return NLLSum(self.total + other.total, self.count + other.count)

    @property
    def perplexity(self) -> float:
        """exp(mean NLL); NaN when nothing was scored."""
        if self.count == 0:
            return math.nan
        return math.exp(self.total / self.count)


def token_nll(log_probs: np.ndarray, tokens: Sequence[int], skip: Iterable[int] = SKIPPED) -> NLLSum:
    """NLL of `tokens` under per-position log-probabilities, EMP and NULL positions left out.

    Args:
        log_probs: (F, V) log-probabilities; row n scores tokens[n]
        tokens: (F,) token ids
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if len(tokens) != len(log_probs):
        raise ValueError(f"{len(tokens)} tokens for {len(log_probs)} positions")
    keep = ~np.isin(tokens, list(skip))
    if not keep.any():
        return NLLSum()
    picked = log_probs[np.flatnonzero(keep), tokens[keep]]
    return NLLSum(float(-picked.sum()), int(keep.sum()))


def perplexity(log_probs: np.ndarray, tokens: Sequence[int]) -> float:
    return token_nll(log_probs, tokens).perplexity


def sequence_nll(model: DuplexTransformer, inputs: StreamInputs, tokens: Sequence[int], head: str = TEXT_HEAD) -> NLLSum:
    """Teacher-forced NLL of a target stream; `inputs.prev_*` must already hold its shifted copy."""
    logits = model.forward_sequence(inputs).logits[head]
    return token_nll(log_softmax(logits), tokens)
