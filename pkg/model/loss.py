"""Weighted cross-entropy over the output streams."""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from config.environments.base import LossWeightSettings
from exceptions import HorizonMismatchError, VocabularyError
from model.layers import log_softmax
from model.transformer import TEXT_HEAD, TURN_HEAD
from streams.align import loss_weights_for
from streams.types import StreamKind
from streams.vocab import NULL_ID, TURN_TOKEN_IDS, Vocabulary

TURN_CLASS = {token: i for i, token in enumerate(TURN_TOKEN_IDS)}


@dataclass
class StreamTarget:
    """Per-frame class targets and weights for one head.

    Attributes:
        classes: (F,) class index in the head's output space; ignored where `valid` is False
        weights: (F,) per-token loss weight
        valid: (F,) True on loss-bearing (non-NULL) positions
    """

    classes: np.ndarray
    weights: np.ndarray
    valid: np.ndarray

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.valid))


def stream_target(
    tokens: np.ndarray,
    stream_kind: StreamKind,
    vocab: Vocabulary,
    weights: LossWeightSettings,
) -> StreamTarget:
    """Map a target token stream onto its head's classes.

    The turn head predicts three classes (EMP, SOT, BACKCHANNEL); text and
    unified heads predict vocabulary ids directly.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    valid = tokens != NULL_ID
    w = loss_weights_for(tokens, stream_kind, vocab, weights)
    if stream_kind == StreamKind.TURN:
        try:
            classes = np.array([TURN_CLASS[int(t)] if v else 0 for t, v in zip(tokens, valid)], dtype=np.int64)
        except KeyError as e:
            raise VocabularyError(f"token {e.args[0]} is not a turn token")
    else:
        classes = np.where(valid, tokens, 0)
    return StreamTarget(classes=classes, weights=np.where(valid, w, 0.0), valid=valid)


def stream_ce(logits: np.ndarray, target: StreamTarget) -> Tuple[float, np.ndarray]:
    """sum(weight * CE) / #loss-bearing positions, and its gradient w.r.t. the logits."""
    if len(logits) != len(target.classes):
        raise HorizonMismatchError(len(logits), len(target.classes), "loss target")
    n = target.n_valid
    grad = np.zeros_like(logits)
    if n == 0:
        return 0.0, grad
    logp = log_softmax(logits)
    rows = np.arange(len(logits))
    ce = -logp[rows, target.classes]
    loss = float(np.sum(target.weights * ce) / n)
    grad = np.exp(logp)
    grad[rows, target.classes] -= 1.0
    grad *= (target.weights / n)[:, None]
    return loss, grad


def weighted_ce_loss(
    logits: Dict[str, np.ndarray],
    targets: Dict[str, StreamTarget],
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Average of the per-stream weighted losses over streams with loss-bearing positions.

    Heads without a target (or with an all-NULL target) receive zero gradient.

    Returns:
        Scalar loss and per-head logit gradients
    """
    grads = {name: np.zeros_like(value) for name, value in logits.items()}
    active = [name for name, t in targets.items() if name in logits and t.n_valid > 0]
    if not active:
        return 0.0, grads
    total = 0.0
    for name in active:
        loss, grad = stream_ce(logits[name], targets[name])
        total += loss
        grads[name] = grad / len(active)
    return total / len(active), grads


def dual_targets(U: np.ndarray, T: np.ndarray, vocab: Vocabulary, weights: LossWeightSettings) -> Dict[str, StreamTarget]:
    return {
        TEXT_HEAD: stream_target(U, StreamKind.AVSR, vocab, weights),
        TURN_HEAD: stream_target(T, StreamKind.TURN, vocab, weights),
    }


def unified_targets(R: np.ndarray, vocab: Vocabulary, weights: LossWeightSettings) -> Dict[str, StreamTarget]:
    return {TEXT_HEAD: stream_target(R, StreamKind.UNIFIED, vocab, weights)}
