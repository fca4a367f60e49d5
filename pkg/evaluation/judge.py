"""Pairwise response judging and pickup ratio.

The judge decides which of two responses to the same user turn is better.
The default scores both against the corpus's scripted reply by word
overlap; it is a stand-in for a model-based judge, not an equivalent.
"""

import logging
import math
from collections import Counter
from enum import Enum
from typing import List, Optional, Protocol, Sequence

from agents.core.interfaces import DialogueMode, SessionTrace, TraceEventKind
from streams.vocab import join_pieces

logger = logging.getLogger(__name__)


class Preference(str, Enum):
    MODEL = "model"
    GROUND_TRUTH = "ground_truth"
    TIE = "tie"


class Judge(Protocol):
    name: str

    def judge(
        self,
        gt_response: Sequence[str],
        model_response: Sequence[str],
        reference: Optional[Sequence[str]] = None,
    ) -> Preference:
        ...


def overlap_f1(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Bag-of-words F1 between two word sequences; 1.0 when both are empty."""
    if not candidate and not reference:
        return 1.0
    common = sum((Counter(candidate) & Counter(reference)).values())
    if common == 0:
        return 0.0
    precision = common / len(candidate)
    recall = common / len(reference)
    return 2 * precision * recall / (precision + recall)


class LexicalOverlapJudge:
    """Prefers the response whose words overlap the scripted reply more.

    Without a reference the ground-truth response serves as one. An empty
    model response loses to any non-empty ground truth.
    """

    name = "lexical_overlap"

    def __init__(self, margin: float = 1e-9):
        self.margin = margin

    def judge(
        self,
        gt_response: Sequence[str],
        model_response: Sequence[str],
        reference: Optional[Sequence[str]] = None,
    ) -> Preference:
        gt_response, model_response = list(gt_response), list(model_response)
        if not model_response:
            return Preference.TIE if not gt_response else Preference.GROUND_TRUTH
        if gt_response == model_response:
            return Preference.TIE
        reference = gt_response if reference is None else list(reference)
        gt_score = overlap_f1(gt_response, reference)
        model_score = overlap_f1(model_response, reference)
        if model_score > gt_score + self.margin:
            return Preference.MODEL
        if gt_score > model_score + self.margin:
            return Preference.GROUND_TRUTH
        return Preference.TIE


def judge_interface(
    gt_response: Sequence[str],
    model_response: Sequence[str],
    reference: Optional[Sequence[str]] = None,
    judge: Optional[Judge] = None,
) -> Preference:
    return (judge or LexicalOverlapJudge()).judge(gt_response, model_response, reference)


def pickup_ratio(preferences: Sequence[Preference]) -> float:
    """Share of judged turns where the model response wins; ties count half."""
    if not preferences:
        return math.nan
    wins = sum(1.0 if p == Preference.MODEL else 0.5 if p == Preference.TIE else 0.0 for p in preferences)
    return wins / len(preferences)


def responses_by_frame(trace: SessionTrace) -> dict:
    """Agent words of each SPEAKING period, keyed by every frame that opened or re-signalled it.

    A period is reachable from the frame of its SPEAKING state change and from
    every SOT decoded while it ran, so a turn start predicted mid-response
    still maps to the response being spoken.
    """
    periods: List[List[str]] = []
    keys = {}
    current = None
    for e in trace.events:
        if e.kind == TraceEventKind.STATE_CHANGE:
            if e.payload.get("mode") == DialogueMode.SPEAKING.value:
                if current is None:
                    periods.append([])
                    current = len(periods) - 1
                keys.setdefault(e.frame, current)
            else:
                current = None
        elif e.kind == TraceEventKind.TURN_TOKEN and e.payload.get("token") == "SOT":
            if current is None:
                periods.append([])
                current = len(periods) - 1
            keys.setdefault(e.frame, current)
        elif e.kind == TraceEventKind.AGENT_TOKEN and current is not None:
            periods[current].append(e.payload["token"])
    return {frame: join_pieces(periods[i]) for frame, i in keys.items()}


def judge_turns(
    model_responses: Sequence[Sequence[str]],
    gt_responses: Sequence[Sequence[str]],
    references: Optional[Sequence[Sequence[str]]] = None,
    judge: Optional[Judge] = None,
) -> List[Preference]:
    judge = judge or LexicalOverlapJudge()
    references = references if references is not None else [None] * len(gt_responses)
    if not len(model_responses) == len(gt_responses) == len(references):
        raise ValueError("model, ground-truth and reference responses must pair up")
    return [judge.judge(g, m, r) for m, g, r in zip(model_responses, gt_responses, references)]
