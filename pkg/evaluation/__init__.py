"""Evaluation harness: WER, turn-taking metrics, perplexity, judging, sweeps and reports."""

from evaluation.judge import LexicalOverlapJudge, Preference, judge_interface, pickup_ratio
from evaluation.perplexity import NLLSum, perplexity
from evaluation.runner import EvalCase, EvalResult, EvalTask, Evaluator, Modality, make_cases
from evaluation.sweep import SweepReport, snr_bins, sweep_snr
from evaluation.turns import (
    NO_RESPONSE,
    FTOHistogram,
    FTORecord,
    TurnMetrics,
    extract_ftos,
    fto_histogram,
    ground_truth_ftos,
    ground_truth_trace,
    turn_metrics,
)
from evaluation.wer import EditCounts, edit_counts, wer

__all__ = [
    "EditCounts",
    "EvalCase",
    "EvalResult",
    "EvalTask",
    "Evaluator",
    "FTOHistogram",
    "FTORecord",
    "LexicalOverlapJudge",
    "Modality",
    "NLLSum",
    "NO_RESPONSE",
    "Preference",
    "SweepReport",
    "TurnMetrics",
    "edit_counts",
    "extract_ftos",
    "fto_histogram",
    "ground_truth_ftos",
    "ground_truth_trace",
    "judge_interface",
    "make_cases",
    "perplexity",
    "pickup_ratio",
    "snr_bins",
    "sweep_snr",
    "turn_metrics",
    "wer",
]
