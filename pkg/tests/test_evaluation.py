"""
Tests for the evaluation harness.

Tests:
1. Word error rate and edit counts
2. Offset extraction, pairing and turn metrics
3. Ground-truth traces score perfectly against their own annotations
4. Offset histogram
5. Perplexity
6. Response judging and pickup ratio
7. Evaluation cases, the evaluator and SNR sweeps
8. Report files
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from agents.core import SessionTrace, TraceEventKind
from corpus.mixing import MixCondition
from evaluation.judge import (
    LexicalOverlapJudge,
    Preference,
    judge_interface,
    judge_turns,
    overlap_f1,
    pickup_ratio,
    responses_by_frame,
)
from evaluation.perplexity import NLLSum, perplexity, token_nll
from evaluation.reports import read_report, row_from_result, rows_from_sweep, write_histogram, write_report
from evaluation.runner import EvalTask, Evaluator, Modality, make_cases
from evaluation.sweep import mean_over, snr_bins, sweep_snr
from evaluation.turns import (
    FTORecord,
    conversation_records,
    extract_ftos,
    fto_histogram,
    ground_truth_trace,
    turn_metrics,
)
from evaluation.wer import corpus_counts, edit_counts, wer
from exceptions import ConfigurationError
from model.config import ModelConfig, ModelVariant
from model.params import init_parameters
from model.transformer import DuplexTransformer
from streams.grid import FrameGrid
from streams.vocab import EMP_ID

GRID = FrameGrid()


def _levenshtein(a, b) -> int:
    row = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        prev, row[0] = row[0], i
        for j, y in enumerate(b, 1):
            prev, row[j] = row[j], min(row[j] + 1, row[j - 1] + 1, prev + (x != y))
    return row[-1]


def _sot_trace(*frames: int) -> SessionTrace:
    trace = SessionTrace(session_id="t")
    for frame in frames:
        trace.append(frame, TraceEventKind.TURN_TOKEN, token="SOT")
    return trace


def _records(*ftos) -> list:
    return [FTORecord(10.0, None if f is None else 10.0 + f, 0.0) for f in ftos]


def test_wer_examples():
    """Test 1: one substitution in three words, and the empty cases."""
    assert wer(["a", "b", "c"], ["a", "x", "c"]) == pytest.approx(1 / 3)
    assert wer([], []) == 0.0
    assert wer([], ["a", "b"]) == 2.0
    assert wer(["a", "b"], []) == 1.0
    counts = edit_counts(["a", "b", "c"], ["b", "c", "d"])
    assert (counts.substitutions, counts.deletions, counts.insertions) == (0, 1, 1)


def test_corpus_wer_sums_before_dividing():
    """Test 1b: corpus WER is total errors over total reference words."""
    total = corpus_counts([(["a"], ["b"]), (["a", "b", "c"], ["a", "b", "c"])])
    assert total.wer == pytest.approx(1 / 4)


@hyp_settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from("abc"), max_size=8), st.lists(st.sampled_from("abc"), max_size=8))
def test_edit_counts_are_minimal_and_consistent(ref, hyp):
    """Test 1c: errors equal the edit distance and the counts account for every hypothesis word."""
    counts = edit_counts(ref, hyp)
    assert counts.errors == _levenshtein(ref, hyp)
    assert len(ref) - counts.deletions + counts.insertions == len(hyp)


def test_extract_ftos_examples():
    """Test 2: SOT at frame 287 after a turn end at 10.0 s is 1.48 s; frame 250 after 10.5 s is -0.5 s."""
    late = extract_ftos(_sot_trace(287), [10.0], GRID)
    assert late[0].fto == pytest.approx(1.48)
    early = extract_ftos(_sot_trace(250), [10.5], GRID)
    assert early[0].fto == pytest.approx(-0.5)
    silent = extract_ftos(_sot_trace(), [4.0, 8.0], GRID)
    assert [r.responded for r in silent] == [False, False]


def test_each_sot_answers_one_turn():
    """Test 2b: one SOT cannot answer two turn ends, and unsorted ends are rejected."""
    records = extract_ftos(_sot_trace(275), [10.0, 12.0], GRID)
    assert records[0].agent_sot == pytest.approx(11.0)
    assert not records[1].responded
    with pytest.raises(ValueError):
        extract_ftos(_sot_trace(), [5.0, 4.0], GRID)


def test_turn_metrics_examples():
    """Test 2c: offsets {-3, 0.5, 2.9, 4.0} give a response ratio of 0.5."""
    metrics = turn_metrics(_records(-3.0, 0.5, 2.9, 4.0))
    assert metrics.response_ratio == pytest.approx(0.5)
    assert metrics.median_fto == pytest.approx(1.7)
    assert metrics.n_no_response == 0

    silent = turn_metrics(_records(None, None))
    assert silent.response_ratio == 0.0
    assert math.isnan(silent.fto_mae)
    assert silent.n_no_response == 2


def test_ground_truth_trace_scores_perfectly(world):
    """Test 3: annotations replayed as a trace reproduce every reference offset exactly."""
    for conv in world.conversations:
        trace = ground_truth_trace(conv, world.grid, world.vocab)
        records = conversation_records(trace, conv, world.grid)
        assert len(records) == len(conv.user_turn_ends())
        if records:
            assert all(r.responded for r in records)
            assert turn_metrics(records).fto_mae == 0.0


def test_histogram_bins_and_overflow():
    """Test 4: [-2, 10] in 0.5 s bins is 24 bins; late offsets and non-responses overflow."""
    histogram = fto_histogram(_records(0.25, 0.3, 11.0, None))
    assert len(histogram.counts) == 24
    assert histogram.counts[4] == 2
    assert histogram.overflow == 2
    assert histogram.total == 4
    assert len(histogram.rows()) == 25


def test_perplexity():
    """Test 5: uniform predictions give |V|, EMP positions are skipped, certainty gives 1."""
    V = 10
    uniform = np.full((4, V), -math.log(V))
    assert perplexity(uniform, [3, 4, 5, 6]) == pytest.approx(V)
    assert token_nll(uniform, [3, EMP_ID, 5, EMP_ID]).count == 2
    assert perplexity(uniform, [3, EMP_ID, 5, EMP_ID]) == pytest.approx(V)

    certain = np.full((2, V), -np.inf)
    certain[:, 7] = 0.0
    assert perplexity(certain, [7, 7]) == pytest.approx(1.0)
    assert math.isnan(NLLSum().perplexity)


def test_judge_preferences():
    """Test 6: identical responses tie, empty ones lose, closer ones win."""
    judge = LexicalOverlapJudge()
    assert judge.judge(["ka", "mi"], ["ka", "mi"]) == Preference.TIE
    assert judge.judge(["ka"], []) == Preference.GROUND_TRUTH
    assert judge.judge([], []) == Preference.TIE
    assert judge_interface(["ka"], ["ka"]) == Preference.TIE
    assert judge.judge(["zu"], ["ka", "mi"], reference=["ka", "mi"]) == Preference.MODEL
    assert judge.judge(["ka", "mi"], ["zu"], reference=["ka", "mi"]) == Preference.GROUND_TRUTH
    assert overlap_f1(["a", "b"], ["a", "c"]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        judge_turns([["a"]], [], None, judge)


def test_pickup_ratio_counts_ties_half():
    """Test 6b: wins count one and ties one half."""
    prefs = [Preference.MODEL, Preference.TIE, Preference.GROUND_TRUTH, Preference.GROUND_TRUTH]
    assert pickup_ratio(prefs) == pytest.approx(0.375)
    assert math.isnan(pickup_ratio([]))


def test_responses_by_frame():
    """Test 6c: agent pieces are collected per speaking period."""
    trace = SessionTrace()
    trace.append(3, TraceEventKind.STATE_CHANGE, mode="speaking")
    trace.append(4, TraceEventKind.AGENT_TOKEN, token="ka")
    trace.append(5, TraceEventKind.AGENT_TOKEN, token="##lo")
    trace.append(6, TraceEventKind.STATE_CHANGE, mode="listening", reason="complete")
    trace.append(7, TraceEventKind.AGENT_TOKEN, token="mi")
    assert responses_by_frame(trace) == {3: ["ka-lo"]}


def test_sot_during_speaking_maps_to_ongoing_response():
    """Test 6d: an SOT decoded mid-response finds the words being spoken; a later turn gets its own."""
    trace = SessionTrace()
    trace.append(3, TraceEventKind.TURN_TOKEN, token="SOT")
    trace.append(3, TraceEventKind.STATE_CHANGE, mode="speaking")
    trace.append(4, TraceEventKind.AGENT_TOKEN, token="ka")
    trace.append(5, TraceEventKind.AGENT_TOKEN, token="##lo")
    trace.append(5, TraceEventKind.TURN_TOKEN, token="SOT")
    trace.append(6, TraceEventKind.AGENT_TOKEN, token="mi")
    trace.append(7, TraceEventKind.STATE_CHANGE, mode="listening", reason="complete")
    trace.append(9, TraceEventKind.TURN_TOKEN, token="SOT")
    trace.append(9, TraceEventKind.STATE_CHANGE, mode="speaking")
    trace.append(10, TraceEventKind.AGENT_TOKEN, token="su")
    assert responses_by_frame(trace) == {3: ["ka-lo", "mi"], 5: ["ka-lo", "mi"], 9: ["su"]}


def test_make_cases_are_reproducible(world):
    """Test 7: equal arguments build equal cases; forced SNRs are kept."""
    a = make_cases(world, MixCondition.BG, 3, seed=5, snr_db=4.0)
    b = make_cases(world, MixCondition.BG, 3, seed=5, snr_db=4.0)
    assert [c.spec for c in a] == [c.spec for c in b]
    assert all(c.spec.snr_db == 4.0 for c in a)
    assert [c.conversation.id for c in a] == [world.held_out[0].id] * 3


def _evaluator(world, frontend, settings, model_config, variant=ModelVariant.DUAL) -> Evaluator:
    config = ModelConfig(**{**model_config.to_dict(), "variant": variant})
    return Evaluator(world, frontend, DuplexTransformer(config, init_parameters(config, seed=2)), settings, name=variant.value)


def test_unified_models_have_no_transcription(world, frontend, settings, model_config):
    """Test 7b: transcription on a unified model fails before any session runs."""
    evaluator = _evaluator(world, frontend, settings, model_config, ModelVariant.UNIFIED)
    with pytest.raises(ConfigurationError):
        evaluator.evaluate(make_cases(world, MixCondition.CLEAN, 1, seed=0), EvalTask.AVSR)


def test_perplexity_evaluation(world, frontend, settings, model_config):
    """Test 7c: teacher-forced scoring gives a finite perplexity above one."""
    evaluator = _evaluator(world, frontend, settings, model_config)
    result = evaluator.evaluate(make_cases(world, MixCondition.CLEAN, 1, seed=0), EvalTask.PPL, Modality.AUDIO)
    assert math.isfinite(result.perplexity)
    assert result.perplexity > 1.0


def test_clean_sweep_and_reports(world, frontend, settings, model_config, tmp_path):
    """Test 7d: a clean sweep has the single bin inf, and its report reads back header first."""
    evaluator = _evaluator(world, frontend, settings, model_config)
    report = sweep_snr({"dual": evaluator}, MixCondition.CLEAN, world, settings, seed=0, task=EvalTask.TURNS)
    assert report.bins == [math.inf]
    cell = report.cell("dual", math.inf)
    assert cell.result.n == settings.eval.samples_per_bin
    assert cell.summary()["snr"] == "inf"
    assert mean_over(report, "dual", "n") == settings.eval.samples_per_bin

    paths = write_report(tmp_path, "clean", rows_from_sweep(report, settings), settings, seed=0)
    header, rows = read_report(paths["jsonl"])
    assert header.kind == "eval"
    assert header.seed == 0
    assert [r.model for r in rows] == ["dual"]
    assert paths["csv"].read_text().splitlines()[0].startswith("model,condition,snr")

    histogram_path = write_histogram(tmp_path / "hist.csv", evaluator.histogram(cell.result))
    assert len(histogram_path.read_text().splitlines()) == 26


def test_report_rows_drop_non_finite(world, frontend, settings, model_config):
    """Test 8: NaN metrics are written as missing values."""
    evaluator = _evaluator(world, frontend, settings, model_config)
    result = evaluator.evaluate([], EvalTask.AVSR, condition="clean")
    row = row_from_result("dual", result, settings, seed=1)
    assert row.wer is None
    assert row.n == 0


def test_snr_bins():
    """Test 8b: [-8, 12] in 4 dB steps is six bins."""
    assert snr_bins() == [-8.0, -4.0, 0.0, 4.0, 8.0, 12.0]
    assert snr_bins(0.0, 0.0, 1.0) == [0.0]
    with pytest.raises(ValueError):
        snr_bins(0.0, 4.0, 0.0)
