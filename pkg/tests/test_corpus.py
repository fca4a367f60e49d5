"""
Tests for the synthetic conversation world and cocktail-party mixing.

Tests:
1. Conversation generator determinism and edge cases
2. Floor-transfer offset distribution
3. Speech synthesis spans and voices
4. SNR measurement and mixing
5. Condition frequencies and evaluation specs
6. Corpus directory output
"""

import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from config.environments.base import AugmentSettings, LexiconSettings
from corpus.conversation import AGENT, OVERLAP_RANGE, USER, ConversationParams, FTOSampler, SideScript, gen_conversation
from corpus.lexicon import Lexicon, build_lexicon
from corpus.mixing import Augmenter, MixCondition, MixSpec, NoiseBank, gen_eval_condition, measure_snr, mix_at_snr
from corpus.store import manifest_hash, read_conversations, write_corpus
from corpus.synth import Waveform, synth_speech
from corpus.world import CorpusWorld
from exceptions import CorpusError, DataError
from streams.types import TurnKind, WordTiming

LEXICON = build_lexicon(LexiconSettings())


def test_generator_is_deterministic():
    """Test 1: the same seed gives a byte-identical conversation."""
    params = ConversationParams()
    a = gen_conversation(11, params, LEXICON)
    b = gen_conversation(11, params, LEXICON)
    assert a.to_json() == b.to_json()
    assert a.to_json() != gen_conversation(12, params, LEXICON).to_json()


def test_zero_turns_gives_empty_conversation():
    """Test 1b: n_turns=0 leaves both sides and the offsets empty."""
    conv = gen_conversation(0, ConversationParams(n_turns=0), LEXICON)
    assert conv.fto_list == []
    assert all(not side.words and not side.turns for side in conv.sides)


def test_empty_lexicon_is_rejected():
    """Test 1c: a lexicon needs content words."""
    with pytest.raises(CorpusError):
        Lexicon(words=())


def test_generated_timings_are_consistent():
    """Test 1d: floors alternate starting with the user and words never overlap on one side."""
    conv = gen_conversation(5, ConversationParams(n_turns=6), LEXICON)
    assert conv.transfers[0].from_side == USER
    assert [t.to_side for t in conv.transfers] == [AGENT, USER, AGENT, USER, AGENT]
    for side in conv.sides:
        for a, b in zip(side.words, side.words[1:]):
            assert a.t_end <= b.t_start + 1e-9
    assert conv.duration >= max(side.end for side in conv.sides)


def test_constant_fto_places_turns_exactly():
    """Test 2: with a constant 1.5 s offset every transfer starts 1.5 s after the previous floor ends."""
    params = ConversationParams(n_turns=6, overlap_rate=0.0, fto_distribution="constant", fto_median=1.5)
    conv = gen_conversation(3, params, LEXICON)
    assert conv.transfers
    for transfer in conv.transfers:
        assert transfer.kind == TurnKind.NORMAL
        assert transfer.fto == pytest.approx(1.5, abs=1e-9)


def test_fto_sampler_median():
    """Test 2b: the sampled offsets have median 1.5 s and the configured overlap share."""
    params = ConversationParams()
    sampler = FTOSampler(params)
    rng = np.random.default_rng(0)
    draws = [sampler.draw(rng) for _ in range(10_000)]
    assert 1.45 <= statistics.median(f for f, _ in draws) <= 1.55
    overlap = sum(1 for _, kind in draws if kind == TurnKind.OVERLAPPING) / len(draws)
    assert 0.08 <= overlap <= 0.12


def test_default_corpus_median_fto():
    """Test 2c: a default-sized corpus reports a median offset within [1.4, 1.6] s."""
    params = ConversationParams()
    ftos = [f for seed in range(200) for f in gen_conversation(seed, params, LEXICON).fto_list]
    assert 1.4 <= statistics.median(ftos) <= 1.6


def test_onset_bounds_keep_the_median_with_frequent_overlaps():
    """Test 2d: with 30% overlapping draws the realized median stays at 1.5 s and no overlap exceeds 1 s."""
    params = ConversationParams(overlap_rate=0.3)
    ftos = [f for seed in range(400) for f in gen_conversation(seed, params, LEXICON).fto_list]
    assert 1.4 <= statistics.median(ftos) <= 1.6
    assert min(ftos) >= -OVERLAP_RANGE[1] - 1e-9


def test_synthesis_spans():
    """Test 3: one 0.2 s word at 1.0 s only sounds in samples [16000, 19200)."""
    side = SideScript(words=[WordTiming("ka-lo", 1.0, 1.2)])
    samples = synth_speech(side, voice_seed=1, duration=2.0).samples
    assert len(samples) == 32000
    assert np.all(samples[:16000] == 0.0)
    assert np.all(samples[19200:] == 0.0)
    assert np.sum(samples[16000:19200] ** 2) > 0.0


def test_empty_script_is_silence():
    """Test 3b: an empty script renders zeros of the requested length."""
    samples = synth_speech(SideScript(), voice_seed=1, duration=0.5).samples
    assert len(samples) == 8000
    assert not samples.any()


def test_voices_differ():
    """Test 3c: the same words in two voices are weakly correlated."""
    side = SideScript(words=[WordTiming("ka-lo-mi", 0.0, 0.4)])
    a = synth_speech(side, voice_seed=1).samples
    b = synth_speech(side, voice_seed=2).samples
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.5


def test_measure_snr():
    """Test 4: equal power is 0 dB, half amplitude is +6.02 dB, silent target is -inf."""
    rng = np.random.default_rng(1)
    x = Waveform(rng.standard_normal(4000) * 0.1)
    assert measure_snr(x, x) == pytest.approx(0.0)
    assert measure_snr(x, Waveform(0.5 * x.samples)) == pytest.approx(20 * math.log10(2), abs=1e-9)
    assert measure_snr(Waveform(np.zeros(4000)), x) == -math.inf
    assert measure_snr(x, Waveform(np.zeros(4000))) == math.inf


@hyp_settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-10.0, max_value=15.0), st.integers(min_value=0, max_value=10_000))
def test_mix_hits_requested_snr(snr_db, seed):
    """Test 4b: the re-measured SNR of a mixture equals the requested one."""
    rng = np.random.default_rng(seed)
    target = Waveform(0.01 * rng.standard_normal(3200))
    noise = Waveform(0.01 * rng.standard_normal(2000))
    mixed = mix_at_snr(target, noise, snr_db)
    residual = Waveform(mixed.samples - target.samples)
    assert measure_snr(target, residual) == pytest.approx(snr_db, abs=1e-6)


def test_mix_gain_examples():
    """Test 4c: equal powers mix with gain 1 at 0 dB and 0.5 at +6.02 dB."""
    x = Waveform(0.1 * np.sin(np.linspace(0, 40 * np.pi, 1600, endpoint=False)))
    y = Waveform(0.1 * np.cos(np.linspace(0, 40 * np.pi, 1600, endpoint=False)))
    assert np.allclose(mix_at_snr(x, y, 0.0).samples - x.samples, y.samples)
    assert np.allclose(mix_at_snr(x, y, 20 * math.log10(2)).samples - x.samples, 0.5 * y.samples)
    with pytest.raises(DataError):
        mix_at_snr(x, Waveform(np.zeros(1600)), 0.0)


def test_condition_frequencies():
    """Test 5: 10,000 training draws follow the 20/40/40 split."""
    augmenter = Augmenter(AugmentSettings(), NoiseBank(1, 0, clip_seconds=0.1), [])
    rng = np.random.default_rng(7)
    draws = [augmenter.draw_condition(rng) for _ in range(10_000)]
    assert 0.18 <= draws.count(MixCondition.CLEAN) / 10_000 <= 0.22
    assert 0.37 <= draws.count(MixCondition.BG) / 10_000 <= 0.43
    assert 0.37 <= draws.count(MixCondition.INTERF) / 10_000 <= 0.43


def test_eval_specs(world):
    """Test 5b: forced conditions give clean, exact-SNR background and valid interference specs."""
    augmenter = world.augmenter
    rng = np.random.default_rng(0)
    assert augmenter.eval_spec(rng, MixCondition.CLEAN).snr_db is None

    target = Waveform(0.05 * np.sin(np.linspace(0, 400 * np.pi, 16000)))
    spec = augmenter.eval_spec(rng, MixCondition.BG, 0.0)
    mixed = augmenter.render(target, spec)
    assert measure_snr(target, Waveform(mixed.samples - target.samples)) == pytest.approx(0.0, abs=1e-6)

    interf = augmenter.eval_spec(rng, MixCondition.INTERF, -7.0)
    assert interf.condition == MixCondition.INTERF
    assert interf.snr_db == -7.0
    assert 1 <= interf.n_interferers <= min(4, len(world.interferers))


def test_mix_spec_validation():
    """Test 5c: specs reject contradictory fields."""
    with pytest.raises(DataError):
        MixSpec(MixCondition.CLEAN, snr_db=3.0)
    with pytest.raises(DataError):
        MixSpec(MixCondition.BG, snr_db=0.0)
    with pytest.raises(DataError):
        MixSpec(MixCondition.INTERF, snr_db=0.0, n_interferers=5, interferer_ids=(0, 1, 2, 3, 4))


def test_gen_eval_condition():
    """Test 5d: the condition is forced and SNRs come from the evaluation range unless fixed."""
    rng = np.random.default_rng(11)
    assert gen_eval_condition(MixCondition.CLEAN, rng).snr_db is None
    for _ in range(200):
        spec = gen_eval_condition(MixCondition.BG, rng)
        assert spec.condition == MixCondition.BG
        assert -8.0 <= spec.snr_db <= 12.0
    fixed = gen_eval_condition(MixCondition.INTERF, rng, snr_db=10.0)
    assert fixed.snr_db == 10.0
    assert 1 <= fixed.n_interferers <= 4


def test_corpus_directory(world, settings, tmp_path):
    """Test 6: the corpus writes one manifest line per conversation and reads back the same scripts."""
    stats = write_corpus(world, tmp_path / "a", mix_seed=1)
    assert stats.n_conversations == len(world.conversations)
    lines = (tmp_path / "a" / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == len(world.conversations)
    restored = read_conversations(tmp_path / "a" / "conversations.jsonl")
    assert [c.to_json() for c in restored] == [c.to_json() for c in world.conversations]

    again = CorpusWorld(settings, seed=3)
    write_corpus(again, tmp_path / "b", mix_seed=1)
    assert manifest_hash(tmp_path / "a") == manifest_hash(tmp_path / "b")
