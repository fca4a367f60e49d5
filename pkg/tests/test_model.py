"""
Tests for the multi-stream transformer, its loss, decoding and checkpoints.

Tests:
1. Input fusion and id validation
2. Streaming decode against full-sequence forward
3. Weighted cross-entropy edge cases
4. Backward pass against finite differences
5. Decoders
6. Checkpoint files
"""

import numpy as np
import pytest

from config.environments.base import LossWeightSettings
from exceptions import CheckpointError, ContextOverflowError, VocabularyError
from model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from model.config import ModelConfig, ModelVariant
from model.decode import decode, decode_greedy, decode_sample
from model.loss import dual_targets, stream_ce, stream_target, weighted_ce_loss
from model.params import init_parameters
from model.transformer import TEXT_HEAD, TURN_HEAD, DuplexTransformer
from streams.targets import StreamInputs, teacher_forced
from streams.types import StreamKind
from streams.vocab import BACKCHANNEL_ID, EMP_ID, NULL_CODE, NULL_ID, SOT_ID, Vocabulary

VOCAB = Vocabulary.from_words(["ka-lo", "mi", "su"])
TINY = ModelConfig(d_model=8, n_layers=2, n_heads=2, vocab_size=len(VOCAB), codebook_size=8, visual_dim=4, max_context=32)


def _inputs(frames: int, seed: int = 0, config: ModelConfig = TINY) -> StreamInputs:
    rng = np.random.default_rng(seed)
    audio = rng.integers(0, config.codebook_size, size=(frames, 16))
    audio[rng.random(frames) < 0.2] = NULL_CODE
    present = rng.random(frames) < 0.7
    text = rng.choice([EMP_ID, *range(VOCAB.n_special, len(VOCAB))], size=frames)
    turn = rng.choice([EMP_ID, SOT_ID, BACKCHANNEL_ID], size=frames)
    return StreamInputs(audio, rng.standard_normal((frames, config.visual_dim)), present, teacher_forced(text), teacher_forced(turn))


def _model(config: ModelConfig = TINY, seed: int = 0) -> DuplexTransformer:
    return DuplexTransformer(config, init_parameters(config, seed))


def test_all_null_inputs_embed_to_zero():
    """Test 1: NULL audio, absent visual and NULL previous tokens give a zero embedding."""
    model = _model()
    e = model.embed_step(np.full(16, NULL_CODE), np.ones(4), False, NULL_ID, NULL_ID)
    assert np.array_equal(e, np.zeros(TINY.d_model))


def test_out_of_range_ids_are_rejected():
    """Test 1b: token and code ids outside their tables raise."""
    model = _model()
    with pytest.raises(VocabularyError):
        model.embed_step(np.zeros(16, dtype=int), np.zeros(4), True, len(VOCAB), EMP_ID)
    with pytest.raises(VocabularyError):
        model.embed_step(np.full(16, TINY.codebook_size), np.zeros(4), True, EMP_ID, EMP_ID)


def test_heads_follow_variant():
    """Test 1c: dual models have a turn head, unified ones do not."""
    assert _model().head_names == (TEXT_HEAD, TURN_HEAD)
    unified = ModelConfig(**{**TINY.to_dict(), "variant": ModelVariant.UNIFIED})
    assert _model(unified).head_names == (TEXT_HEAD,)


def test_streaming_matches_sequence_forward():
    """Test 2: N cached steps reproduce one forward pass of length N."""
    model = _model(seed=4)
    inputs = _inputs(20, seed=1)
    full = model.forward_sequence(inputs).logits
    cache = model.new_cache()
    for n in range(inputs.frames):
        step, cache = model.step_with_cache(
            cache, inputs.audio[n], inputs.visual[n], bool(inputs.visual_present[n]), int(inputs.prev_text[n]), int(inputs.prev_turn[n])
        )
        for head in model.head_names:
            assert np.max(np.abs(step.logits[head] - full[head][n])) < 1e-5


def test_single_frame_equivalence():
    """Test 2b: a length-1 sequence equals one cached step."""
    model = _model(seed=2)
    inputs = _inputs(1, seed=3)
    full = model.forward_sequence(inputs).logits
    step, _ = model.step_with_cache(model.new_cache(), inputs.audio[0], inputs.visual[0], bool(inputs.visual_present[0]), int(inputs.prev_text[0]), int(inputs.prev_turn[0]))
    assert np.allclose(step.logits[TEXT_HEAD], full[TEXT_HEAD][0], atol=1e-9)


def test_context_overflow():
    """Test 2c: sequences and caches stop at max_context."""
    model = _model()
    with pytest.raises(ContextOverflowError):
        model.forward_sequence(_inputs(TINY.max_context + 1))
    cache = model.new_cache()
    cache.position = TINY.max_context
    with pytest.raises(ContextOverflowError):
        model.step_with_cache(cache, np.zeros(16, dtype=int), np.zeros(4), True, EMP_ID, EMP_ID)


def test_all_null_targets_have_zero_loss():
    """Test 3: no loss-bearing positions, zero loss and zero gradient."""
    target = stream_target(np.full(5, NULL_ID), StreamKind.AVSR, VOCAB, LossWeightSettings())
    loss, grad = stream_ce(np.random.default_rng(0).standard_normal((5, len(VOCAB))), target)
    assert loss == 0.0
    assert not grad.any()


def test_perfect_prediction_has_near_zero_loss():
    """Test 3b: confident correct logits drive the loss to zero."""
    tokens = np.array([EMP_ID, VOCAB.id_of("mi"), NULL_ID])
    target = stream_target(tokens, StreamKind.AVSR, VOCAB, LossWeightSettings())
    logits = np.full((3, len(VOCAB)), -50.0)
    logits[np.arange(3), np.where(tokens == NULL_ID, 0, tokens)] = 50.0
    loss, _ = stream_ce(logits, target)
    assert loss < 1e-20
    assert target.n_valid == 2


def _loss(model: DuplexTransformer, inputs: StreamInputs, targets) -> float:
    loss, _ = weighted_ce_loss(model.forward_sequence(inputs).logits, targets)
    return loss


def test_gradients_match_finite_differences():
    """Test 4: every parameter's analytic gradient agrees with central differences."""
    config = ModelConfig(**{**TINY.to_dict(), "variant": ModelVariant.DUAL, "init_std": 0.3, "max_context": 8})
    params = init_parameters(config, seed=5)
    model = DuplexTransformer(config, params)
    inputs = _inputs(6, seed=6, config=config)
    rng = np.random.default_rng(7)
    U = rng.choice([EMP_ID, VOCAB.id_of("mi"), VOCAB.id_of("su"), NULL_ID], size=6)
    T = rng.choice([EMP_ID, SOT_ID, BACKCHANNEL_ID], size=6)
    targets = dual_targets(U, T, VOCAB, LossWeightSettings())

    params.zero_grad()
    out = model.forward_sequence(inputs)
    _, grads = weighted_ce_loss(out.logits, targets)
    model.backward(grads)

    eps = 1e-5
    for name, value in params.items():
        flat = value.reshape(-1)
        analytic = params.grads[name].reshape(-1)
        picks = rng.choice(flat.size, size=min(4, flat.size), replace=False)
        nonzero = np.flatnonzero(analytic)
        if nonzero.size:
            picks = np.append(picks, nonzero[0])
        for i in picks:
            original = flat[i]
            flat[i] = original + eps
            up = _loss(model, inputs, targets)
            flat[i] = original - eps
            down = _loss(model, inputs, targets)
            flat[i] = original
            numeric = (up - down) / (2 * eps)
            assert abs(analytic[i] - numeric) <= 1e-3 * max(abs(analytic[i]), abs(numeric)) + 1e-8, (name, i)


def test_zero_loss_gives_zero_gradient():
    """Test 4b: all-NULL targets accumulate nothing."""
    model = _model()
    inputs = _inputs(4)
    targets = dual_targets(np.full(4, NULL_ID), np.full(4, NULL_ID), VOCAB, LossWeightSettings())
    model.params.zero_grad()
    out = model.forward_sequence(inputs)
    loss, grads = weighted_ce_loss(out.logits, targets)
    model.backward(grads)
    assert loss == 0.0
    assert all(not g.any() for g in model.params.grads.values())


def test_decoders():
    """Test 5: one-hot logits decode to their token; greedy ties go to the lowest id."""
    logits = np.zeros(10)
    logits[6] = 1000.0
    assert decode_greedy(logits) == 6
    assert decode_sample(logits, 1.0, seed=0) == 6
    tie = np.zeros(10)
    tie[[3, 7]] = 5.0
    assert decode_greedy(tie) == 3
    assert decode(tie, temperature=0.0) == 3
    with pytest.raises(ValueError):
        decode_sample(tie, -1.0)


def test_checkpoint_round_trip(tmp_path):
    """Test 6: parameters survive a checkpoint file at float32 precision."""
    params = init_parameters(TINY, seed=1)
    save_checkpoint(tmp_path / "m.ckpt", Checkpoint(TINY, params, VOCAB.hash(), step=3, config_hash="abc"))
    restored = load_checkpoint(tmp_path / "m.ckpt", VOCAB.hash())
    assert restored.config == TINY
    assert restored.step == 3
    for name, value in params.items():
        assert np.allclose(restored.params[name], value.astype(np.float32), rtol=0, atol=0)


def test_checkpoint_rejects_wrong_vocabulary_and_garbage(tmp_path):
    """Test 6b: vocabulary mismatches, bad files and truncation raise CheckpointError."""
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, Checkpoint(TINY, init_parameters(TINY, seed=1), VOCAB.hash()))
    with pytest.raises(CheckpointError):
        load_checkpoint(path, "0" * 64)
    (tmp_path / "bad.ckpt").write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "bad.ckpt")
    (tmp_path / "cut.ckpt").write_bytes(path.read_bytes()[:-8])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "cut.ckpt")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.ckpt")
