"""
Tests for the two training stages and the optimizer.

Tests:
1. Zero-step runs return the initial parameters
2. Seeded runs are reproducible
3. Stage-1 samples per task
4. Stage-2 windows, held-out loss and the no-SOT check
5. AdamW clipping and warmup
6. Loss log file
"""

import json

import numpy as np
import pytest

from agents.helpers import derive_seed
from config.environments.base import OptimSettings
from model.config import ModelConfig, ModelVariant
from model.optim import AdamW
from model.params import init_parameters
from model.training import AUDIO_ONLY, LossLog, Stage1Trainer, Stage2Trainer, train_stage1, train_stage2
from model.transformer import TEXT_HEAD, TURN_HEAD
from streams.targets import Stage1Task
from streams.vocab import NULL_CODE


def _same(a, b) -> bool:
    return list(a) == list(b) and all(np.array_equal(a[name], b[name]) for name in a)


def _variant(config: ModelConfig, variant: ModelVariant) -> ModelConfig:
    return ModelConfig(**{**config.to_dict(), "variant": variant})


def test_zero_steps_return_init(world, frontend, settings, model_config):
    """Test 1: steps=0 gives exactly the seeded initial parameters."""
    expected = init_parameters(model_config, derive_seed(9, "init"))
    assert _same(train_stage1(world, frontend, settings, model_config, seed=9, steps=0).params, expected)
    assert _same(train_stage2(world, frontend, settings, model_config, seed=9, steps=0).params, expected)


def test_one_step_is_reproducible(world, frontend, settings, model_config):
    """Test 2: the same seed gives identical parameters after one update, and the update moves them."""
    a = train_stage1(world, frontend, settings, model_config, seed=4, steps=1)
    b = train_stage1(world, frontend, settings, model_config, seed=4, steps=1)
    assert _same(a.params, b.params)
    assert not _same(a.params, init_parameters(model_config, derive_seed(4, "init")))
    assert len(a.log.records) == settings.stage1.batch_size
    assert np.isfinite(a.log.mean())


def test_stage2_step_is_reproducible(world, frontend, settings, model_config):
    """Test 2b: one conversation step is deterministic under a fixed seed."""
    a = train_stage2(world, frontend, settings, model_config, seed=6, steps=1)
    b = train_stage2(world, frontend, settings, model_config, seed=6, steps=1)
    assert _same(a.params, b.params)
    assert a.params.all_finite()


@pytest.mark.parametrize("task", list(Stage1Task))
def test_stage1_samples(world, frontend, settings, model_config, task):
    """Test 3: every task builds aligned inputs and targets."""
    trainer = Stage1Trainer(world, frontend, settings, model_config, settings.stage1.optim, seed=1)
    sample = trainer.build_sample(task, np.random.default_rng(2), trainer.pool)
    assert len(sample.target) == sample.inputs.frames == len(sample.mask)
    if task == Stage1Task.TEXT:
        assert np.all(sample.inputs.audio == NULL_CODE)
    else:
        assert np.any(sample.inputs.audio != NULL_CODE)
    assert sample.inputs.visual_present.any() == (task == Stage1Task.AVSR)


def test_stage2_window_and_sources(world, frontend, settings, model_config):
    """Test 4: training samples are cropped to the window and audio-only drops the visual stream."""
    trainer = Stage2Trainer(world, frontend, settings, model_config, settings.stage2.optim, seed=1)
    conv = trainer.pool[0]
    window = settings.stage2.window_frames
    sample = trainer.build_sample(conv, AUDIO_ONLY, np.random.default_rng(0), window)
    assert sample.inputs.frames <= window
    assert not sample.inputs.visual_present.any()
    for target in sample.targets.values():
        assert len(target.classes) == sample.inputs.frames


def test_heldout_loss_heads(world, frontend, settings, model_config):
    """Test 4b: dual models report text and turn losses, unified ones text only."""
    dual = Stage2Trainer(world, frontend, settings, model_config, settings.stage2.optim, seed=1)
    losses = dual.heldout_loss()
    assert sorted(losses) == sorted([TEXT_HEAD, TURN_HEAD])
    assert all(np.isfinite(v) for v in losses.values())

    unified = Stage2Trainer(world, frontend, settings, _variant(model_config, ModelVariant.UNIFIED), settings.stage2.optim, seed=1)
    assert list(unified.heldout_loss()) == [TEXT_HEAD]


def test_no_sot_targets_verified(world, frontend, settings, model_config):
    """Test 4c: the no-SOT variant trains on SOT-free targets."""
    config = _variant(model_config, ModelVariant.UNIFIED_NO_SOT)
    trainer = Stage2Trainer(world, frontend, settings, config, settings.stage2.optim, seed=1)
    trainer.verify_no_sot()
    assert "head.turn.weight" not in train_stage2(world, frontend, settings, config, seed=1, steps=0).params


def test_stage2_inherits_stage1_tensors(world, frontend, settings, model_config):
    """Test 4d: a unified stage-2 model starts from the dual stage-1 embeddings."""
    stage1 = init_parameters(model_config, seed=77)
    config = _variant(model_config, ModelVariant.UNIFIED)
    params = train_stage2(world, frontend, settings, config, seed=1, params=stage1, steps=0).params
    assert np.array_equal(params["embed.tokens"], stage1["embed.tokens"])
    assert np.array_equal(params["head.text.weight"], stage1["head.text.weight"])


def test_adamw_clipping_and_warmup():
    """Test 5: gradients are clipped to grad_clip and the rate warms up linearly."""
    config = ModelConfig(d_model=4, n_layers=1, n_heads=1, vocab_size=12, codebook_size=4, visual_dim=2, max_context=4)
    params = init_parameters(config, seed=0)
    for g in params.grads.values():
        g.fill(1.0)
    optim = AdamW(params, OptimSettings(grad_clip=1.0, warmup_steps=10))
    norm = optim.clip_gradients()
    assert norm == pytest.approx(np.sqrt(params.n_params()))
    clipped = np.sqrt(sum(float(np.sum(g * g)) for g in params.grads.values()))
    assert clipped == pytest.approx(1.0)
    assert optim.lr_at(0) == pytest.approx(3e-5)
    assert optim.lr_at(9) == pytest.approx(3e-4)
    assert optim.lr_at(50, "embed") == pytest.approx(1.5e-3)


def test_loss_log_file(tmp_path):
    """Test 6: the loss log mirrors every record as one JSON line."""
    log = LossLog(tmp_path / "loss.jsonl")
    log.append(0, "asr", 2.0)
    log.append(1, "text", 4.0)
    log.close()
    lines = (tmp_path / "loss.jsonl").read_text().splitlines()
    assert json.loads(lines[1]) == {"step": 1, "task": "text", "loss": 4.0}
    assert log.mean() == 3.0
    assert log.mean("asr") == 2.0
