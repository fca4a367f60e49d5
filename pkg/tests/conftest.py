"""Shared fixtures: a tiny world, front-end and model config for fast tests."""

import pytest

from config.settings import load_settings
from corpus.world import CorpusWorld
from encoders.grids import FrontEnd
from encoders.types import EncoderConfig
from model.config import ModelConfig

TINY = {
    "environment": "development",
    "log_format": "text",
    "corpus": {"n_conversations": 4, "n_turns": 4, "n_interferer_conversations": 2, "held_out_fraction": 0.25},
    "augment": {"noise_bank_size": 2},
    "model": {"d_model": 16, "n_layers": 1, "n_heads": 2, "max_context": 600},
    "stage1": {"steps": 0, "batch_size": 1, "max_frames": 96},
    "stage2": {"steps": 0, "batch_size": 1, "window_frames": 64},
    "eval": {"samples_per_bin": 1, "n_eval_conversations": 1},
}


@pytest.fixture(scope="session")
def settings():
    return load_settings(None, TINY)


@pytest.fixture(scope="session")
def world(settings):
    return CorpusWorld(settings, seed=3)


@pytest.fixture(scope="session")
def frontend(world, settings):
    return FrontEnd(world, EncoderConfig.from_settings(settings.encoder))


@pytest.fixture(scope="session")
def model_config(world, settings):
    return ModelConfig.from_settings(settings, len(world.vocab), "dual")
