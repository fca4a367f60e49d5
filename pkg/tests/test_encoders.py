"""
Tests for the acoustic tokenizer, the visual encoder and the conversation front-end.

Tests:
1. Silence and determinism of the acoustic grid
2. Visual envelope channel
3. NULL grids and grid files
4. Front-end alignment of the two grids
"""

import numpy as np
import pytest

from corpus.conversation import USER, SideScript
from corpus.synth import TARGET_RMS, Waveform
from encoders.acoustic import acoustic_tokenize, frame_samples
from encoders.grids import load_grid, load_grid_pair, null_grid, save_grid
from encoders.types import EncoderConfig, EncoderMode, GridKind
from encoders.visual import visual_encode
from exceptions import DataError, GridMismatchError
from streams.vocab import NULL_CODE


def test_silence_tokenizes_to_one_code(frontend):
    """Test 1: every silent frame gets the same code in each codebook."""
    grid = frontend.encode_waveform(Waveform(np.zeros(640 * 10)))
    assert grid.tokens.shape == (10, 16)
    assert np.all(grid.tokens == grid.tokens[0])


def test_tokenizer_is_deterministic(frontend, world):
    """Test 1b: identical waveforms give identical grids, and speech is not all silence."""
    conv = world.conversations[0]
    wave = world.side_waveform(conv, USER)
    a = frontend.encode_waveform(wave).tokens
    b = frontend.encode_waveform(Waveform(wave.samples.copy())).tokens
    assert np.array_equal(a, b)
    silence = frontend.encode_waveform(Waveform(np.zeros(640))).tokens[0]
    assert np.any(np.any(a != silence, axis=1))
    assert a.min() >= 0 and a.max() < frontend.config.codebook_size


def test_functional_tokenizer_pads_partial_frames(frontend, world):
    """Test 1c: the functional entry point matches the front-end and pads a partial last frame."""
    wave = world.side_waveform(world.conversations[0], USER)
    grid = acoustic_tokenize(wave, frontend.config, frontend.tokenizer)
    assert np.array_equal(grid.tokens, frontend.encode_waveform(wave).tokens)
    assert acoustic_tokenize(Waveform(np.zeros(700)), frontend.config, frontend.tokenizer).frames == 2


def test_empty_waveform_gives_empty_grid(frontend):
    """Test 1c: no samples, no frames."""
    assert frontend.encode_waveform(Waveform(np.zeros(0))).frames == 0


def test_silent_side_has_zero_envelope():
    """Test 2: nothing spoken leaves the envelope channel at zero."""
    config = EncoderConfig()
    grid = visual_encode(SideScript(), Waveform(np.zeros(640 * 12)), config, frames=12)
    assert grid.frames == 12
    assert np.all(grid.features[:, 0] == 0.0)
    assert grid.present.all()


def test_envelope_follows_clean_energy(world):
    """Test 2b: the envelope tracks the clean frame energy `lookahead` frames ahead."""
    config = EncoderConfig()
    conv = world.conversations[0]
    clean = world.side_waveform(conv, USER)
    grid = visual_encode(conv.sides[USER], clean, config)
    rms = np.sqrt(np.mean(frame_samples(clean, 640) ** 2, axis=1))
    la = config.lookahead
    n = len(rms) - la
    assert np.corrcoef(grid.features[:n, 0], rms[la:] / TARGET_RMS)[0, 1] > 0.9


def test_null_grids(tmp_path):
    """Test 3: NULL grids hold the NULL code or absent frames, and survive a grid file."""
    assert null_grid(GridKind.AUDIO, 0).frames == 0
    audio = null_grid(GridKind.AUDIO, 5)
    assert np.all(audio.tokens == NULL_CODE)
    visual = null_grid(GridKind.VISUAL, 5)
    assert not visual.present.any()

    save_grid(tmp_path / "a.grid", audio, "hash")
    restored, header = load_grid(tmp_path / "a.grid")
    assert header["config_hash"] == "hash"
    assert np.array_equal(restored.tokens, audio.tokens)


def test_frontend_grids_align(frontend, world):
    """Test 4: audio and visual grids cover exactly the requested frames."""
    conv = world.conversations[0]
    audio, visual = frontend.encode(conv, 40)
    assert audio.frames == visual.frames == 40
    assert visual.lookahead == frontend.config.lookahead


def test_encoder_config_hash_changes_with_mode():
    """Test 4b: the grid provenance hash covers the encoder mode."""
    assert EncoderConfig().hash() != EncoderConfig(mode=EncoderMode.SEMANTIC).hash()
    assert EncoderConfig().hash() == EncoderConfig().hash()


def test_grid_pair_files(frontend, world, tmp_path):
    """Test 4c: a saved grid pair loads back aligned; swapped kinds and foreign hashes are rejected."""
    audio, visual = frontend.encode(world.conversations[0], 40)
    save_grid(tmp_path / "a.grid", audio, "h1")
    save_grid(tmp_path / "v.grid", visual, "h1")
    loaded_audio, loaded_visual, grid_hash = load_grid_pair(tmp_path / "a.grid", tmp_path / "v.grid")
    assert grid_hash == "h1"
    assert np.array_equal(loaded_audio.tokens, audio.tokens)
    assert np.array_equal(loaded_visual.present, visual.present)

    with pytest.raises(DataError):
        load_grid_pair(tmp_path / "v.grid", tmp_path / "a.grid")
    save_grid(tmp_path / "v2.grid", visual, "h2")
    with pytest.raises(DataError):
        load_grid_pair(tmp_path / "a.grid", tmp_path / "v2.grid")
    save_grid(tmp_path / "v3.grid", null_grid(GridKind.VISUAL, 39, frontend.config), "h1")
    with pytest.raises(GridMismatchError):
        load_grid_pair(tmp_path / "a.grid", tmp_path / "v3.grid")
