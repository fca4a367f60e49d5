"""Toy lip-feature encoder.

Features are computed from the clean target side only, never from the
mixture, so they carry target-speaker information whatever the acoustic
condition. Frame n sees the target `lookahead` frames ahead.
"""

import hashlib
import logging
from typing import Optional

import numpy as np

from corpus.conversation import SideScript
from corpus.synth import TARGET_RMS, Waveform
from encoders.acoustic import frame_samples
from encoders.types import EncoderConfig, VisualFeatureGrid

logger = logging.getLogger(__name__)

JITTER_BLOCK = 256
EMBEDDING_SCALE = 0.5


def word_embedding(word: str, dim: int, seed: int) -> np.ndarray:
    key = int.from_bytes(hashlib.md5(word.encode("utf-8")).digest()[:4], "little")
    return EMBEDDING_SCALE * np.random.default_rng([seed, key]).standard_normal(dim)


def _jitter(frames: int, dim: int, scale: float, seed: int) -> np.ndarray:
    """Gaussian jitter drawn per 256-frame block so a prefix never changes."""
    out = np.zeros((frames, dim))
    for block in range(-(-frames // JITTER_BLOCK)):
        lo = block * JITTER_BLOCK
        hi = min(lo + JITTER_BLOCK, frames)
        out[lo:hi] = scale * np.random.default_rng([seed, 0x717, block]).standard_normal((JITTER_BLOCK, dim))[: hi - lo]
    return out


def visual_encode(
    side: SideScript,
    clean: Waveform,
    config: EncoderConfig,
    frames: Optional[int] = None,
    fps: int = 25,
) -> VisualFeatureGrid:
    """Encode the target side's clean speech into per-frame visual features.

    Channel 0 is the clean energy envelope at frame ``n + lookahead``;
    channels 1..D_v-2 embed the word being articulated at that frame; the last
    channel is seeded jitter.

    Args:
        side: Target-side script (word identities and timings)
        clean: Clean rendering of the same side
        config: Encoder configuration
        frames: Output length; defaults to the waveform's frame count
        fps: Frame rate

    Returns:
        Visual grid with every frame present
    """
    spf = clean.sample_rate // fps
    rms = np.sqrt(np.mean(frame_samples(clean, spf) ** 2, axis=1))
    frames = len(rms) if frames is None else frames
    dim = config.visual_dim
    la = config.lookahead
    features = np.zeros((frames, dim))

    ahead = np.zeros(frames)
    n = max(0, min(frames, len(rms) - la))
    ahead[:n] = rms[la:la + n]
    features[:, 0] = ahead / TARGET_RMS

    frame_duration = 1.0 / fps
    for word in side.words:
        # Frames whose lookahead-shifted midpoint falls inside the word.
        first = int(np.ceil(word.t_start / frame_duration - 0.5)) - la
        last = int(np.ceil(word.t_end / frame_duration - 0.5)) - la
        lo, hi = max(first, 0), min(last, frames)
        if hi > lo:
            features[lo:hi, 1:dim - 1] = word_embedding(word.word, dim - 2, config.projection_seed)

    features[:, dim - 1] += _jitter(frames, 1, config.visual_jitter, config.projection_seed)[:, 0]
    return VisualFeatureGrid(features=features, present=np.ones(frames, dtype=bool), lookahead=la)
