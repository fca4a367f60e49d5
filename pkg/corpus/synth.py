"""Deterministic parametric speech stand-in.

Each syllable is a harmonic series on the voice's fundamental, shaped by two
formant bumps whose 1 kHz regions identify the syllable. The voice seed sets
the fundamental and the harmonic phases; the word id nudges the pitch.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from corpus.conversation import SideScript
from corpus.lexicon import N_REGIONS, syllable_regions, word_pitch_offset
from exceptions import CorpusError

logger = logging.getLogger(__name__)

TARGET_RMS = 0.1
FORMANT_BANDWIDTH = 180.0
HARMONIC_FLOOR = 0.05
RAMP_SECONDS = 0.005
F0_RANGE = (90.0, 250.0)
PITCH_SPREAD = 0.06
GOLDEN = 0.6180339887498949


@dataclass
class Waveform:
    """Mono float samples at `sample_rate` Hz."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise CorpusError(f"waveform must be mono, got shape {self.samples.shape}")
        if self.sample_rate % 25 != 0:
            raise CorpusError(f"sample rate {self.sample_rate} is not divisible by 25 fps")

    @classmethod
    def silence(cls, duration: float, sample_rate: int = 16000) -> "Waveform":
        return cls(np.zeros(int(round(duration * sample_rate))), sample_rate)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def fit(self, n_samples: int) -> "Waveform":
        """Zero-pad or cut to exactly `n_samples`."""
        out = np.zeros(n_samples)
        n = min(n_samples, len(self.samples))
        out[:n] = self.samples[:n]
        return Waveform(out, self.sample_rate)

    def __add__(self, other: "Waveform") -> "Waveform":
        if other.sample_rate != self.sample_rate:
            raise CorpusError("cannot add waveforms with different sample rates")
        n = max(len(self), len(other))
        return Waveform(self.fit(n).samples + other.fit(n).samples, self.sample_rate)


@dataclass(frozen=True)
class Voice:
    f0: float
    seed: int

    @classmethod
    def from_seed(cls, voice_seed: int) -> "Voice":
        # Golden-ratio spacing keeps consecutive seeds far apart in pitch.
        position = ((voice_seed % 10007) * GOLDEN) % 1.0
        return cls(f0=F0_RANGE[0] + position * (F0_RANGE[1] - F0_RANGE[0]), seed=voice_seed)

    def phases(self, n: int) -> np.ndarray:
        return np.random.default_rng([self.seed, 0xA5]).uniform(0.0, 2 * np.pi, size=n)


def harmonic_amplitudes(f0: float, syllable: str, sample_rate: int) -> np.ndarray:
    """Amplitude of every harmonic of `f0` below Nyquist for one syllable."""
    nyquist = sample_rate / 2
    region_width = nyquist / N_REGIONS
    freqs = f0 * np.arange(1, int((nyquist - 200.0) // f0) + 1)
    amps = np.full(len(freqs), HARMONIC_FLOOR)
    for region in syllable_regions(syllable):
        center = (region + 0.5) * region_width
        amps += np.exp(-0.5 * ((freqs - center) / FORMANT_BANDWIDTH) ** 2)
    return amps


def render_word(word: str, n_samples: int, voice: Voice, sample_rate: int) -> np.ndarray:
    """One word as a normalized harmonic burst of exactly `n_samples`."""
    if n_samples <= 0:
        return np.zeros(0)
    f0 = voice.f0 * (1.0 + PITCH_SPREAD * word_pitch_offset(word))
    syllables = [s for s in word.split("-") if s] or [word]
    t = np.arange(n_samples) / sample_rate
    out = np.zeros(n_samples)
    bounds = np.linspace(0, n_samples, len(syllables) + 1).astype(int)
    n_harmonics = int((sample_rate / 2 - 200.0) // f0)
    phases = voice.phases(n_harmonics)
    k = np.arange(1, n_harmonics + 1)

    for syllable, lo, hi in zip(syllables, bounds[:-1], bounds[1:]):
        if hi <= lo:
            continue
        amps = harmonic_amplitudes(f0, syllable, sample_rate)[:n_harmonics]
        # Phase is continuous across syllables since t is absolute within the word.
        out[lo:hi] = np.sin(2 * np.pi * f0 * np.outer(t[lo:hi], k) + phases) @ amps

    ramp = min(int(RAMP_SECONDS * sample_rate), n_samples // 2)
    if ramp > 0:
        shape = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        out[:ramp] *= shape
        out[n_samples - ramp:] *= shape[::-1]

    rms = np.sqrt(np.mean(out**2))
    return out * (TARGET_RMS / rms) if rms > 0 else out


def synth_speech(
    side: SideScript,
    voice_seed: int,
    duration: Optional[float] = None,
    sample_rate: int = 16000,
) -> Waveform:
    """Render a side script; samples outside word spans are exactly zero.

    Args:
        side: Words to render
        voice_seed: Voice identity
        duration: Output length in seconds; defaults to the last word end
        sample_rate: Output rate in Hz

    Returns:
        Waveform covering `duration`
    """
    total = duration if duration is not None else side.end
    n_total = int(round(total * sample_rate))
    samples = np.zeros(n_total)
    voice = Voice.from_seed(voice_seed)
    for word in side.words:
        start = int(round(word.t_start * sample_rate))
        end = min(int(round(word.t_end * sample_rate)), n_total)
        if end <= start:
            continue
        samples[start:end] += render_word(word.word, end - start, voice, sample_rate)
    peak = float(np.max(np.abs(samples))) if n_total else 0.0
    if peak > 1.0:
        logger.warning(f"Synthesized side peaks at {peak:.3f}; clipping to [-1, 1]")
        np.clip(samples, -1.0, 1.0, out=samples)
    return Waveform(samples, sample_rate)
