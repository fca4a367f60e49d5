"""Toy 16-codebook acoustic tokenizer standing in for a neural codec.

Every 40 ms frame becomes a 32-band log filterbank vector. ACOUSTIC mode
projects it onto 16 seeded random directions and scalar-quantizes each
projection; SEMANTIC mode keeps only speech activity and the syllable's
formant class, so every voice produces the same codes. Silent frames map to
code 0 in every codebook. Frames are tokenized independently, which keeps
the tokenizer causal.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from corpus.lexicon import CONSONANTS, N_REGIONS, VOWELS
from corpus.synth import Voice, Waveform, render_word
from encoders.types import AcousticTokenGrid, EncoderConfig, EncoderMode

logger = logging.getLogger(__name__)

SILENCE_ID = 0
ACTIVITY_RMS = 1e-4
LOG_FLOOR = 1e-10
CALIBRATION_WORDS = 96


def frame_samples(waveform: Waveform, samples_per_frame: int) -> np.ndarray:
    """(frames, samples_per_frame) view, zero-padding the last partial frame."""
    n = len(waveform)
    frames = -(-n // samples_per_frame)
    padded = np.zeros(frames * samples_per_frame)
    padded[:n] = waveform.samples
    return padded.reshape(frames, samples_per_frame)


def power_spectrum(frames: np.ndarray) -> np.ndarray:
    window = np.hanning(frames.shape[1]) if frames.shape[1] > 1 else np.ones(frames.shape[1])
    return np.abs(np.fft.rfft(frames * window, axis=1)) ** 2


def band_energies(spectrum: np.ndarray, n_bands: int) -> np.ndarray:
    """Sum of spectral power in `n_bands` equal-width linear bands."""
    edges = np.linspace(0, spectrum.shape[1], n_bands + 1).astype(int)
    return np.add.reduceat(spectrum, edges[:-1], axis=1) if spectrum.shape[0] else np.zeros((0, n_bands))


def log_filterbank(frames: np.ndarray, n_bands: int) -> np.ndarray:
    return np.log(band_energies(power_spectrum(frames), n_bands) + LOG_FLOOR)


def formant_classes(frames: np.ndarray) -> np.ndarray:
    """Formant class 0..15 per frame: strongest low-half region x strongest high-half region."""
    regions = band_energies(power_spectrum(frames), N_REGIONS)
    half = N_REGIONS // 2
    low = np.argmax(regions[:, :half], axis=1)
    high = np.argmax(regions[:, half:], axis=1)
    return low * half + high


def activity(frames: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean(frames**2, axis=1)) > ACTIVITY_RMS


def _calibration_audio(seed: int, sample_rate: int) -> Waveform:
    """Random syllable words in random voices; fixed by the projection seed."""
    rng = np.random.default_rng([seed, 0xCA1])
    chunks: List[np.ndarray] = []
    for _ in range(CALIBRATION_WORDS):
        n_syl = int(rng.integers(1, 4))
        word = "-".join(CONSONANTS[rng.integers(len(CONSONANTS))] + VOWELS[rng.integers(len(VOWELS))] for _ in range(n_syl))
        voice = Voice.from_seed(int(rng.integers(0, 10_000)))
        chunks.append(render_word(word, int(rng.uniform(0.2, 0.5) * sample_rate), voice, sample_rate))
        chunks.append(np.zeros(int(0.05 * sample_rate)))
    return Waveform(np.concatenate(chunks), sample_rate)


class AcousticTokenizer:
    """Deterministic tokenizer; the projection seed fixes projections, calibration and code tables.

    Args:
        config: Encoder configuration
        sample_rate: Input sample rate
        fps: Frame rate of the output grid
    """

    def __init__(self, config: EncoderConfig, sample_rate: int = 16000, fps: int = 25):
        self.config = config
        self.sample_rate = sample_rate
        self.fps = fps
        self.samples_per_frame = sample_rate // fps
        rng = np.random.default_rng(config.projection_seed)
        self.projections = rng.standard_normal((config.n_codebooks, config.n_filterbank)) / np.sqrt(config.n_filterbank)
        # SEMANTIC code table: formant class -> non-silence code per codebook.
        n_classes = (N_REGIONS // 2) ** 2
        self.class_codes = rng.integers(1, config.codebook_size, size=(config.n_codebooks, n_classes))
        self.lo, self.hi = self._calibrate()

    def _calibrate(self) -> Tuple[np.ndarray, np.ndarray]:
        frames = frame_samples(_calibration_audio(self.config.projection_seed, self.sample_rate), self.samples_per_frame)
        active = frames[activity(frames)]
        proj = log_filterbank(active, self.config.n_filterbank) @ self.projections.T
        lo = np.percentile(proj, 1, axis=0)
        hi = np.percentile(proj, 99, axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        logger.debug(f"Calibrated acoustic quantizer on {len(active)} active frames")
        return lo, hi

    def quantize(self, projections: np.ndarray) -> np.ndarray:
        """Map projections to codes 1..K-1 with uniform bins over [lo, hi]."""
        k = self.config.codebook_size
        scaled = (projections - self.lo) / (self.hi - self.lo)
        return 1 + np.clip(np.floor(scaled * (k - 1)), 0, k - 2).astype(np.int64)

    def tokenize(self, waveform: Waveform) -> AcousticTokenGrid:
        """Tokenize a waveform into a (frames, 16) grid."""
        frames = frame_samples(waveform, self.samples_per_frame)
        tokens = np.full((len(frames), self.config.n_codebooks), SILENCE_ID, dtype=np.int64)
        if len(frames) == 0:
            return AcousticTokenGrid(tokens, self.config.codebook_size, self.fps)
        active = activity(frames)
        if active.any():
            speech = frames[active]
            if self.config.mode == EncoderMode.ACOUSTIC:
                codes = self.quantize(log_filterbank(speech, self.config.n_filterbank) @ self.projections.T)
            else:
                classes = formant_classes(speech)
                codes = self.class_codes[:, classes].T
            tokens[active] = codes
        return AcousticTokenGrid(tokens, self.config.codebook_size, self.fps)


def acoustic_tokenize(waveform: Waveform, config: EncoderConfig, tokenizer: Optional[AcousticTokenizer] = None) -> AcousticTokenGrid:
    """Functional entry point; pass a prebuilt `tokenizer` to skip calibration."""
    tokenizer = tokenizer or AcousticTokenizer(config, waveform.sample_rate)
    return tokenizer.tokenize(waveform)
