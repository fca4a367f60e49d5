"""SNR-controlled cocktail-party mixing.

Background noise comes from a procedural noise bank (colored noise and
off-vocabulary babble); interference comes from other synthesized speakers.
SNR is measured over the full clip against the summed interference.
"""

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.environments.base import AugmentSettings
from corpus.lexicon import babble_words
from corpus.synth import Voice, Waveform, render_word
from exceptions import CorpusError, DataError

logger = logging.getLogger(__name__)

NOISE_KINDS = ("white", "pink", "brown", "babble")
# Spectral slope exponent per colored-noise kind: power ~ 1 / f**alpha.
NOISE_SLOPES = {"white": 0.0, "pink": 1.0, "brown": 2.0}
NOISE_CAPTIONS = {
    "white": ("steady", "hiss"),
    "pink": ("steady", "hum"),
    "brown": ("rumble",),
    "babble": ("crowd", "chatter"),
}
BABBLE_VOICE_BASE = 900_000


class MixCondition(str, Enum):
    CLEAN = "clean"
    BG = "bg"
    INTERF = "interf"


@dataclass(frozen=True)
class MixSpec:
    """How a target waveform was (or will be) corrupted.

    Attributes:
        condition: CLEAN, BG or INTERF
        snr_db: Target-to-interference ratio; None for CLEAN
        n_interferers: Number of interfering speakers (INTERF only)
        noise_id: Noise-bank clip (BG only)
        interferer_ids: Interferer-pool entries (INTERF only)
        offset_fraction: Where in the interference clip the crop starts
    """

    condition: MixCondition
    snr_db: Optional[float] = None
    n_interferers: int = 0
    noise_id: Optional[int] = None
    interferer_ids: Tuple[int, ...] = ()
    offset_fraction: float = 0.0

    def __post_init__(self):
        if self.condition == MixCondition.CLEAN:
            if self.snr_db is not None:
                raise DataError("CLEAN mix spec cannot carry an SNR")
        elif self.snr_db is None:
            raise DataError(f"{self.condition.value} mix spec needs an SNR")
        if self.condition == MixCondition.INTERF:
            if not 1 <= self.n_interferers <= 4 or len(self.interferer_ids) != self.n_interferers:
                raise DataError(
                    "INTERF mix spec needs 1-4 interferers",
                    details={"n_interferers": self.n_interferers, "interferer_ids": list(self.interferer_ids)},
                )
        if self.condition == MixCondition.BG and self.noise_id is None:
            raise DataError("BG mix spec needs a noise_id")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["condition"] = self.condition.value
        data["interferer_ids"] = list(self.interferer_ids)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MixSpec":
        return cls(
            condition=MixCondition(data["condition"]),
            snr_db=data.get("snr_db"),
            n_interferers=int(data.get("n_interferers", 0)),
            noise_id=data.get("noise_id"),
            interferer_ids=tuple(data.get("interferer_ids", ())),
            offset_fraction=float(data.get("offset_fraction", 0.0)),
        )


def power(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=np.float64)
    return float(np.mean(samples**2)) if len(samples) else 0.0


def measure_snr(target: Waveform, residual: Waveform) -> float:
    """10*log10(P_target / P_residual) over the overlapping samples.

    Returns +inf when the residual is silent and -inf when the target is.
    """
    n = min(len(target), len(residual))
    p_target = power(target.samples[:n])
    p_residual = power(residual.samples[:n])
    if p_target == 0.0:
        return -math.inf
    if p_residual == 0.0:
        return math.inf
    return 10.0 * math.log10(p_target / p_residual)


def snr_gain(target: Waveform, interference: Waveform, snr_db: float) -> float:
    """Gain g that puts ``g * interference`` at `snr_db` below the target."""
    n = min(len(target), len(interference))
    p_interference = power(interference.samples[:n])
    if p_interference == 0.0:
        raise DataError("interference has zero power; cannot mix at a finite SNR")
    return math.sqrt(power(target.samples[:n]) / (p_interference * 10.0 ** (snr_db / 10.0)))


def mix_at_snr(target: Waveform, interference: Waveform, snr_db: float) -> Waveform:
    """target + g * interference, with the interference cut or padded to the target.

    Raises:
        DataError: If sample rates differ or the interference is silent
    """
    if target.sample_rate != interference.sample_rate:
        raise DataError(
            "cannot mix waveforms with different sample rates",
            details={"target": target.sample_rate, "interference": interference.sample_rate},
        )
    interference = interference.fit(len(target))
    g = snr_gain(target, interference, snr_db)
    mixed = target.samples + g * interference.samples
    peak = float(np.max(np.abs(mixed))) if len(mixed) else 0.0
    if peak > 1.0:
        logger.warning(f"Mixture at {snr_db:.2f} dB peaks at {peak:.3f}; clipping to [-1, 1]")
        mixed = np.clip(mixed, -1.0, 1.0)
    return Waveform(mixed, target.sample_rate)


def crop(samples: np.ndarray, n_samples: int, offset_fraction: float) -> np.ndarray:
    """Cyclic crop of `n_samples` starting at ``offset_fraction * len(samples)``."""
    if n_samples == 0:
        return np.zeros(0)
    if len(samples) == 0:
        return np.zeros(n_samples)
    start = int(offset_fraction * len(samples)) % len(samples)
    reps = (start + n_samples) // len(samples) + 1
    return np.tile(samples, reps)[start:start + n_samples]


def colored_noise(rng: np.random.Generator, n_samples: int, alpha: float) -> np.ndarray:
    """Gaussian noise shaped to a 1/f**alpha power spectrum, RMS 0.1."""
    white = rng.standard_normal(n_samples)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n_samples)
    freqs[0] = freqs[1] if len(freqs) > 1 else 1.0
    shaped = np.fft.irfft(spectrum / freqs ** (alpha / 2.0), n=n_samples)
    rms = np.sqrt(np.mean(shaped**2))
    return shaped * (0.1 / rms) if rms > 0 else shaped


def babble(seed: int, n_samples: int, n_voices: int, sample_rate: int) -> np.ndarray:
    """Sum of `n_voices` speakers saying off-vocabulary words back to back."""
    rng = np.random.default_rng(seed)
    inventory = babble_words(seed, 32)
    out = np.zeros(n_samples)
    for v in range(n_voices):
        voice = Voice.from_seed(BABBLE_VOICE_BASE + seed % 1000 * 16 + v)
        pos = int(rng.integers(0, sample_rate // 4))
        while pos < n_samples:
            word = inventory[int(rng.integers(len(inventory)))]
            length = int(rng.uniform(0.15, 0.4) * sample_rate)
            end = min(pos + length, n_samples)
            out[pos:end] += render_word(word, end - pos, voice, sample_rate)
            pos = end + int(rng.uniform(0.02, 0.1) * sample_rate)
    rms = np.sqrt(np.mean(out**2)) if n_samples else 0.0
    return out * (0.1 / rms) if rms > 0 else out


@dataclass(frozen=True)
class NoiseClip:
    noise_id: int
    kind: str
    samples: np.ndarray

    @property
    def caption(self) -> Tuple[str, ...]:
        return NOISE_CAPTIONS[self.kind]


class NoiseBank:
    """Immutable set of procedural background-noise clips."""

    def __init__(self, size: int, seed: int, babble_voices: int = 8, clip_seconds: float = 8.0, sample_rate: int = 16000):
        if babble_voices < 8:
            raise CorpusError("babble needs at least 8 voices")
        self.sample_rate = sample_rate
        n = int(clip_seconds * sample_rate)
        clips: List[NoiseClip] = []
        for noise_id in range(size):
            kind = NOISE_KINDS[noise_id % len(NOISE_KINDS)]
            clip_seed = seed * 1000 + noise_id
            if kind == "babble":
                samples = babble(clip_seed, n, babble_voices, sample_rate)
            else:
                samples = colored_noise(np.random.default_rng(clip_seed), n, NOISE_SLOPES[kind])
            clips.append(NoiseClip(noise_id, kind, samples))
        self._clips = tuple(clips)
        logger.debug(f"Built noise bank with {size} clips of {clip_seconds}s")

    def __len__(self) -> int:
        return len(self._clips)

    def clip(self, noise_id: int) -> NoiseClip:
        if not 0 <= noise_id < len(self._clips):
            raise DataError(f"noise id {noise_id} not in bank of {len(self._clips)}")
        return self._clips[noise_id]

    def render(self, noise_id: int, n_samples: int, offset_fraction: float = 0.0) -> Waveform:
        return Waveform(crop(self.clip(noise_id).samples, n_samples, offset_fraction), self.sample_rate)


def draw_spec(
    rng: np.random.Generator,
    condition: MixCondition,
    snr_range: Tuple[float, float],
    n_noises: int,
    n_pool: int,
    max_interferers: int = 4,
    snr_db: Optional[float] = None,
) -> MixSpec:
    """Draw the free parameters of a spec for a fixed condition."""
    if condition == MixCondition.CLEAN:
        return MixSpec(MixCondition.CLEAN)
    snr = float(rng.uniform(*snr_range)) if snr_db is None else float(snr_db)
    offset = float(rng.random())
    if condition == MixCondition.BG:
        return MixSpec(MixCondition.BG, snr_db=snr, noise_id=int(rng.integers(n_noises)), offset_fraction=offset)
    upper = min(max_interferers, 4, n_pool)
    if upper < 1:
        raise CorpusError("interferer pool is empty")
    n = int(rng.integers(1, upper + 1))
    ids = tuple(int(i) for i in rng.choice(n_pool, size=n, replace=False))
    return MixSpec(MixCondition.INTERF, snr_db=snr, n_interferers=n, interferer_ids=ids, offset_fraction=offset)


def gen_eval_condition(
    kind: MixCondition,
    rng: np.random.Generator,
    snr_range: Tuple[float, float] = (-8.0, 12.0),
    snr_db: Optional[float] = None,
    n_noises: int = 12,
    n_pool: int = 16,
    max_interferers: int = 4,
) -> MixSpec:
    """Evaluation spec with a forced condition, optionally at a fixed SNR."""
    return draw_spec(rng, MixCondition(kind), snr_range, n_noises, n_pool, max_interferers, snr_db=snr_db)


class Augmenter:
    """Draws and applies training/evaluation corruptions.

    Args:
        settings: Condition probabilities, SNR ranges, interferer cap
        noise_bank: Background clips
        interferers: Waveforms of speakers from other conversations
    """

    def __init__(self, settings: AugmentSettings, noise_bank: NoiseBank, interferers: Sequence[Waveform]):
        self.settings = settings
        self.noise_bank = noise_bank
        self.interferers = list(interferers)
        self._conditions = [MixCondition.CLEAN, MixCondition.BG, MixCondition.INTERF]
        self._probs = [settings.p_clean, settings.p_background, settings.p_interference]

    def draw_condition(self, rng: np.random.Generator) -> MixCondition:
        return self._conditions[int(rng.choice(3, p=self._probs))]

    def draw_spec(self, rng: np.random.Generator, condition: Optional[MixCondition] = None) -> MixSpec:
        condition = condition or self.draw_condition(rng)
        return draw_spec(
            rng, condition, self.settings.train_snr_range, len(self.noise_bank),
            len(self.interferers), self.settings.max_interferers,
        )

    def eval_spec(self, rng: np.random.Generator, kind: MixCondition, snr_db: Optional[float] = None) -> MixSpec:
        return gen_eval_condition(
            kind, rng, self.settings.eval_snr_range, snr_db, len(self.noise_bank),
            len(self.interferers), self.settings.max_interferers,
        )

    def interference(self, spec: MixSpec, n_samples: int) -> Waveform:
        """Summed interference for `spec`, cropped to `n_samples`."""
        if spec.condition == MixCondition.BG:
            return self.noise_bank.render(spec.noise_id, n_samples, spec.offset_fraction)
        total = np.zeros(n_samples)
        for i in spec.interferer_ids:
            if not 0 <= i < len(self.interferers):
                raise DataError(f"interferer id {i} not in pool of {len(self.interferers)}")
            total += crop(self.interferers[i].samples, n_samples, spec.offset_fraction)
        return Waveform(total, self.noise_bank.sample_rate)

    def render(self, target: Waveform, spec: MixSpec) -> Waveform:
        if spec.condition == MixCondition.CLEAN:
            return Waveform(target.samples.copy(), target.sample_rate)
        return mix_at_snr(target, self.interference(spec, len(target)), spec.snr_db)

    def augment(self, target: Waveform, rng: np.random.Generator) -> Tuple[Waveform, MixSpec]:
        """Draw a training corruption and apply it.

        A crop that lands on silent interference falls back to CLEAN, and the
        returned spec says so.
        """
        spec = self.resolve(self.draw_spec(rng), len(target))
        return self.render(target, spec), spec

    def resolve(self, spec: MixSpec, n_samples: int) -> MixSpec:
        """`spec`, or CLEAN when its interference crop is silent."""
        if spec.condition != MixCondition.CLEAN and power(self.interference(spec, n_samples).samples) == 0.0:
            logger.debug(f"Interference crop for {spec.condition.value} is silent; using clean audio")
            return MixSpec(MixCondition.CLEAN)
        return spec
