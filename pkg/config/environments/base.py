"""Base configuration shared across all environments.

Every constant the engine relies on lives here, grouped by the module that
consumes it. Defaults reproduce the reference constants: 20/40/40 mixing,
[-8, 8] dB training SNR, [-8, 12] dB evaluation SNR, a 1 s recognition delay,
loss weights 1.0/0.1/2.5/1.0 and a [-2, 3] s response window.
"""

from pathlib import Path
from typing import Dict, Literal, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings as PydanticBaseSettings
from pydantic_settings import SettingsConfigDict


def _check_distribution(values: Dict[str, float], name: str) -> Dict[str, float]:
    if any(v < 0 for v in values.values()):
        raise ValueError(f"{name} has negative probabilities: {values}")
    total = sum(values.values())
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"{name} must sum to 1.0, got {total}")
    return values


class GridSettings(BaseModel):
    """Global frame clock."""

    frame_duration: float = 0.040
    fps: int = 25
    recognition_delay: int = Field(default=25, ge=0, description="Delay d of the text stream, in frames")

    @model_validator(mode="after")
    def _unit_clock(self) -> "GridSettings":
        if abs(self.fps * self.frame_duration - 1.0) > 1e-12:
            raise ValueError("fps * frame_duration must equal 1")
        return self


class LexiconSettings(BaseModel):
    """Closed synthetic vocabulary."""

    n_words: int = Field(default=48, ge=1)
    max_syllables: int = Field(default=3, ge=1, le=4)
    n_caption_words: int = Field(default=6, ge=6, le=10)
    seed: int = 7


class CorpusSettings(BaseModel):
    """Synthetic conversation world."""

    n_conversations: int = Field(default=200, ge=0)
    n_turns: int = Field(default=6, ge=0)
    words_per_turn: Tuple[int, int] = (2, 5)
    backchannel_rate: float = Field(default=0.3, ge=0.0, le=1.0)
    overlap_rate: float = Field(default=0.1, ge=0.0, lt=0.5)
    fto_distribution: Literal["lognormal", "constant"] = "lognormal"
    fto_median: float = Field(default=1.5, gt=0.0)
    fto_sigma: float = Field(default=0.45, gt=0.0)
    sample_rate: int = 16000
    n_interferer_conversations: int = Field(default=16, ge=1)
    held_out_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)


class AugmentSettings(BaseModel):
    """Cocktail-party mixing."""

    p_clean: float = 0.20
    p_background: float = 0.40
    p_interference: float = 0.40
    train_snr_range: Tuple[float, float] = (-8.0, 8.0)
    eval_snr_range: Tuple[float, float] = (-8.0, 12.0)
    max_interferers: int = Field(default=4, ge=1)
    noise_bank_size: int = Field(default=12, ge=1)
    babble_voices: int = Field(default=8, ge=8)

    @model_validator(mode="after")
    def _probabilities(self) -> "AugmentSettings":
        _check_distribution(
            {"clean": self.p_clean, "background": self.p_background, "interference": self.p_interference},
            "augmentation probabilities",
        )
        return self


class EncoderSettings(BaseModel):
    """Toy acoustic tokenizer and visual encoder."""

    mode: Literal["acoustic", "semantic"] = "acoustic"
    n_codebooks: int = 16
    codebook_size: int = Field(default=64, ge=4)
    n_filterbank: int = 32
    visual_dim: int = Field(default=16, ge=3)
    lookahead: int = Field(default=2, ge=0)
    projection_seed: int = 1234
    visual_jitter: float = 0.01

    @field_validator("n_codebooks")
    @classmethod
    def _sixteen_streams(cls, v: int) -> int:
        if v != 16:
            raise ValueError("the acoustic grid always carries 16 codebook streams")
        return v


class ModelSettings(BaseModel):
    """Causal multi-stream transformer."""

    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    max_context: int = 1500
    variant: Literal["dual", "unified", "unified_no_sot"] = "dual"
    init_std: float = 0.02

    @model_validator(mode="after")
    def _heads_divide(self) -> "ModelSettings":
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        return self


class LossWeightSettings(BaseModel):
    """Per-token loss weights."""

    text: float = 1.0
    emp: float = 0.1
    sot: float = 2.5
    backchannel: float = 1.0


class OptimSettings(BaseModel):
    """Decoupled-weight-decay Adam with two parameter groups."""

    lr: float = 3e-4
    embed_lr_multiplier: float = 5.0
    warmup_steps: int = 100
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 1.0


class Stage1Settings(BaseModel):
    """Multi-task alignment stage."""

    steps: int = Field(default=2000, ge=0)
    batch_size: int = Field(default=4, ge=1)
    mixture: Dict[str, float] = {"text": 0.48, "asr": 0.32, "caption": 0.04, "avsr": 0.16}
    max_frames: int = 256
    optim: OptimSettings = OptimSettings()

    @field_validator("mixture")
    @classmethod
    def _mixture(cls, v: Dict[str, float]) -> Dict[str, float]:
        return _check_distribution(v, "stage-1 mixture")


class Stage2Settings(BaseModel):
    """Conversation stage."""

    steps: int = Field(default=2000, ge=0)
    batch_size: int = Field(default=2, ge=1)
    mixture: Dict[str, float] = {"audio_only": 0.55, "audio_visual": 0.45}
    window_frames: int = 512
    optim: OptimSettings = OptimSettings(warmup_steps=50)

    @field_validator("mixture")
    @classmethod
    def _mixture(cls, v: Dict[str, float]) -> Dict[str, float]:
        return _check_distribution(v, "stage-2 mixture")


class OrchestratorSettings(BaseModel):
    """Duplex session runtime."""

    debounce_frames: int = Field(default=1, ge=1)
    max_response_tokens: int = Field(default=24, ge=1)
    backchannel_ack: str = "mhm"
    temperature: float = Field(default=0.0, ge=0.0)
    backbone: Literal["echo", "scripted", "tinylm", "icl", "instruction_tuned"] = "scripted"


class EvalSettings(BaseModel):
    """Evaluation harness."""

    response_window: Tuple[float, float] = (-2.0, 3.0)
    pairing_lookback: float = 2.0
    sweep_step_db: float = 4.0
    samples_per_bin: int = Field(default=8, ge=1)
    n_eval_conversations: int = Field(default=20, ge=1)
    wer_unit: Literal["word", "token"] = "word"
    histogram_bin: float = 0.5
    histogram_max: float = 10.0
    workers: int = Field(default=1, ge=1)


class BaseSettings(PydanticBaseSettings):
    """Base configuration for all environments.

    Attributes shared across development and production presets.
    """

    # Application
    app_name: str = "av-duplex"
    app_version: str = "1.0.0"
    environment: str = "development"
    seed: int = 0

    # Output root (AVDUPLEX_OUTPUT_ROOT)
    output_root: Path = Path("runs")

    # Logging
    log_level: str = "INFO"
    log_format: Literal["json", "text"] = "json"

    grid: GridSettings = GridSettings()
    lexicon: LexiconSettings = LexiconSettings()
    corpus: CorpusSettings = CorpusSettings()
    augment: AugmentSettings = AugmentSettings()
    encoder: EncoderSettings = EncoderSettings()
    model: ModelSettings = ModelSettings()
    loss_weights: LossWeightSettings = LossWeightSettings()
    stage1: Stage1Settings = Stage1Settings()
    stage2: Stage2Settings = Stage2Settings()
    orchestrator: OrchestratorSettings = OrchestratorSettings()
    eval: EvalSettings = EvalSettings()

    model_config = SettingsConfigDict(
        env_prefix="AVDUPLEX_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        protected_namespaces=(),
    )
