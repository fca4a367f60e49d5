"""Model configuration and variants."""

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict

from config.environments.base import BaseSettings
from exceptions import ConfigurationError
from streams.vocab import TURN_TOKEN_IDS


class ModelVariant(str, Enum):
    """DUAL emits text + turn streams; UNIFIED emits one interleaved stream."""

    DUAL = "dual"
    UNIFIED = "unified"
    UNIFIED_NO_SOT = "unified_no_sot"

    @classmethod
    def parse(cls, value: str) -> "ModelVariant":
        try:
            return cls(value.replace("-", "_").lower())
        except ValueError:
            raise ConfigurationError(f"unknown model variant '{value}'")

    @property
    def is_unified(self) -> bool:
        return self != ModelVariant.DUAL


@dataclass(frozen=True)
class ModelConfig:
    """Shape of the multi-stream transformer.

    Attributes:
        d_model: Residual width
        n_layers: Transformer blocks
        n_heads: Attention heads
        vocab_size: Text + special tokens
        n_turn: Turn-head classes (EMP, SOT, BACKCHANNEL)
        n_codebooks: Acoustic streams per frame
        codebook_size: Codes per acoustic stream
        visual_dim: Visual feature width
        max_context: Positional table rows
        variant: DUAL, UNIFIED or UNIFIED_NO_SOT
        init_std: Gaussian init scale
    """

    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    vocab_size: int = 64
    n_turn: int = len(TURN_TOKEN_IDS)
    n_codebooks: int = 16
    codebook_size: int = 64
    visual_dim: int = 16
    max_context: int = 1500
    variant: ModelVariant = ModelVariant.DUAL
    init_std: float = 0.02

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ConfigurationError(
                "d_model must be divisible by n_heads",
                details={"d_model": self.d_model, "n_heads": self.n_heads},
            )

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def d_ff(self) -> int:
        return 4 * self.d_model

    @classmethod
    def from_settings(cls, settings: BaseSettings, vocab_size: int, variant: str = None) -> "ModelConfig":
        m = settings.model
        return cls(
            d_model=m.d_model,
            n_layers=m.n_layers,
            n_heads=m.n_heads,
            vocab_size=vocab_size,
            n_codebooks=settings.encoder.n_codebooks,
            codebook_size=settings.encoder.codebook_size,
            visual_dim=settings.encoder.visual_dim,
            max_context=m.max_context,
            variant=ModelVariant.parse(variant or m.variant),
            init_std=m.init_std,
        )

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["variant"] = self.variant.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        data = dict(data)
        data["variant"] = ModelVariant.parse(data["variant"])
        return cls(**data)
