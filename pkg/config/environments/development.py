"""Development environment configuration."""

from config.environments.base import (
    BaseSettings,
    CorpusSettings,
    EvalSettings,
    ModelSettings,
    Stage1Settings,
    Stage2Settings,
)


class DevelopmentSettings(BaseSettings):
    """Development-specific configuration.

    Smoke-scale model and corpus for fast local iteration, verbose text logs.
    """

    environment: str = "development"

    # Logging - Verbose for debugging
    log_level: str = "DEBUG"
    log_format: str = "text"

    # Tiny model and short runs
    model: ModelSettings = ModelSettings(d_model=32, n_layers=2, n_heads=2)
    corpus: CorpusSettings = CorpusSettings(n_conversations=24, n_turns=4, n_interferer_conversations=4)
    stage1: Stage1Settings = Stage1Settings(steps=50, max_frames=160)
    stage2: Stage2Settings = Stage2Settings(steps=50, window_frames=256)
    eval: EvalSettings = EvalSettings(samples_per_bin=2, n_eval_conversations=4)
