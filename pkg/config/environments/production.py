"""Production environment configuration."""

from config.environments.base import BaseSettings, Stage1Settings, Stage2Settings


class ProductionSettings(BaseSettings):
    """Desk-scale acceptance configuration.

    Full default model, longer training and structured JSON logs.
    """

    environment: str = "production"

    # Logging - Structured JSON logs for parsing
    log_level: str = "INFO"
    log_format: str = "json"

    stage1: Stage1Settings = Stage1Settings(steps=6000)
    stage2: Stage2Settings = Stage2Settings(steps=6000)
