"""Application settings and configuration.

Environment-based configuration management plus the TOML run-config loader
used by every CLI command.
"""

import hashlib
import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Type

from pydantic import ValidationError

from config.environments.base import BaseSettings
from config.environments.development import DevelopmentSettings
from config.environments.production import ProductionSettings
from exceptions import ConfigurationError

logger = logging.getLogger(__name__)


def settings_class(environment: Optional[str] = None) -> Type[BaseSettings]:
    """Resolve the settings class for an environment name.

    - development: DevelopmentSettings (tiny model, verbose logging)
    - production: ProductionSettings (desk-scale, structured logging)
    - staging: ProductionSettings (same as production)
    """
    env = (environment or os.getenv("ENVIRONMENT", "development")).lower()
    if env in ("production", "staging"):
        return ProductionSettings
    return DevelopmentSettings


@lru_cache()
def get_settings() -> BaseSettings:
    """Get environment-specific settings.

    Settings are cached for performance.

    Returns:
        Environment-specific settings instance
    """
    cls = settings_class()
    logger.info(f"Loading {cls.__name__}")
    return cls()


def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_settings(config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> BaseSettings:
    """Load run settings from an optional TOML file plus CLI overrides.

    Args:
        config_path: TOML config file; may select its preset with a top-level
            ``environment`` key
        overrides: Nested values that take precedence over the file

    Returns:
        Validated settings

    Raises:
        ConfigurationError: If the file is unreadable or any value is invalid
    """
    data: Dict[str, Any] = {}
    if config_path is not None:
        try:
            with open(config_path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {config_path}")
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"config file {config_path} is not valid TOML: {e}")

    if overrides:
        data = _deep_merge(data, overrides)

    cls = settings_class(data.get("environment"))
    try:
        resolved = cls(**data) if data else get_settings()
    except ValidationError as e:
        raise ConfigurationError(
            "invalid configuration",
            details={"errors": json.loads(e.json(include_url=False))},
        )
    logger.debug(f"Resolved {cls.__name__} from {config_path or 'defaults'} (hash {config_hash(resolved)[:12]})")
    return resolved


def resolved_config(settings: BaseSettings) -> Dict[str, Any]:
    """Canonical JSON-compatible dump of the resolved settings."""
    return settings.model_dump(mode="json")


def config_hash(settings: BaseSettings) -> str:
    """SHA-256 over the canonical dump; stamped on every emitted artifact."""
    payload = json.dumps(resolved_config(settings), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


__all__ = ["get_settings", "load_settings", "config_hash", "resolved_config", "settings_class", "BaseSettings"]
