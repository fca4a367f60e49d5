"""Logging setup shared by the CLI and tests."""

import logging
import sys

from pythonjsonlogger.json import JsonFormatter

from config.environments.base import BaseSettings

TEXT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(settings: BaseSettings, verbose: bool = False) -> None:
    """Install a single stderr handler on the root logger.

    Args:
        settings: Resolved settings (log_level, log_format)
        verbose: Force DEBUG regardless of settings
    """
    handler = logging.StreamHandler(sys.stderr)
    if settings.log_format == "json":
        handler.setFormatter(JsonFormatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    else:
        handler.setFormatter(logging.Formatter(TEXT_FORMAT))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel("DEBUG" if verbose else settings.log_level.upper())
