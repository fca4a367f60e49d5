"""av-duplex run presets.

``DevelopmentSettings`` is the smoke-scale preset: a tiny model and corpus
with text logs. ``ProductionSettings`` is the desk-scale acceptance preset
with full training steps and JSON logs; staging resolves to it as well.
``BaseSettings`` holds the shared corpus, encoder, model, training,
orchestrator and evaluation sections.
"""

from config.environments.base import BaseSettings
from config.environments.development import DevelopmentSettings
from config.environments.production import ProductionSettings

__all__ = ["BaseSettings", "DevelopmentSettings", "ProductionSettings"]
