"""Toy front-end: acoustic/semantic tokenizer and visual encoder."""

from encoders.types import AcousticTokenGrid, EncoderConfig, EncoderMode, GridKind, VisualFeatureGrid

__all__ = ["AcousticTokenGrid", "EncoderConfig", "EncoderMode", "GridKind", "VisualFeatureGrid"]
