"""Multi-stream duplex transformer: layers, training and streaming inference."""

from model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from model.config import ModelConfig, ModelVariant
from model.decode import decode_greedy, decode_sample
from model.loss import StreamTarget, weighted_ce_loss
from model.params import Parameters, init_parameters
from model.transformer import DecodeCache, DuplexTransformer, StepActivation

__all__ = [
    "Checkpoint",
    "DecodeCache",
    "DuplexTransformer",
    "ModelConfig",
    "ModelVariant",
    "Parameters",
    "StepActivation",
    "StreamTarget",
    "decode_greedy",
    "decode_sample",
    "init_parameters",
    "load_checkpoint",
    "save_checkpoint",
    "weighted_ce_loss",
]
