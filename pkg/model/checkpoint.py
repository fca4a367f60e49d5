"""Versioned binary checkpoints.

Layout: 8 magic bytes, a little-endian uint32 header length, a UTF-8 JSON
header ``{version, config, vocab_hash, step, config_hash, tensors}``, then
every tensor in header order as row-major little-endian float32.
"""

import json
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from exceptions import CheckpointError
from model.config import ModelConfig
from model.params import Parameters

logger = logging.getLogger(__name__)

MAGIC = b"AVDXCKPT"
VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: Parameters
    vocab_hash: str
    step: int = 0
    config_hash: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    tensors = [{"name": name, "shape": list(value.shape)} for name, value in checkpoint.params.items()]
    header = {
        "version": VERSION,
        "config": checkpoint.config.to_dict(),
        "vocab_hash": checkpoint.vocab_hash,
        "step": checkpoint.step,
        "config_hash": checkpoint.config_hash,
        "extra": checkpoint.extra,
        "tensors": tensors,
    }
    raw_header = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(raw_header).to_bytes(4, "little"))
        fh.write(raw_header)
        for _, value in checkpoint.params.items():
            fh.write(np.ascontiguousarray(value, dtype="<f4").tobytes())
    logger.info(f"Saved checkpoint {path} (step {checkpoint.step}, {checkpoint.params.n_params()} params)")


def load_checkpoint(path: Path, vocab_hash: Optional[str] = None) -> Checkpoint:
    """Read a checkpoint, optionally checking it was trained on the given vocabulary.

    Raises:
        CheckpointError: On a bad magic, version, truncated body or vocabulary mismatch
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}")
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file")
    offset = len(MAGIC)
    header_len = int.from_bytes(raw[offset:offset + 4], "little")
    offset += 4
    try:
        header = json.loads(raw[offset:offset + header_len])
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path} has a malformed header: {e}")
    offset += header_len
    if header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')}", details={"path": str(path)})
    if vocab_hash is not None and header["vocab_hash"] != vocab_hash:
        raise CheckpointError(
            "checkpoint was trained on a different vocabulary",
            details={"checkpoint": header["vocab_hash"], "corpus": vocab_hash},
        )

    values: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for tensor in header["tensors"]:
        shape = tuple(tensor["shape"])
        n_bytes = int(np.prod(shape, dtype=np.int64)) * 4
        chunk = raw[offset:offset + n_bytes]
        if len(chunk) != n_bytes:
            raise CheckpointError(f"{path} is truncated at tensor {tensor['name']}")
        values[tensor["name"]] = np.frombuffer(chunk, dtype="<f4").astype(np.float64).reshape(shape)
        offset += n_bytes
    if offset != len(raw):
        raise CheckpointError(f"{path} has {len(raw) - offset} trailing bytes")

    return Checkpoint(
        config=ModelConfig.from_dict(header["config"]),
        params=Parameters(values),
        vocab_hash=header["vocab_hash"],
        step=int(header["step"]),
        config_hash=header.get("config_hash", ""),
        extra=header.get("extra", {}),
    )
