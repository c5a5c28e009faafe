"""Binary `.idac` parameter container.

Format (little-endian): magic "IDAC", u32 version=1, u32 tensor_count, then
per tensor: u16 name length, UTF-8 name, u8 rank, rank x u32 dims,
prod(dims) float32 values. Tensors are written in sorted-name order so a
rewrite of the same parameters is byte-identical.

The hyperparameters travel as a rank-1 tensor named "meta":
[text_dim, model_dim, layers, heads, ffn_mult, max_positions, vocab_size,
 dropout, activation_code, mode_code].
"""

from __future__ import annotations

import struct

import numpy as np

from . import tensor as T
from .errors import CheckpointError, FormatError
from .model import ACTIVATIONS, MODES, ModelConfig, SeqRecModel, init_params

MAGIC = b"IDAC"
VERSION = 1
META_NAME = "meta"


def _meta_vector(config: ModelConfig) -> np.ndarray:
    return np.array([
        config.text_dim, config.model_dim, config.layers, config.heads,
        config.ffn_mult, config.max_positions, config.vocab_size,
        config.dropout, ACTIVATIONS.index(config.activation),
        MODES.index(config.mode),
    ], dtype=np.float32)


def _config_from_meta(vec: np.ndarray) -> ModelConfig:
    if vec.shape != (10,):
        raise CheckpointError(f"meta tensor must have 10 entries, got {vec.shape}")
    ints = [int(round(float(x))) for x in vec[:7]]
    return ModelConfig(
        text_dim=ints[0], model_dim=ints[1], layers=ints[2], heads=ints[3],
        ffn_mult=ints[4], max_positions=ints[5], vocab_size=ints[6],
        dropout=float(vec[7]),
        activation=ACTIVATIONS[int(round(float(vec[8])))],
        mode=MODES[int(round(float(vec[9])))],
    )


def save_checkpoint(path, config: ModelConfig, params: dict) -> None:
    tensors = {name: p.data for name, p in params.items()}
    tensors[META_NAME] = _meta_vector(config)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", MAGIC, VERSION, len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
            raw = name.encode("utf-8")
            fh.write(struct.pack("<HB", len(raw), arr.ndim))
            fh.write(raw)
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f4", copy=False).tobytes())


def read_tensors(path) -> dict:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12:
        raise FormatError(f"truncated header: {len(blob)} bytes", offset=len(blob))
    magic, version, count = struct.unpack_from("<4sII", blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at offset 4", offset=4)
    offset = 12
    out = {}
    for _ in range(count):
        if offset + 3 > len(blob):
            raise FormatError(f"truncated tensor record at offset {offset}", offset=offset)
        nlen, rank = struct.unpack_from("<HB", blob, offset)
        offset += 3
        if offset + nlen + 4 * rank > len(blob):
            raise FormatError(f"truncated tensor header at offset {offset}", offset=offset)
        name = blob[offset:offset + nlen].decode("utf-8")
        offset += nlen
        dims = struct.unpack_from(f"<{rank}I", blob, offset)
        offset += 4 * rank
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        if offset + 4 * size > len(blob):
            raise FormatError(f"truncated tensor data at offset {offset}", offset=offset)
        out[name] = np.frombuffer(blob, dtype="<f4", count=size, offset=offset).reshape(dims).copy()
        offset += 4 * size
    if offset != len(blob):
        raise FormatError(f"{len(blob) - offset} trailing bytes at offset {offset}", offset=offset)
    return out


def load_checkpoint(path, text_matrix=None, expect_config: ModelConfig | None = None) -> SeqRecModel:
    """Rebuild a model; shapes are validated against the restored config."""
    tensors = read_tensors(path)
    if META_NAME not in tensors:
        raise CheckpointError("checkpoint has no meta tensor")
    config = _config_from_meta(tensors.pop(META_NAME))
    if expect_config is not None and config != expect_config:
        raise CheckpointError(f"checkpoint config {config} != expected {expect_config}")
    reference = init_params(config, np.random.default_rng(0))
    if set(reference) != set(tensors):
        missing = sorted(set(reference) - set(tensors))
        extra = sorted(set(tensors) - set(reference))
        raise CheckpointError(f"parameter names mismatch: missing {missing}, extra {extra}")
    params = {}
    for name, ref in reference.items():
        arr = tensors[name]
        if arr.shape != ref.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name}: {arr.shape} != {ref.data.shape}")
        params[name] = T.Tensor(arr, requires_grad=True)
    return SeqRecModel(config, text_matrix=text_matrix, params=params)
