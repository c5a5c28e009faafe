"""Binary `.emb` item-embedding matrices and deterministic pseudo-embeddings.

Format (little-endian): magic "IDAE", u32 version=1, u32 item_count, u32 dim,
item_count x (u16 token byte length, UTF-8 token bytes), then
item_count*dim float32 values row-major in token-record order.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import Vocab
from .errors import CoverageError, FormatError

MAGIC = b"IDAE"
VERSION = 1


@dataclass
class ItemEmbeddingMatrix:
    """Frozen text-derived row per item; never receives gradients."""

    tokens: tuple
    rows: np.ndarray  # (n, dim) float32

    def __post_init__(self):
        self.tokens = tuple(self.tokens)
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if self.rows.ndim != 2 or self.rows.shape[0] != len(self.tokens):
            raise ValueError("row count must equal token count")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("tokens must be unique")

    @property
    def dim(self):
        return self.rows.shape[1]

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update("\x00".join(self.tokens).encode("utf-8"))
        h.update(self.rows.tobytes())
        return h.hexdigest()


def write_emb(matrix: ItemEmbeddingMatrix, path) -> None:
    n, dim = matrix.rows.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", MAGIC, VERSION, n, dim))
        for token in matrix.tokens:
            raw = token.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ValueError(f"token too long: {token[:32]!r}...")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(matrix.rows.astype("<f4", copy=False).tobytes())


def read_emb(path) -> ItemEmbeddingMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise FormatError(f"truncated header: {len(blob)} bytes", offset=len(blob))
    magic, version, n, dim = struct.unpack_from("<4sIII", blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at offset 0", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at offset 4", offset=4)
    offset = 16
    tokens = []
    for _ in range(n):
        if offset + 2 > len(blob):
            raise FormatError(f"truncated token record at offset {offset}", offset=offset)
        (tlen,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        if offset + tlen > len(blob):
            raise FormatError(f"truncated token bytes at offset {offset}", offset=offset)
        tokens.append(blob[offset:offset + tlen].decode("utf-8"))
        offset += tlen
    want = n * dim * 4
    if len(blob) - offset != want:
        raise FormatError(
            f"expected {want} value bytes at offset {offset}, found {len(blob) - offset}",
            offset=offset)
    rows = np.frombuffer(blob, dtype="<f4", count=n * dim, offset=offset).reshape(n, dim)
    return ItemEmbeddingMatrix(tokens=tuple(tokens), rows=rows.copy())


def align_to_vocab(matrix: ItemEmbeddingMatrix, vocab: Vocab) -> ItemEmbeddingMatrix:
    """Permute rows so row i corresponds to vocab item index i; extras dropped."""
    lookup = {t: k for k, t in enumerate(matrix.tokens)}
    missing = [t for t in vocab.item_tokens if t not in lookup]
    if missing:
        shown = ", ".join(missing[:10])
        raise CoverageError(
            f"{len(missing)} vocab tokens missing from embedding matrix: {shown}",
            missing=missing[:10])
    order = np.array([lookup[t] for t in vocab.item_tokens], dtype=np.int64)
    return ItemEmbeddingMatrix(tokens=tuple(vocab.item_tokens), rows=matrix.rows[order])


def _token_rng(token: str, seed: int) -> np.random.Generator:
    digest = hashlib.blake2b(f"{seed}:{token}".encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def pseudo_embed(tokens, dim: int, seed: int = 0, attributes=None,
                 noise: float = 0.0) -> ItemEmbeddingMatrix:
    """Deterministic stand-in for a text encoder; rows are unit-norm.

    attribute mode: row = attribute vector @ fixed seeded random projection,
    plus per-token Gaussian noise. hash mode (attributes=None): row derived
    from the token bytes alone.
    """
    tokens = tuple(tokens)
    rows = np.empty((len(tokens), dim), dtype=np.float64)
    if attributes is not None:
        attributes = np.asarray(attributes, dtype=np.float64)
        if attributes.shape[0] != len(tokens):
            raise ValueError("one attribute vector per token required")
        proj = np.random.default_rng(seed).standard_normal((attributes.shape[1], dim))
        base = attributes @ proj
        for k, tok in enumerate(tokens):
            rows[k] = base[k]
            if noise > 0:
                rows[k] += noise * _token_rng(tok, seed).standard_normal(dim)
    else:
        for k, tok in enumerate(tokens):
            rows[k] = _token_rng(tok, seed).standard_normal(dim)
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return ItemEmbeddingMatrix(tokens=tokens, rows=(rows / norms).astype(np.float32))
