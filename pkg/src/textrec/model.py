"""Self-attention sequence model over frozen text-derived item vectors.

Three wiring modes share one backbone:
  text    -- items enter through a two-layer adapter over the frozen text
             matrix; scoring softmaxes against the adapted rows.
  text_id -- adds a learnable per-item table to the adapted rows; the summed
             rows serve both the input lookup and the scoring head.
  id_only -- no text at all: a learned ID table on both sides (the
             self-attention baseline).

Canonical parameter names (the checkpoint contract):
  adapter.w1 adapter.b1 adapter.w2 adapter.b2      (text modes)
  mask_token                                        (text modes)
  pos_table
  layers.{i}.ln_attn.gain layers.{i}.ln_attn.bias
  layers.{i}.attn.wq .bq .wk .bk .wv .bv .wo .bo
  layers.{i}.ln_ffn.gain layers.{i}.ln_ffn.bias
  layers.{i}.ffn.w1 .b1 .w2 .b2
  id_table                                          (text_id, id_only)
plus a rank-1 "meta" tensor holding the hyperparameters (see checkpoint.py).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import tensor as T
from .errors import ModeError, ShapeError

MASK_SCORE = -1e9  # additive; exp() underflows to exact 0 after max-subtraction

MODES = ("text", "text_id", "id_only")
ACTIVATIONS = ("gelu", "relu")


@dataclass
class ModelConfig:
    vocab_size: int
    text_dim: int = 768
    model_dim: int = 64
    layers: int = 2
    heads: int = 2
    ffn_mult: int = 4
    max_positions: int = 50
    dropout: float = 0.2
    activation: str = "gelu"
    mode: str = "text"

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ValueError("model_dim must be divisible by heads")
        if self.max_positions < 2:
            raise ValueError("max_positions must be >= 2")
        for name in ("vocab_size", "text_dim", "model_dim", "layers", "heads", "ffn_mult"):
            if getattr(self, name) < 0 or (name != "layers" and getattr(self, name) == 0):
                raise ValueError(f"{name} must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    @property
    def uses_text(self):
        return self.mode in ("text", "text_id")

    @property
    def has_id_table(self):
        return self.mode in ("text_id", "id_only")

    def with_mode(self, mode: str) -> "ModelConfig":
        return replace(self, mode=mode)


def _trunc_normal(rng, shape, std):
    return np.clip(rng.standard_normal(shape) * std, -2 * std, 2 * std)


def init_params(config: ModelConfig, rng: np.random.Generator,
                dtype=np.float32) -> dict:
    """Fresh parameter dict.

    Residual-block weights are trunc-normal(0.02) so blocks start near
    identity. Embedding-like tables (adapter, positions, mask token, the
    id_only input table) use 1/sqrt(fan_in): with 0.02 the item logits start
    around 1e-3 and the softmax gradient takes thousands of steps to wake up.
    Biases zero, layer-norm gains one, the text_id item table zero so the
    first fine-tune step scores exactly like the source model.
    """
    d, dt = config.model_dim, config.text_dim
    p = {}

    def weight(name, shape, std=0.02):
        p[name] = T.Tensor(_trunc_normal(rng, shape, std).astype(dtype), requires_grad=True)

    def zeros(name, shape):
        p[name] = T.Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)

    def ones(name, shape):
        p[name] = T.Tensor(np.ones(shape, dtype=dtype), requires_grad=True)

    if config.uses_text:
        weight("adapter.w1", (dt, d), std=dt ** -0.5)
        zeros("adapter.b1", (d,))
        weight("adapter.w2", (d, d), std=d ** -0.5)
        zeros("adapter.b2", (d,))
        weight("mask_token", (d,), std=d ** -0.5)
    weight("pos_table", (config.max_positions, d), std=d ** -0.5)
    for i in range(config.layers):
        pre = f"layers.{i}"
        ones(f"{pre}.ln_attn.gain", (d,))
        zeros(f"{pre}.ln_attn.bias", (d,))
        for proj in ("q", "k", "v", "o"):
            weight(f"{pre}.attn.w{proj}", (d, d))
            zeros(f"{pre}.attn.b{proj}", (d,))
        ones(f"{pre}.ln_ffn.gain", (d,))
        zeros(f"{pre}.ln_ffn.bias", (d,))
        weight(f"{pre}.ffn.w1", (d, config.ffn_mult * d))
        zeros(f"{pre}.ffn.b1", (config.ffn_mult * d,))
        weight(f"{pre}.ffn.w2", (config.ffn_mult * d, d))
        zeros(f"{pre}.ffn.b2", (d,))
    if config.mode == "text_id":
        zeros("id_table", (config.vocab_size, d))  # step 0 must equal the text model
    elif config.mode == "id_only":
        # same table feeds the input and the scoring head; 1/sqrt(d) would put
        # a unit self-logit on every position at init, so halve it
        weight("id_table", (config.vocab_size, d), std=0.5 * d ** -0.5)
    return p


def score_text(features: T.Tensor, adapted: T.Tensor) -> T.Tensor:
    """Probability over items: softmax of features against adapted text rows."""
    return T.softmax_rows(T.matmul(features, T.transpose(adapted, (1, 0))))


def score_text_id(features: T.Tensor, adapted: T.Tensor, id_table) -> T.Tensor:
    """As score_text but items are represented by adapted + ID rows."""
    if id_table is None:
        raise ModeError("score_text_id requires an ID table")
    return T.softmax_rows(T.matmul(features, T.transpose(T.add(adapted, id_table), (1, 0))))


class SeqRecModel:
    def __init__(self, config: ModelConfig, text_matrix=None, params=None,
                 rng=None, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        if config.uses_text:
            if text_matrix is None:
                raise ModeError(f"mode {config.mode!r} requires a text embedding matrix")
            text_matrix = np.asarray(text_matrix)
            if text_matrix.shape != (config.vocab_size, config.text_dim):
                raise ShapeError(
                    f"text matrix shape {text_matrix.shape} != "
                    f"({config.vocab_size}, {config.text_dim})")
            self.text_matrix = T.Tensor(text_matrix.astype(dtype), requires_grad=False)
        else:
            self.text_matrix = None
        if params is None:
            params = init_params(config, rng or np.random.default_rng(0), dtype=dtype)
        self.params = params

    def _act(self, x):
        return T.gelu(x) if self.config.activation == "gelu" else T.relu(x)

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def adapter_forward(self, m: T.Tensor) -> T.Tensor:
        """Two nonlinear layers mapping text width to model width."""
        p = self.params
        if m.data.shape[-1] != self.config.text_dim:
            raise ShapeError(f"adapter input width {m.data.shape[-1]} != {self.config.text_dim}")
        h = self._act(T.add(T.matmul(m, p["adapter.w1"]), p["adapter.b1"]))
        return self._act(T.add(T.matmul(h, p["adapter.w2"]), p["adapter.b2"]))

    def item_representations(self) -> T.Tensor:
        """(vocab_size, d) rows used for both input lookup and scoring."""
        mode = self.config.mode
        if mode == "text":
            return self.adapter_forward(self.text_matrix)
        if mode == "text_id":
            return T.add(self.adapter_forward(self.text_matrix), self.params["id_table"])
        return self.params["id_table"]

    @property
    def mask_index(self) -> int:
        return self.config.vocab_size

    def embed_sequence(self, inputs: np.ndarray, item_reps: T.Tensor) -> T.Tensor:
        """Per-position item row plus learned position row.

        ``inputs`` may contain mask_index (text modes): those positions look
        up the learned mask vector instead of an item row.
        """
        cfg = self.config
        b, n = inputs.shape
        if n > cfg.max_positions:
            raise ShapeError(f"sequence length {n} exceeds max_positions {cfg.max_positions}")
        if cfg.uses_text:
            table = T.concat_rows(item_reps,
                                  T.reshape(self.params["mask_token"], (1, cfg.model_dim)))
            limit = cfg.vocab_size + 1
        else:
            table = item_reps
            limit = cfg.vocab_size
        if inputs.size and (inputs.min() < 0 or inputs.max() >= limit):
            raise IndexError(f"item index out of range [0, {limit})")
        e = T.gather_rows(table, inputs)
        pos = T.gather_rows(self.params["pos_table"], np.arange(n))
        return T.add(e, pos)

    @staticmethod
    def _additive_mask(attn_mode: str, pad_mask: np.ndarray, dtype) -> np.ndarray:
        b, n = pad_mask.shape
        key_ok = pad_mask[:, None, None, :]  # (b,1,1,n)
        if attn_mode == "causal":
            allowed = np.tril(np.ones((n, n), dtype=bool))[None, None] & key_ok
        elif attn_mode == "bidirectional":
            allowed = np.broadcast_to(key_ok, (b, 1, n, n))
        else:
            raise ValueError(f"unknown attention mode {attn_mode!r}")
        return np.where(allowed, dtype.type(0.0), dtype.type(MASK_SCORE))

    def backbone_forward(self, e: T.Tensor, attn_mode: str, pad_mask: np.ndarray,
                         train: bool = False, rng=None) -> T.Tensor:
        """Stack of pre-norm self-attention blocks; L=0 returns the input."""
        cfg = self.config
        b, n, d = e.data.shape
        heads, dh = cfg.heads, cfg.model_dim // cfg.heads
        mask = T.Tensor(self._additive_mask(attn_mode, pad_mask, e.data.dtype))
        drop = cfg.dropout if train else 0.0
        x = e
        for i in range(cfg.layers):
            p = self.params
            pre = f"layers.{i}"
            h = T.layer_norm(x, p[f"{pre}.ln_attn.gain"], p[f"{pre}.ln_attn.bias"])
            flat = T.reshape(h, (b * n, d))

            def proj(name):
                out = T.add(T.matmul(flat, p[f"{pre}.attn.w{name}"]), p[f"{pre}.attn.b{name}"])
                return T.transpose(T.reshape(out, (b, n, heads, dh)), (0, 2, 1, 3))

            q, k, v = proj("q"), proj("k"), proj("v")
            scores = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
            weights = T.softmax_rows(T.add(scores, mask))
            if drop > 0:
                weights = T.dropout(weights, drop, rng)
            ctx = T.transpose(T.matmul(weights, v), (0, 2, 1, 3))
            ctx = T.add(T.matmul(T.reshape(ctx, (b * n, d)), p[f"{pre}.attn.wo"]),
                        p[f"{pre}.attn.bo"])
            x = T.add(x, T.reshape(ctx, (b, n, d)))

            h2 = T.layer_norm(x, p[f"{pre}.ln_ffn.gain"], p[f"{pre}.ln_ffn.bias"])
            f = T.add(T.matmul(T.reshape(h2, (b * n, d)), p[f"{pre}.ffn.w1"]), p[f"{pre}.ffn.b1"])
            f = T.add(T.matmul(self._act(f), p[f"{pre}.ffn.w2"]), p[f"{pre}.ffn.b2"])
            f = T.reshape(f, (b, n, d))
            if drop > 0:
                f = T.dropout(f, drop, rng)
            x = T.add(x, f)
        return x

    def sequence_features(self, batch, train: bool = False, rng=None):
        """(features at target positions, item representations)."""
        reps = self.item_representations()
        e = self.embed_sequence(batch.inputs, reps)
        f = self.backbone_forward(e, batch.attn_mode, batch.pad_mask, train=train, rng=rng)
        b, n, d = f.data.shape
        feats = T.gather_rows(T.reshape(f, (b * n, d)), batch.flat_positions())
        return feats, reps

    def batch_loss(self, batch, train: bool = False, rng=None) -> T.Tensor:
        """Mean cross-entropy of the batch targets against the full catalog."""
        feats, reps = self.sequence_features(batch, train=train, rng=rng)
        logits = T.matmul(feats, T.transpose(reps, (1, 0)))
        return T.cross_entropy(logits, batch.target_items)

    def score_batch(self, batch) -> np.ndarray:
        """Evaluation-mode probability rows over the catalog, one per target."""
        feats, reps = self.sequence_features(batch, train=False)
        return score_text(feats, reps).data
