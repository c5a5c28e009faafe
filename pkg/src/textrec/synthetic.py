"""Attribute-driven synthetic interaction generator.

Each item carries a latent attribute mixture; each user a drifting attribute
preference. The next item is sampled proportional to the softmax of
preference-attribute affinity, with a uniform-noise mixture. A configurable
fraction of items is reserved as *rare*: injected fewer than 5 times into
train interiors yet planted as test targets for a user subset, so the cold
popularity buckets are populated. Rare items must be passed to the 5-core
filter as protected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import InteractionLog


@dataclass
class SyntheticSpec:
    n_users: int = 2000
    n_items: int = 500
    n_attrs: int = 16
    min_len: int = 6
    max_len: int = 14
    drift: float = 0.05
    noise: float = 0.1
    temperature: float = 0.15
    rare_fraction: float = 0.1       # items reserved as rare
    rare_user_fraction: float = 0.15  # users whose test target becomes rare
    seed: int = 0

    def __post_init__(self):
        for name in ("n_users", "n_items", "n_attrs", "min_len", "max_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.min_len > self.max_len:
            raise ValueError("min_len > max_len")


def _unit(v):
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def item_token(idx: int) -> str:
    return f"i{idx:05d}"


def user_token(idx: int) -> str:
    return f"u{idx:05d}"


def generate_synthetic(spec: SyntheticSpec):
    """Returns (InteractionLog, attribute matrix (n_items x n_attrs) float32,
    item tokens list, rare item-token set)."""
    rng = np.random.default_rng(spec.seed)
    k = spec.n_attrs

    dominant = rng.integers(0, k, size=spec.n_items)
    attrs = 0.15 * rng.random((spec.n_items, k))
    attrs[np.arange(spec.n_items), dominant] += 1.0
    attrs = attrs / np.linalg.norm(attrs, axis=1, keepdims=True)

    n_rare = int(round(spec.rare_fraction * spec.n_items))
    rare_ids = set(rng.choice(spec.n_items, size=n_rare, replace=False).tolist()) if n_rare else set()
    regular_ids = np.array([i for i in range(spec.n_items) if i not in rare_ids])

    sequences = []
    prefs = []
    for _ in range(spec.n_users):
        pref = 0.15 * rng.random(k)
        pref[rng.integers(k)] += 1.0
        pref = _unit(pref)
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        taken = set()
        seq = []
        for _ in range(length):
            pool = regular_ids[[i not in taken for i in regular_ids]]
            if pool.size == 0:
                break
            if spec.noise > 0 and rng.random() < spec.noise:
                choice = int(pool[rng.integers(pool.size)])
            else:
                scores = attrs[pool] @ pref / spec.temperature
                p = np.exp(scores - scores.max())
                p /= p.sum()
                choice = int(rng.choice(pool, p=p))
            seq.append(choice)
            taken.add(choice)
            if spec.drift > 0:
                pref = _unit(pref + spec.drift * rng.standard_normal(k))
        sequences.append(seq)
        prefs.append(pref)

    # rare occurrences: 0-4 train appearances each, inserted mid-sequence
    rare_list = sorted(rare_ids)
    for rid in rare_list:
        for _ in range(int(rng.integers(0, 5))):
            u = int(rng.integers(spec.n_users))
            seq = sequences[u]
            if len(seq) < 4 or rid in seq:
                continue
            pos = int(rng.integers(0, len(seq) - 2))  # keep out of valid/test slots
            seq.insert(pos, rid)

    # plant preference-matched rare items as test targets for a user subset
    if rare_list:
        rare_dominant = dominant[rare_list]
        n_rare_users = int(round(spec.rare_user_fraction * spec.n_users))
        chosen = rng.choice(spec.n_users, size=n_rare_users, replace=False)
        for u in chosen:
            seq = sequences[int(u)]
            want = int(np.argmax(prefs[int(u)]))
            matching = [rid for rid, d in zip(rare_list, rare_dominant) if d == want and rid not in seq]
            if not matching:
                matching = [rid for rid in rare_list if rid not in seq]
            if not matching:
                continue
            seq[-1] = matching[int(rng.integers(len(matching)))]

    events = []
    for u, seq in enumerate(sequences):
        tok = user_token(u)
        for ts, item in enumerate(seq):
            events.append((tok, item_token(item), ts))

    tokens = [item_token(i) for i in range(spec.n_items)]
    rare_tokens = {item_token(i) for i in rare_list}
    return InteractionLog(events), attrs.astype(np.float32), tokens, rare_tokens
