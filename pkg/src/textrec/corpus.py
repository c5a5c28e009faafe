"""Interaction logs, 5-core filtering, leave-one-out splits, training batches.

Interaction files are UTF-8 text, one event per line:
``user_token<TAB>item_token<TAB>timestamp`` with an integer timestamp.
Per-user ordering is (timestamp, original line index) ascending; splits and
batches operate on item *indices* from a lexicographically ordered Vocab.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

PAD_INDEX = 0  # pad slots carry index 0 plus pad_mask=False; isolated by masking


@dataclass
class InteractionLog:
    """(user_token, item_token, timestamp) events in original line order."""

    events: list

    def __len__(self):
        return len(self.events)

    def user_counts(self) -> Counter:
        return Counter(u for u, _, _ in self.events)

    def item_counts(self) -> Counter:
        return Counter(i for _, i, _ in self.events)

    def per_user_sequences(self) -> dict:
        """user_token -> item tokens ordered by (timestamp, line index)."""
        buckets: dict = {}
        for pos, (u, i, ts) in enumerate(self.events):
            buckets.setdefault(u, []).append((ts, pos, i))
        return {u: [i for _, _, i in sorted(rows)] for u, rows in buckets.items()}


def load_interactions(path) -> InteractionLog:
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}",
                                 line_number=lineno)
            user, item, ts_str = parts
            if not user or not item:
                raise ParseError(f"line {lineno}: empty user or item token", line_number=lineno)
            try:
                ts = int(ts_str)
            except ValueError:
                raise ParseError(f"line {lineno}: non-integer timestamp {ts_str!r}",
                                 line_number=lineno) from None
            events.append((user, item, ts))
    return InteractionLog(events)


def save_interactions(log: InteractionLog, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, i, ts in log.events:
            fh.write(f"{u}\t{i}\t{ts}\n")


def five_core_filter(log: InteractionLog, protected_items=frozenset(),
                     min_count: int = 5) -> InteractionLog:
    """Maximal sub-log where every user and item has >= min_count events.

    Items in ``protected_items`` are never removed (synthetic rare items that
    must survive into the cold-start buckets); their events still count
    toward user totals. Iterates removal to the fixpoint, which is unique
    regardless of removal order.
    """
    protected = frozenset(protected_items)
    events = list(log.events)
    while True:
        ucount = Counter(u for u, _, _ in events)
        icount = Counter(i for _, i, _ in events)
        bad_users = {u for u, c in ucount.items() if c < min_count}
        bad_items = {i for i, c in icount.items() if c < min_count and i not in protected}
        if not bad_users and not bad_items:
            return InteractionLog(events)
        events = [e for e in events if e[0] not in bad_users and e[1] not in bad_items]


@dataclass
class Vocab:
    """Dense, lexicographically ordered token <-> index bijections."""

    item_tokens: tuple
    user_tokens: tuple
    item_index: dict = field(repr=False, default_factory=dict)
    user_index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.item_index:
            self.item_index = {t: k for k, t in enumerate(self.item_tokens)}
        if not self.user_index:
            self.user_index = {t: k for k, t in enumerate(self.user_tokens)}

    @property
    def num_items(self):
        return len(self.item_tokens)

    @property
    def num_users(self):
        return len(self.user_tokens)

    @classmethod
    def from_log(cls, log: InteractionLog) -> "Vocab":
        return cls(item_tokens=tuple(sorted({i for _, i, _ in log.events})),
                   user_tokens=tuple(sorted({u for u, _, _ in log.events})))


@dataclass
class SequenceDataset:
    """Per-user train prefix plus held-out validation and test targets."""

    vocab: Vocab
    train: dict          # user index -> tuple of item indices
    valid: dict          # user index -> item index
    test: dict           # user index -> item index
    max_len: int
    excluded_users: int = 0

    @property
    def user_ids(self):
        return sorted(self.train.keys())

    def full_sequence(self, u):
        return tuple(self.train[u]) + (self.valid[u], self.test[u])

    def item_popularity(self) -> np.ndarray:
        """Training-interaction count per item index."""
        pop = np.zeros(self.vocab.num_items, dtype=np.int64)
        for seq in self.train.values():
            for i in seq:
                pop[i] += 1
        return pop


def leave_one_out_split(log: InteractionLog, max_len: int = 50,
                        vocab: Vocab | None = None) -> SequenceDataset:
    """Last item -> test target, second-to-last -> validation, rest -> train."""
    if vocab is None:
        vocab = Vocab.from_log(log)
    train, valid, test = {}, {}, {}
    excluded = 0
    for user_token, items in log.per_user_sequences().items():
        if len(items) < 3:
            excluded += 1
            continue
        u = vocab.user_index[user_token]
        seq = tuple(vocab.item_index[i] for i in items)
        train[u] = seq[:-2]
        valid[u] = seq[-2]
        test[u] = seq[-1]
    return SequenceDataset(vocab=vocab, train=train, valid=valid, test=test,
                           max_len=max_len, excluded_users=excluded)


TASKS = ("next", "masked", "permuted")


@dataclass
class TrainingBatch:
    inputs: np.ndarray            # (b, n) int64, PAD_INDEX on pad slots
    pad_mask: np.ndarray          # (b, n) bool, True where a real token sits
    attn_mode: str                # "causal" | "bidirectional"
    target_rows: np.ndarray       # (T,) batch row of each target
    target_cols: np.ndarray       # (T,) position of each target
    target_items: np.ndarray      # (T,) ground-truth item indices
    task: str
    permutations: list | None = None  # per-row permutation used (permuted task)

    @property
    def seq_len(self):
        return self.inputs.shape[1]

    def flat_positions(self):
        return self.target_rows * self.inputs.shape[1] + self.target_cols


def _pad_batch(rows):
    n = max(len(r) for r in rows)
    inputs = np.full((len(rows), n), PAD_INDEX, dtype=np.int64)
    pad_mask = np.zeros((len(rows), n), dtype=bool)
    for k, r in enumerate(rows):
        inputs[k, :len(r)] = r
        pad_mask[k, :len(r)] = True
    return inputs, pad_mask


def make_pretrain_batch(ds: SequenceDataset, task: str, user_ids,
                        rng: np.random.Generator, mask_ratio: float = 0.2,
                        mask_index: int | None = None,
                        forced_permutations=None) -> TrainingBatch:
    """Build one padded batch for a pre-training task over train prefixes.

    next:     causal; inputs are the window minus its last item, the target at
              position t is the item at t+1.
    masked:   bidirectional; every real position is masked independently with
              probability mask_ratio (at least one forced), masked inputs are
              replaced by mask_index and become the targets.
    permuted: the train prefix is permuted uniformly first, then treated
              exactly like next (causal over the permuted order).
    """
    if task not in TASKS:
        raise ValueError(f"unknown pre-training task {task!r}")
    if mask_index is None:
        mask_index = ds.vocab.num_items
    max_len = ds.max_len
    rows, t_rows, t_cols, t_items = [], [], [], []
    permutations = [] if task == "permuted" else None

    for k, u in enumerate(user_ids):
        seq = list(ds.train[u])
        if task == "permuted":
            if forced_permutations is not None:
                perm = np.asarray(forced_permutations[k])
            else:
                perm = rng.permutation(len(seq))
            permutations.append(perm)
            seq = [seq[j] for j in perm]
        if task in ("next", "permuted"):
            window = seq[-(max_len + 1):]
            inputs_u = window[:-1]
            rows.append(inputs_u)
            for pos in range(len(inputs_u)):
                t_rows.append(k)
                t_cols.append(pos)
                t_items.append(window[pos + 1])
        else:
            window = seq[-max_len:]
            flags = rng.random(len(window)) < mask_ratio
            if not flags.any():
                flags[rng.integers(len(window))] = True
            inputs_u = [mask_index if flags[p] else item for p, item in enumerate(window)]
            rows.append(inputs_u)
            for pos in np.flatnonzero(flags):
                t_rows.append(k)
                t_cols.append(int(pos))
                t_items.append(window[pos])

    inputs, pad_mask = _pad_batch(rows)
    return TrainingBatch(
        inputs=inputs, pad_mask=pad_mask,
        attn_mode="bidirectional" if task == "masked" else "causal",
        target_rows=np.array(t_rows, dtype=np.int64),
        target_cols=np.array(t_cols, dtype=np.int64),
        target_items=np.array(t_items, dtype=np.int64),
        task=task, permutations=permutations)


def make_eval_batch(ds: SequenceDataset, user_ids, split: str) -> TrainingBatch:
    """Causal batch whose last real position predicts the held-out target."""
    rows, targets = [], []
    for u in user_ids:
        if split == "valid":
            context = list(ds.train[u])
            target = ds.valid[u]
        elif split == "test":
            context = list(ds.train[u]) + [ds.valid[u]]
            target = ds.test[u]
        elif split == "train":
            context = list(ds.train[u])[:-1]
            target = ds.train[u][-1]
        else:
            raise ValueError(f"unknown split {split!r}")
        rows.append(context[-ds.max_len:])
        targets.append(target)
    inputs, pad_mask = _pad_batch(rows)
    lengths = pad_mask.sum(axis=1)
    return TrainingBatch(
        inputs=inputs, pad_mask=pad_mask, attn_mode="causal",
        target_rows=np.arange(len(user_ids), dtype=np.int64),
        target_cols=lengths - 1,
        target_items=np.array(targets, dtype=np.int64),
        task="next")
