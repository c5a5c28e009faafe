"""Full-catalog leave-one-out ranking, HR@k/NDCG@k, popularity buckets.

Candidates for a user are the whole catalog minus that user's other
interacted items; ties broken by ascending item index so ranking is
deterministic and portable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import SequenceDataset, make_eval_batch
from .errors import MetricsError

DEFAULT_KS = (5, 10)
BUCKET_CAP = 50


def rank_target(scores: np.ndarray, target: int, exclusion) -> int:
    """1 + count of candidates strictly above target + lower-index ties."""
    scores = np.asarray(scores)
    n = scores.shape[0]
    excl = np.zeros(n, dtype=bool)
    idx = np.fromiter(exclusion, dtype=np.int64) if not isinstance(exclusion, np.ndarray) else exclusion
    if idx.size:
        excl[idx] = True
    if excl[target]:
        raise ValueError(f"target {target} is in the exclusion set")
    s_t = scores[target]
    cand = ~excl
    higher = int(np.count_nonzero(cand & (scores > s_t)))
    ties_before = int(np.count_nonzero(cand[:target] & (scores[:target] == s_t)))
    return 1 + higher + ties_before


def hr_ndcg(ranks, k: int):
    """(HR@k, NDCG@k) over a rank list; single-ground-truth convention."""
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise MetricsError("no ranks to aggregate")
    if k < 1:
        raise MetricsError("k must be >= 1")
    hits = ranks <= k
    hr = float(hits.mean())
    gains = np.where(hits, 1.0 / np.log2(ranks + 1.0), 0.0)
    return hr, float(gains.mean())


def poprec_scores(ds: SequenceDataset) -> np.ndarray:
    """Training interaction count per item; one score vector for all users."""
    return ds.item_popularity().astype(np.float64)


@dataclass
class RankReport:
    """Per-user target ranks plus popularity context."""

    user_tokens: list
    target_tokens: list
    popularity: np.ndarray        # training popularity of each target
    candidate_counts: np.ndarray
    ranks: np.ndarray
    k_values: tuple = DEFAULT_KS
    label: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.popularity = np.asarray(self.popularity, dtype=np.int64)
        self.candidate_counts = np.asarray(self.candidate_counts, dtype=np.int64)
        self.ranks = np.asarray(self.ranks, dtype=np.int64)
        if self.ranks.size and self.ranks.min() < 1:
            raise MetricsError("ranks must be >= 1")

    def __len__(self):
        return len(self.ranks)

    def metrics(self) -> dict:
        out = {}
        for k in self.k_values:
            hr, ndcg = hr_ndcg(self.ranks, k)
            out[f"HR@{k}"] = hr
            out[f"NDCG@{k}"] = ndcg
        return out

    def bucket_mask(self, lo: int, hi) -> np.ndarray:
        hi = math.inf if hi is None else hi
        return (self.popularity >= lo) & (self.popularity < hi)

    def bucket_hr(self, lo: int, hi, k: int = 10) -> float:
        mask = self.bucket_mask(lo, hi)
        if not mask.any():
            raise MetricsError(f"empty popularity bucket [{lo}, {hi})")
        return hr_ndcg(self.ranks[mask], k)[0]

    def summary(self) -> str:
        lines = [f"users evaluated: {len(self)}"]
        if self.label:
            lines.insert(0, f"model: {self.label}")
        for name, value in self.metrics().items():
            lines.append(f"{name}: {value:.4f}")
        lines.append(f"mean rank: {self.ranks.mean():.2f}")
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["user", "target", "target_popularity", "candidate_count", "rank"])
            for row in zip(self.user_tokens, self.target_tokens, self.popularity,
                           self.candidate_counts, self.ranks):
                w.writerow(row)

    @classmethod
    def from_csv(cls, path, k_values=DEFAULT_KS, label="") -> "RankReport":
        users, targets, pop, cand, ranks = [], [], [], [], []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                users.append(row["user"])
                targets.append(row["target"])
                pop.append(int(row["target_popularity"]))
                cand.append(int(row["candidate_count"]))
                ranks.append(int(row["rank"]))
        return cls(user_tokens=users, target_tokens=targets, popularity=np.array(pop),
                   candidate_counts=np.array(cand), ranks=np.array(ranks),
                   k_values=k_values, label=label)


def evaluate_ranks(ds: SequenceDataset, score_rows, split: str = "test",
                   ks=DEFAULT_KS, batch_size: int = 256, label: str = "") -> RankReport:
    """Rank every user's held-out target under ``score_rows``.

    ``score_rows(batch)`` returns one catalog-score row per batch user.
    Exclusion per user: every interacted item except the target itself.
    """
    users = ds.user_ids
    pop = ds.item_popularity()
    n_items = ds.vocab.num_items
    user_tokens, target_tokens = [], []
    popularity, cand_counts, ranks = [], [], []
    for start in range(0, len(users), batch_size):
        chunk = users[start:start + batch_size]
        batch = make_eval_batch(ds, chunk, split)
        rows = score_rows(batch)
        for row_idx, u in enumerate(chunk):
            target = int(batch.target_items[row_idx])
            interacted = set(ds.full_sequence(u))
            if split == "train":
                exclusion: set = set()
            else:
                exclusion = interacted - {target}
            r = rank_target(rows[row_idx], target, exclusion)
            user_tokens.append(ds.vocab.user_tokens[u])
            target_tokens.append(ds.vocab.item_tokens[target])
            popularity.append(int(pop[target]))
            cand_counts.append(n_items - len(exclusion))
            ranks.append(r)
    return RankReport(user_tokens=user_tokens, target_tokens=target_tokens,
                      popularity=np.array(popularity), candidate_counts=np.array(cand_counts),
                      ranks=np.array(ranks), k_values=ks, label=label)


def evaluate_model(model, ds: SequenceDataset, split: str = "test", ks=DEFAULT_KS,
                   batch_size: int = 256, label: str = "") -> RankReport:
    return evaluate_ranks(ds, model.score_batch, split=split, ks=ks,
                          batch_size=batch_size, label=label)


def evaluate_poprec(ds: SequenceDataset, split: str = "test", ks=DEFAULT_KS,
                    label: str = "poprec") -> RankReport:
    scores = poprec_scores(ds)

    def score_rows(batch):
        return np.tile(scores, (batch.inputs.shape[0], 1))

    return evaluate_ranks(ds, score_rows, split=split, ks=ks, label=label)


def coldstart_report(report_a: RankReport, report_b: RankReport,
                     bucket_width: int = 5, cap: int = BUCKET_CAP):
    """Per popularity bucket: test count and (meanRank_B - meanRank_A).

    A is the evaluated model, B the baseline; positive values mean A ranked
    the bucket's targets better. Buckets [0,w), [w,2w), ..., then one open
    bucket [cap, inf).
    """
    if report_a.user_tokens != report_b.user_tokens:
        raise ValueError("reports cover different user sets")
    if report_a.target_tokens != report_b.target_tokens:
        raise ValueError("reports cover different targets")
    if not np.array_equal(report_a.popularity, report_b.popularity):
        raise ValueError("reports disagree on target popularity")
    edges = list(range(0, cap, bucket_width)) + [cap]
    rows = []
    for i, lo in enumerate(edges):
        hi = edges[i + 1] if i + 1 < len(edges) else None
        mask = report_a.bucket_mask(lo, hi)
        count = int(mask.sum())
        if count == 0:
            continue
        improved = float(report_b.ranks[mask].mean() - report_a.ranks[mask].mean())
        rows.append((lo, hi, count, improved))
    return rows


def write_coldstart_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bucket_low", "bucket_high", "count", "improved_mean_rank"])
        for lo, hi, count, improved in rows:
            w.writerow([lo, "" if hi is None else hi, count, f"{improved:.4f}"])
