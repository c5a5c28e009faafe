"""Training stages: three-task pre-training, fine-tuning (with/without the
ID table), and the ID-only self-attention baseline.

One logical trainer owns the parameters, the optimizer state, and a single
seeded generator that drives init, batch order, masking, permutations, and
dropout, so a (plan, seed) pair fully determines the resulting checkpoint
bytes. Tasks alternate strictly round-robin per optimizer step; the loss is
always mean cross-entropy over the batch's target set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .adam import Adam
from .checkpoint import save_checkpoint
from .corpus import TASKS, SequenceDataset, make_pretrain_batch
from .errors import ModeError, TrainingDivergedError
from .evaluation import evaluate_model
from .model import ModelConfig, SeqRecModel, init_params


@dataclass
class TrainPlan:
    epochs: int = 30
    batch_size: int = 128
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    mask_ratio: float = 0.2
    tasks: tuple = TASKS
    selection: str = "valid_ndcg"   # or "final": keep the last epoch's params
    from_scratch: bool = False      # allow fine-tuning without a source model
    checkpoint_path: str | None = None
    metrics_path: str | None = None

    def __post_init__(self):
        for t in self.tasks:
            if t not in TASKS:
                raise ValueError(f"unknown task {t!r}")
        if self.selection not in ("valid_ndcg", "final"):
            raise ValueError("selection must be 'valid_ndcg' or 'final'")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad epochs/batch_size")


@dataclass
class EpochStats:
    epoch: int
    task_losses: dict
    valid_hr10: float
    valid_ndcg10: float

    def rows(self):
        for task in sorted(self.task_losses):
            yield (self.epoch, task, self.task_losses[task], self.valid_hr10, self.valid_ndcg10)


@dataclass
class TrainResult:
    model: SeqRecModel
    history: list = field(default_factory=list)
    best_epoch: int = 0
    best_valid_ndcg10: float = float("nan")


def _write_metrics(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "task", "loss", "valid_HR@10", "valid_NDCG@10"])
        for stats in history:
            for row in stats.rows():
                w.writerow([row[0], row[1], f"{row[2]:.6f}", f"{row[3]:.6f}", f"{row[4]:.6f}"])


def _snapshot(params):
    return {name: p.data.copy() for name, p in params.items()}


def _restore(params, snapshot):
    for name, p in params.items():
        p.data[:] = snapshot[name]


def _fit(model: SeqRecModel, ds: SequenceDataset, plan: TrainPlan, rng) -> TrainResult:
    opt = Adam(model.params, lr=plan.lr, beta1=plan.beta1, beta2=plan.beta2, eps=plan.eps)
    users = ds.user_ids
    history = []
    best_ndcg, best_epoch, best_params = -1.0, 0, _snapshot(model.params)
    step = 0
    for epoch in range(1, plan.epochs + 1):
        order = rng.permutation(len(users))
        sums, counts = {}, {}
        for start in range(0, len(users), plan.batch_size):
            chunk = [users[k] for k in order[start:start + plan.batch_size]]
            task = plan.tasks[step % len(plan.tasks)]
            step += 1
            batch = make_pretrain_batch(ds, task, chunk, rng, mask_ratio=plan.mask_ratio)
            opt.zero_grad()
            with T.ComputeTape() as tape:
                loss = model.batch_loss(batch, train=True, rng=rng)
            if not loss.is_finite():
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, step {step}, task {task}")
            tape.backward(loss)
            opt.step()
            sums[task] = sums.get(task, 0.0) + loss.item()
            counts[task] = counts.get(task, 0) + 1
        valid = evaluate_model(model, ds, split="valid", ks=(10,))
        metrics = valid.metrics()
        stats = EpochStats(
            epoch=epoch,
            task_losses={t: sums[t] / counts[t] for t in sums},
            valid_hr10=metrics["HR@10"], valid_ndcg10=metrics["NDCG@10"])
        history.append(stats)
        if plan.selection == "valid_ndcg" and stats.valid_ndcg10 > best_ndcg:
            best_ndcg, best_epoch, best_params = stats.valid_ndcg10, epoch, _snapshot(model.params)
    if plan.selection == "valid_ndcg":
        _restore(model.params, best_params)
    else:
        best_epoch = plan.epochs
        best_ndcg = history[-1].valid_ndcg10 if history else float("nan")
    if plan.metrics_path:
        _write_metrics(history, plan.metrics_path)
    if plan.checkpoint_path:
        save_checkpoint(plan.checkpoint_path, model.config, model.params)
    return TrainResult(model=model, history=history, best_epoch=best_epoch,
                       best_valid_ndcg10=best_ndcg)


def pretrain(ds: SequenceDataset, text_matrix: np.ndarray, config: ModelConfig,
             plan: TrainPlan) -> TrainResult:
    """Self-supervised pre-training over ``plan.tasks`` on train prefixes."""
    if config.mode != "text":
        raise ModeError("pre-training runs in text mode")
    rng = np.random.default_rng(plan.seed)
    model = SeqRecModel(config, text_matrix=text_matrix, rng=rng)
    return _fit(model, ds, plan, rng)


def finetune(ds: SequenceDataset, source: SeqRecModel | None, mode: str,
             plan: TrainPlan, config: ModelConfig | None = None,
             text_matrix: np.ndarray | None = None) -> TrainResult:
    """Next-item-only training from a pre-trained model.

    mode "text" keeps the parameter set unchanged; "text_id" adds a
    zero-initialized per-item table so the first step scores exactly like
    the source model.
    """
    if mode not in ("text", "text_id"):
        raise ModeError(f"fine-tune mode must be text or text_id, got {mode!r}")
    rng = np.random.default_rng(plan.seed)
    if source is None:
        if not plan.from_scratch:
            raise ModeError("fine-tuning requires a source model unless from_scratch")
        if config is None:
            raise ModeError("from-scratch fine-tuning needs a config")
        model = SeqRecModel(config.with_mode(mode), text_matrix=text_matrix, rng=rng)
    else:
        config = source.config.with_mode(mode)
        params = {name: T.Tensor(p.data.copy(), requires_grad=True)
                  for name, p in source.params.items()}
        if mode == "text_id" and "id_table" not in params:
            params["id_table"] = T.Tensor(
                np.zeros((config.vocab_size, config.model_dim), dtype=np.float32),
                requires_grad=True)
        if mode == "text":
            params.pop("id_table", None)
        tm = text_matrix if text_matrix is not None else source.text_matrix.data
        model = SeqRecModel(config, text_matrix=tm, params=params)
    return _fit(model, ds, replace(plan, tasks=("next",)), rng)


def train_id_baseline(ds: SequenceDataset, config: ModelConfig, plan: TrainPlan) -> TrainResult:
    """Same backbone, learned ID input table, no text, no pre-training."""
    rng = np.random.default_rng(plan.seed)
    model = SeqRecModel(config.with_mode("id_only"), rng=rng)
    return _fit(model, ds, replace(plan, tasks=("next",)), rng)
