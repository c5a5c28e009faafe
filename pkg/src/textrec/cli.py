"""Command-line pipeline driver.

Subcommands: preprocess, gen-synthetic, pretrain, finetune, evaluate,
ablate, coldstart-report, run-all. Every command takes --config/--seed/--out,
rejects unknown config keys, and writes the fully resolved configuration to
<out>/resolved_config.json so a run is reproducible from its artifacts alone.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import (InteractionLog, SequenceDataset, Vocab, five_core_filter,
                     leave_one_out_split, load_interactions, save_interactions)
from .embfile import align_to_vocab, pseudo_embed, read_emb, write_emb
from .errors import ConfigError
from .evaluation import (RankReport, coldstart_report, evaluate_model, evaluate_poprec,
                         write_coldstart_csv)
from .model import ModelConfig
from .synthetic import SyntheticSpec, generate_synthetic
from .training import TrainPlan, finetune, pretrain, train_id_baseline

DEFAULTS = {
    # data
    "interactions": None,          # path to TSV event log
    "protected_items": None,       # path to newline list of rare item tokens
    "embeddings": None,            # path to .emb matrix
    "max_len": 50,
    # model
    "text_dim": None,              # inferred from the embedding file when null
    "model_dim": 64,
    "layers": 2,
    "heads": 2,
    "ffn_mult": 4,
    "dropout": 0.2,
    "activation": "gelu",
    # training
    "tasks": ["next", "masked", "permuted"],
    "pretrain_epochs": 8,
    "finetune_epochs": 8,
    "baseline_epochs": 16,
    "finetune_mode": "text",       # text | text_id
    "batch_size": 128,
    "lr": 1e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "mask_ratio": 0.2,
    "selection": "valid_ndcg",
    "seed": 0,
    # evaluation
    "eval_ks": [5, 10],
    "checkpoint": None,            # for `evaluate`
    "report_a": None,              # for `coldstart-report`
    "report_b": None,
    "bucket_width": 5,
    # synthetic generator
    "synthetic_users": 2000,
    "synthetic_items": 500,
    "synthetic_attrs": 16,
    "synthetic_min_len": 6,
    "synthetic_max_len": 14,
    "synthetic_noise": 0.1,
    "synthetic_drift": 0.05,
    "synthetic_temperature": 0.15,
    "synthetic_rare_fraction": 0.1,
    "synthetic_rare_user_fraction": 0.15,
    "pseudo_dim": 32,              # projection width for attribute pseudo-embeddings
    "pseudo_noise": 0.05,
}


def resolve_config(path: str | None, seed: int | None, out: str | None) -> dict:
    cfg = dict(DEFAULTS)
    if path:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
        unknown = sorted(set(user) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(user)
    if seed is not None:
        cfg["seed"] = seed
    cfg["out_dir"] = out or "."
    return cfg


def _echo_config(cfg: dict) -> None:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "resolved_config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _log(msg: str) -> None:
    print(msg, flush=True)


# ---------------------------------------------------------------- artifacts

def save_splits(ds: SequenceDataset, out: Path) -> None:
    with open(out / "items.vocab", "w", encoding="utf-8") as fh:
        fh.writelines(f"{t}\n" for t in ds.vocab.item_tokens)
    with open(out / "users.vocab", "w", encoding="utf-8") as fh:
        fh.writelines(f"{t}\n" for t in ds.vocab.user_tokens)
    with open(out / "splits.tsv", "w", encoding="utf-8") as fh:
        for u in ds.user_ids:
            items = ds.vocab.item_tokens
            train = " ".join(items[i] for i in ds.train[u])
            fh.write(f"{ds.vocab.user_tokens[u]}\t{train}\t{items[ds.valid[u]]}\t{items[ds.test[u]]}\n")


def load_splits(out: Path, max_len: int) -> SequenceDataset:
    item_tokens = tuple((out / "items.vocab").read_text(encoding="utf-8").splitlines())
    user_tokens = tuple((out / "users.vocab").read_text(encoding="utf-8").splitlines())
    vocab = Vocab(item_tokens=item_tokens, user_tokens=user_tokens)
    train, valid, test = {}, {}, {}
    for line in (out / "splits.tsv").read_text(encoding="utf-8").splitlines():
        user, train_part, valid_tok, test_tok = line.split("\t")
        u = vocab.user_index[user]
        train[u] = tuple(vocab.item_index[t] for t in train_part.split(" "))
        valid[u] = vocab.item_index[valid_tok]
        test[u] = vocab.item_index[test_tok]
    return SequenceDataset(vocab=vocab, train=train, valid=valid, test=test, max_len=max_len)


def _load_protected(cfg) -> frozenset:
    if not cfg["protected_items"]:
        return frozenset()
    text = Path(cfg["protected_items"]).read_text(encoding="utf-8")
    return frozenset(t for t in text.splitlines() if t)


def _load_aligned_embeddings(cfg, vocab):
    if not cfg["embeddings"]:
        raise ConfigError("config key 'embeddings' is required for this command")
    matrix = read_emb(cfg["embeddings"])
    return align_to_vocab(matrix, vocab)


def _model_config(cfg, vocab_size: int, text_dim: int | None, mode: str = "text") -> ModelConfig:
    return ModelConfig(
        vocab_size=vocab_size, text_dim=text_dim or 1,
        model_dim=cfg["model_dim"], layers=cfg["layers"], heads=cfg["heads"],
        ffn_mult=cfg["ffn_mult"], max_positions=cfg["max_len"],
        dropout=cfg["dropout"], activation=cfg["activation"], mode=mode)


def _plan(cfg, epochs, tasks, seed_offset=0, checkpoint=None, metrics=None,
          selection=None) -> TrainPlan:
    return TrainPlan(
        epochs=epochs, batch_size=cfg["batch_size"], lr=cfg["lr"],
        beta1=cfg["beta1"], beta2=cfg["beta2"], eps=cfg["eps"],
        seed=cfg["seed"] + seed_offset, mask_ratio=cfg["mask_ratio"],
        tasks=tuple(tasks), selection=selection or cfg["selection"],
        checkpoint_path=checkpoint, metrics_path=metrics)


# ---------------------------------------------------------------- commands

def cmd_preprocess(cfg) -> int:
    if not cfg["interactions"]:
        raise ConfigError("config key 'interactions' is required")
    out = Path(cfg["out_dir"])
    log = load_interactions(cfg["interactions"])
    filtered = five_core_filter(log, protected_items=_load_protected(cfg))
    ds = leave_one_out_split(filtered, max_len=cfg["max_len"])
    if not ds.train:
        _log("error: empty dataset after filtering")
        return 1
    save_splits(ds, out)
    _log(f"preprocess: {len(ds.train)} users, {ds.vocab.num_items} items, "
         f"{len(filtered)} events ({ds.excluded_users} users excluded)")
    return 0


def cmd_gen_synthetic(cfg) -> int:
    out = Path(cfg["out_dir"])
    spec = SyntheticSpec(
        n_users=cfg["synthetic_users"], n_items=cfg["synthetic_items"],
        n_attrs=cfg["synthetic_attrs"], min_len=cfg["synthetic_min_len"],
        max_len=cfg["synthetic_max_len"], noise=cfg["synthetic_noise"],
        drift=cfg["synthetic_drift"], temperature=cfg["synthetic_temperature"],
        rare_fraction=cfg["synthetic_rare_fraction"],
        rare_user_fraction=cfg["synthetic_rare_user_fraction"], seed=cfg["seed"])
    log, attrs, tokens, rare = generate_synthetic(spec)
    save_interactions(log, out / "interactions.tsv")
    write_emb(pseudo_embed(tokens, dim=spec.n_attrs, seed=spec.seed, attributes=attrs,
                           noise=0.0), out / "attributes.emb")
    write_emb(pseudo_embed(tokens, dim=cfg["pseudo_dim"], seed=spec.seed, attributes=attrs,
                           noise=cfg["pseudo_noise"]), out / "items.emb")
    with open(out / "rare_items.txt", "w", encoding="utf-8") as fh:
        fh.writelines(f"{t}\n" for t in sorted(rare))
    _log(f"gen-synthetic: {len(log)} events, {len(tokens)} items ({len(rare)} rare)")
    return 0


def cmd_pretrain(cfg) -> int:
    out = Path(cfg["out_dir"])
    ds = load_splits(out, cfg["max_len"])
    emb = _load_aligned_embeddings(cfg, ds.vocab)
    config = _model_config(cfg, ds.vocab.num_items, emb.dim)
    plan = _plan(cfg, cfg["pretrain_epochs"], cfg["tasks"],
                 checkpoint=str(out / "pretrain.idac"),
                 metrics=str(out / "metrics_pretrain.csv"))
    result = pretrain(ds, emb.rows, config, plan)
    _log(f"pretrain: best epoch {result.best_epoch}, "
         f"valid NDCG@10 {result.best_valid_ndcg10:.4f} -> pretrain.idac")
    return 0


def cmd_finetune(cfg) -> int:
    out = Path(cfg["out_dir"])
    ds = load_splits(out, cfg["max_len"])
    emb = _load_aligned_embeddings(cfg, ds.vocab)
    mode = cfg["finetune_mode"]
    source = load_checkpoint(cfg["checkpoint"] or out / "pretrain.idac",
                             text_matrix=emb.rows)
    plan = _plan(cfg, cfg["finetune_epochs"], ("next",), seed_offset=1,
                 checkpoint=str(out / f"finetune_{mode}.idac"),
                 metrics=str(out / f"metrics_finetune_{mode}.csv"))
    result = finetune(ds, source, mode, plan)
    _log(f"finetune[{mode}]: best epoch {result.best_epoch}, "
         f"valid NDCG@10 {result.best_valid_ndcg10:.4f} -> finetune_{mode}.idac")
    return 0


def _evaluate_checkpoint(cfg, ds, emb, path, label):
    model = load_checkpoint(path, text_matrix=emb.rows if emb is not None else None)
    report = evaluate_model(model, ds, split="test", ks=tuple(cfg["eval_ks"]), label=label)
    out = Path(cfg["out_dir"])
    report.to_csv(out / f"report_{label}.csv")
    (out / f"summary_{label}.txt").write_text(report.summary() + "\n", encoding="utf-8")
    return report


def cmd_evaluate(cfg) -> int:
    out = Path(cfg["out_dir"])
    ds = load_splits(out, cfg["max_len"])
    path = cfg["checkpoint"] or str(out / f"finetune_{cfg['finetune_mode']}.idac")
    emb = _load_aligned_embeddings(cfg, ds.vocab) if cfg["embeddings"] else None
    report = _evaluate_checkpoint(cfg, ds, emb, path, label=Path(path).stem)
    _log(report.summary())
    return 0


def cmd_coldstart_report(cfg) -> int:
    if not cfg["report_a"] or not cfg["report_b"]:
        raise ConfigError("coldstart-report needs 'report_a' and 'report_b' paths")
    rows = coldstart_report(RankReport.from_csv(cfg["report_a"]),
                            RankReport.from_csv(cfg["report_b"]),
                            bucket_width=cfg["bucket_width"])
    out = Path(cfg["out_dir"])
    write_coldstart_csv(rows, out / "coldstart.csv")
    for lo, hi, count, improved in rows:
        _log(f"bucket [{lo}, {'inf' if hi is None else hi}): n={count} improved_mean_rank={improved:+.2f}")
    return 0


ABLATION_VARIANTS = (
    ("full", ("next", "masked", "permuted")),
    ("-np", ("masked", "permuted")),
    ("-mp", ("next", "permuted")),
    ("-pp", ("next", "masked")),
)


def cmd_ablate(cfg) -> int:
    out = Path(cfg["out_dir"])
    ds = load_splits(out, cfg["max_len"])
    emb = _load_aligned_embeddings(cfg, ds.vocab)
    config = _model_config(cfg, ds.vocab.num_items, emb.dim)
    rows = []
    for name, tasks in ABLATION_VARIANTS:
        pre = pretrain(ds, emb.rows, config,
                       _plan(cfg, cfg["pretrain_epochs"], tasks))
        ft = finetune(ds, pre.model, "text",
                      _plan(cfg, cfg["finetune_epochs"], ("next",), seed_offset=1))
        report = evaluate_model(ft.model, ds, split="test", label=name)
        m = report.metrics()
        rows.append((name, m["HR@10"], m["NDCG@10"]))
        _log(f"ablate[{name}]: HR@10={m['HR@10']:.4f} NDCG@10={m['NDCG@10']:.4f}")
    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "HR@10", "NDCG@10"])
        for name, hr, ndcg in rows:
            w.writerow([name, f"{hr:.6f}", f"{ndcg:.6f}"])
    pop = evaluate_poprec(ds, split="test")
    pop.to_csv(out / "report_poprec.csv")
    _log(f"poprec: HR@10={pop.metrics()['HR@10']:.4f}")
    return 0


def cmd_run_all(cfg) -> int:
    out = Path(cfg["out_dir"])
    stages = [("preprocess", cmd_preprocess), ("pretrain", cmd_pretrain),
              ("finetune", cmd_finetune)]
    for name, fn in stages:
        code = fn(cfg)
        if code:
            _log(f"run-all aborted at stage: {name}")
            return code
    ds = load_splits(out, cfg["max_len"])
    emb = _load_aligned_embeddings(cfg, ds.vocab)
    mode = cfg["finetune_mode"]
    report_model = _evaluate_checkpoint(cfg, ds, emb, out / f"finetune_{mode}.idac",
                                        label=mode)
    config = _model_config(cfg, ds.vocab.num_items, emb.dim)
    base = train_id_baseline(ds, config,
                             _plan(cfg, cfg["baseline_epochs"], ("next",), seed_offset=2,
                                   checkpoint=str(out / "baseline_id.idac"),
                                   metrics=str(out / "metrics_baseline.csv")))
    report_base = evaluate_model(base.model, ds, split="test",
                                 ks=tuple(cfg["eval_ks"]), label="baseline_id")
    report_base.to_csv(out / "report_baseline_id.csv")
    rows = coldstart_report(report_model, report_base, bucket_width=cfg["bucket_width"])
    write_coldstart_csv(rows, out / "coldstart.csv")
    _log(f"run-all: model HR@10={report_model.metrics()['HR@10']:.4f} "
         f"baseline HR@10={report_base.metrics()['HR@10']:.4f}")
    return 0


COMMANDS = {
    "preprocess": cmd_preprocess,
    "gen-synthetic": cmd_gen_synthetic,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "coldstart-report": cmd_coldstart_report,
    "run-all": cmd_run_all,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="textrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.config, args.seed, args.out)
        _echo_config(cfg)
        return COMMANDS[args.command](cfg)
    except Exception as exc:  # surface the failing stage/cause with nonzero exit
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
