"""CLI pipeline: artifact determinism, config handling, end-to-end smoke."""

import json
from pathlib import Path

import numpy as np
import pytest

from textrec import cli
from textrec.corpus import five_core_filter, leave_one_out_split, load_interactions
from textrec.errors import ConfigError


def write_config(tmp_path, **kw):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(kw), encoding="utf-8")
    return str(path)


def tiny_synthetic_cfg(out, **extra):
    base = dict(synthetic_users=80, synthetic_items=40, synthetic_attrs=8,
                synthetic_min_len=6, synthetic_max_len=10,
                max_len=12, model_dim=32, layers=1, heads=2, dropout=0.0,
                pretrain_epochs=2, finetune_epochs=2, baseline_epochs=2,
                batch_size=32, pseudo_dim=16)
    base.update(extra)
    return base


def run(args):
    return cli.main(args)


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = write_config(tmp_path, bogus_key=1)
        assert run(["preprocess", "--config", cfg, "--out", str(tmp_path)]) == 1

    def test_resolved_echo_merges_defaults(self, tmp_path):
        cfg = write_config(tmp_path, model_dim=48)
        run(["gen-synthetic", "--config", write_config(tmp_path, **tiny_synthetic_cfg(tmp_path)),
             "--out", str(tmp_path), "--seed", "3"])
        resolved = json.loads((tmp_path / "resolved_config.json").read_text())
        assert resolved["seed"] == 3
        assert resolved["synthetic_users"] == 80
        assert resolved["lr"] == cli.DEFAULTS["lr"]
        assert set(resolved) == set(cli.DEFAULTS) | {"out_dir"}


class TestGenSynthetic:
    def test_writes_artifacts_deterministically(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cfg = write_config(tmp_path, **tiny_synthetic_cfg(tmp_path))
        assert run(["gen-synthetic", "--config", cfg, "--out", str(out1), "--seed", "5"]) == 0
        assert run(["gen-synthetic", "--config", cfg, "--out", str(out2), "--seed", "5"]) == 0
        for name in ("interactions.tsv", "attributes.emb", "items.emb", "rare_items.txt"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


class TestPreprocess:
    def _gen(self, tmp_path, out):
        cfg = write_config(tmp_path, **tiny_synthetic_cfg(tmp_path))
        assert run(["gen-synthetic", "--config", cfg, "--out", str(out), "--seed", "1"]) == 0

    def test_idempotent_outputs(self, tmp_path):
        out = tmp_path / "w"
        self._gen(tmp_path, out)
        cfg = write_config(tmp_path, **tiny_synthetic_cfg(
            tmp_path, interactions=str(out / "interactions.tsv"),
            protected_items=str(out / "rare_items.txt")))
        assert run(["preprocess", "--config", cfg, "--out", str(out)]) == 0
        first = {n: (out / n).read_bytes() for n in ("items.vocab", "users.vocab", "splits.tsv")}
        assert run(["preprocess", "--config", cfg, "--out", str(out)]) == 0
        for name, blob in first.items():
            assert (out / name).read_bytes() == blob

    def test_empty_dataset_error_exit(self, tmp_path, capsys):
        events = tmp_path / "few.tsv"
        events.write_text("u1\ti1\t1\nu1\ti2\t2\n", encoding="utf-8")
        cfg = write_config(tmp_path, interactions=str(events))
        assert run(["preprocess", "--config", cfg, "--out", str(tmp_path)]) == 1
        assert "empty dataset after filtering" in capsys.readouterr().out

    def test_split_conservation_through_artifacts(self, tmp_path):
        out = tmp_path / "w"
        self._gen(tmp_path, out)
        cfg = write_config(tmp_path, **tiny_synthetic_cfg(
            tmp_path, interactions=str(out / "interactions.tsv"),
            protected_items=str(out / "rare_items.txt")))
        assert run(["preprocess", "--config", cfg, "--out", str(out)]) == 0
        ds = cli.load_splits(out, max_len=12)
        log = load_interactions(out / "interactions.tsv")
        rare = frozenset((out / "rare_items.txt").read_text().splitlines())
        expected = leave_one_out_split(five_core_filter(log, protected_items=rare), max_len=12)
        assert ds.vocab.item_tokens == expected.vocab.item_tokens
        for u in expected.user_ids:
            assert ds.full_sequence(u) == expected.full_sequence(u)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipeline")
    out = tmp / "run"
    cfg_gen = write_config(tmp, **tiny_synthetic_cfg(tmp))
    assert run(["gen-synthetic", "--config", cfg_gen, "--out", str(out), "--seed", "2"]) == 0
    cfg = write_config(tmp, **tiny_synthetic_cfg(
        tmp, interactions=str(out / "interactions.tsv"),
        protected_items=str(out / "rare_items.txt"),
        embeddings=str(out / "items.emb")))
    return out, cfg


class TestPipeline:
    def test_run_all_end_to_end(self, workdir):
        import time
        out, cfg = workdir
        started = time.monotonic()
        assert run(["run-all", "--config", cfg, "--out", str(out), "--seed", "2"]) == 0
        assert time.monotonic() - started < 300  # tiny smoke config stays well under 5 min
        for name in ("pretrain.idac", "finetune_text.idac", "baseline_id.idac",
                     "report_text.csv", "report_baseline_id.csv", "coldstart.csv",
                     "metrics_pretrain.csv", "resolved_config.json"):
            assert (out / name).exists(), name

    def test_evaluate_reuses_checkpoint(self, workdir):
        out, cfg = workdir
        assert run(["evaluate", "--config", cfg, "--out", str(out), "--seed", "2"]) == 0
        assert (out / "report_finetune_text.csv").exists()

    def test_coldstart_report_from_csvs(self, workdir, tmp_path):
        out, cfg = workdir
        cold_cfg = write_config(tmp_path, report_a=str(out / "report_text.csv"),
                                report_b=str(out / "report_baseline_id.csv"))
        assert run(["coldstart-report", "--config", cold_cfg, "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "coldstart.csv").read_text().splitlines()
        assert lines[0] == "bucket_low,bucket_high,count,improved_mean_rank"

    def test_missing_embedding_tokens_fail_before_training(self, workdir, tmp_path):
        out, cfg_path = workdir
        from textrec.embfile import pseudo_embed, write_emb
        bad = tmp_path / "bad.emb"
        write_emb(pseudo_embed(["i00000", "i00001"], dim=16, seed=0), bad)
        cfg = json.loads(Path(cfg_path).read_text())
        cfg["embeddings"] = str(bad)
        bad_cfg = tmp_path / "bad_config.json"
        bad_cfg.write_text(json.dumps(cfg), encoding="utf-8")
        marker = out / "pretrain.idac"
        before = marker.read_bytes()
        assert run(["pretrain", "--config", str(bad_cfg), "--out", str(out)]) == 1
        assert marker.read_bytes() == before  # no training happened


def test_ablate_variant_structure(tmp_path):
    out = tmp_path / "run"
    cfg_gen = write_config(tmp_path, **tiny_synthetic_cfg(tmp_path))
    assert run(["gen-synthetic", "--config", cfg_gen, "--out", str(out), "--seed", "4"]) == 0
    cfg = write_config(tmp_path, **tiny_synthetic_cfg(
        tmp_path, interactions=str(out / "interactions.tsv"),
        protected_items=str(out / "rare_items.txt"),
        embeddings=str(out / "items.emb"),
        pretrain_epochs=1, finetune_epochs=1))
    assert run(["preprocess", "--config", cfg, "--out", str(out)]) == 0
    assert run(["ablate", "--config", cfg, "--out", str(out), "--seed", "4"]) == 0
    lines = (out / "ablation.csv").read_text().strip().splitlines()
    assert lines[0] == "variant,HR@10,NDCG@10"
    assert [l.split(",")[0] for l in lines[1:]] == ["full", "-np", "-mp", "-pp"]
    assert (out / "report_poprec.csv").exists()
    # shared-seed reruns of the harness are identical
    first = (out / "ablation.csv").read_bytes()
    assert run(["ablate", "--config", cfg, "--out", str(out), "--seed", "4"]) == 0
    assert (out / "ablation.csv").read_bytes() == first
