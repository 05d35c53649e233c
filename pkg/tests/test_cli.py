"""Command-line interface: outputs, manifests, overrides, exit codes."""

import json

import numpy as np
import pytest

from advtext.cli import EXIT_CONFIG, EXIT_OK, main
from advtext.embedding import NeighborCache, save_embeddings
from advtext.synth import ToyWorldConfig, make_dataset, make_toy_world
from advtext.text import save_dataset


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Tiny on-disk fixture set: embeddings, lexicon, datasets, config."""
    root = tmp_path_factory.mktemp("cli")
    world = make_toy_world(
        ToyWorldConfig(
            seed=3,
            n_pos_groups=6,
            n_neg_groups=6,
            n_neutral_groups=6,
            group_size=5,
            dim=16,
        )
    )
    save_embeddings(world.store, root / "embeddings.txt")
    world.lexicon.save(root / "lexicon.tsv")
    kwargs = dict(
        min_len=12,
        max_len=20,
        min_sentiment=2,
        max_sentiment=3,
        spurious_align=1.0,
        label_noise=0.1,
    )
    save_dataset(
        make_dataset(world, 200, seed=21, split="train", **kwargs), root / "train.jsonl"
    )
    save_dataset(
        make_dataset(world, 30, seed=23, split="test", **kwargs), root / "test.jsonl"
    )
    (root / "config.json").write_text(
        json.dumps(
            {
                "n_clean": 1,
                "n_adv": 1,
                "gamma": 0.1,
                "lr": 5e-3,
                "seed": 0,
                "hidden_size": 16,
                "attack": {"query_budget": 200},
            }
        )
    )
    assert (
        main(
            [
                "precompute-neighbors",
                "--emb",
                str(root / "embeddings.txt"),
                "--out",
                str(root / "nbrs.jsonl"),
            ]
        )
        == EXIT_OK
    )
    assert (
        main(
            [
                "train",
                "--data",
                str(root / "train.jsonl"),
                "--emb",
                str(root / "embeddings.txt"),
                "--lexicon",
                str(root / "lexicon.tsv"),
                "--neighbors",
                str(root / "nbrs.jsonl"),
                "--config",
                str(root / "config.json"),
                "--out-dir",
                str(root / "run"),
            ]
        )
        == EXIT_OK
    )
    return root


class TestPrecomputeNeighbors:
    def test_outputs_and_manifest(self, workspace):
        cache = NeighborCache.load(workspace / "nbrs.jsonl")
        assert cache.k == 20 and cache.min_cos == 0.8  # defaults applied
        manifest = json.loads((workspace / "nbrs.jsonl.manifest.json").read_text())
        assert manifest["command"] == "precompute-neighbors"
        assert manifest["summary"]["vocab_size"] == 90
        assert str(workspace / "nbrs.jsonl") in manifest["outputs"]
        assert len(manifest["inputs"]) == 1

    def test_rerun_byte_identical(self, workspace, tmp_path):
        out = tmp_path / "again.jsonl"
        main(
            [
                "precompute-neighbors",
                "--emb",
                str(workspace / "embeddings.txt"),
                "--out",
                str(out),
            ]
        )
        assert out.read_bytes() == (workspace / "nbrs.jsonl").read_bytes()

    def test_tiny_vocab_neighbor_bound(self, tmp_path):
        vecs = {f"w{i}": np.eye(5)[i] + 0.5 for i in range(5)}
        from advtext.embedding import EmbeddingStore

        save_embeddings(
            EmbeddingStore.from_word_vectors(vecs), tmp_path / "emb.txt"
        )
        out = tmp_path / "cache.jsonl"
        assert (
            main(["precompute-neighbors", "--emb", str(tmp_path / "emb.txt"), "--out", str(out)])
            == EXIT_OK
        )
        cache = NeighborCache.load(out)
        assert all(len(cache.get(w)) <= 4 for w in vecs)


class TestTrain:
    def test_outputs(self, workspace):
        run = workspace / "run"
        assert (run / "model.npz").exists()
        reports = [
            json.loads(line) for line in (run / "epochs.jsonl").read_text().splitlines()
        ]
        assert [r["kind"] for r in reports] == ["clean", "adversarial"]
        manifest = json.loads((run / "manifest.json").read_text())
        assert manifest["config"]["gamma"] == 0.1
        assert manifest["config"]["attack"]["query_budget"] == 200
        assert 0.0 <= manifest["summary"]["train_accuracy"] <= 1.0
        assert len(manifest["inputs"]) == 4

    def test_flag_overrides_config(self, workspace, tmp_path):
        out = tmp_path / "run2"
        assert (
            main(
                [
                    "train",
                    "--data",
                    str(workspace / "train.jsonl"),
                    "--emb",
                    str(workspace / "embeddings.txt"),
                    "--config",
                    str(workspace / "config.json"),
                    "--n-adv",
                    "0",
                    "--n-clean",
                    "2",
                    "--out-dir",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["n_adv"] == 0
        assert manifest["config"]["n_clean"] == 2

    def test_deterministic_across_runs(self, workspace, tmp_path):
        runs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert (
                main(
                    [
                        "train",
                        "--data",
                        str(workspace / "train.jsonl"),
                        "--emb",
                        str(workspace / "embeddings.txt"),
                        "--lexicon",
                        str(workspace / "lexicon.tsv"),
                        "--neighbors",
                        str(workspace / "nbrs.jsonl"),
                        "--config",
                        str(workspace / "config.json"),
                        "--out-dir",
                        str(out),
                    ]
                )
                == EXIT_OK
            )
            runs.append(np.load(out / "model.npz"))
        for key in ("W1", "b1", "W2", "b2"):
            assert np.array_equal(runs[0][key], runs[1][key])


class TestAttackEvalAopc:
    def test_attack_records_and_summary(self, workspace, tmp_path):
        out = tmp_path / "atk.jsonl"
        assert (
            main(
                [
                    "attack",
                    "--model",
                    str(workspace / "run" / "model.npz"),
                    "--data",
                    str(workspace / "test.jsonl"),
                    "--neighbors",
                    str(workspace / "nbrs.jsonl"),
                    "--lexicon",
                    str(workspace / "lexicon.tsv"),
                    "--budget",
                    "2000",
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        lines = [json.loads(line) for line in out.read_text().splitlines()]
        records, summary = lines[:-1], lines[-1]["summary"]
        assert len(records) == 30
        for rec in records:
            assert set(rec) == {"id", "status", "queries", "mods", "goal", "perturbed_text"}
            assert rec["status"] in ("Success", "Failed", "Exhausted")
            assert rec["queries"] <= 2000
        assert summary["total_attacked"] == 30
        assert summary["attack_success_rate"] == summary["successes"] / 30
        manifest = json.loads((tmp_path / "atk.jsonl.manifest.json").read_text())
        assert manifest["config"]["query_budget"] == 2000

    def test_eval_with_adversarial_set(self, workspace, tmp_path):
        out = tmp_path / "eval.json"
        assert (
            main(
                [
                    "eval",
                    "--model",
                    str(workspace / "run" / "model.npz"),
                    "--data",
                    str(workspace / "test.jsonl"),
                    "--adv",
                    str(workspace / "test.jsonl"),
                    "--lexicon",
                    str(workspace / "lexicon.tsv"),
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        report = json.loads(out.read_text())
        assert 0.0 <= report["accuracy"] <= 1.0
        assert report["robust_accuracy"] == pytest.approx(report["accuracy"])
        assert report["n_examples"] == report["n_adversarial"] == 30

    def test_aopc_table(self, workspace, tmp_path):
        out = tmp_path / "aopc.tsv"
        assert (
            main(
                [
                    "aopc",
                    "--model",
                    str(workspace / "run" / "model.npz"),
                    "--data",
                    str(workspace / "test.jsonl"),
                    "--samples",
                    "100",
                    "--k",
                    "5",
                    "--seed",
                    "0",
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        lines = out.read_text().splitlines()
        assert lines[0].split("\t") == ["example_id"] + [
            f"aopc_delta_k{j}" for j in range(1, 6)
        ]
        assert len(lines) == 31  # header + 30 examples


class TestSweepGamma:
    def test_emits_one_row_per_gamma(self, workspace, tmp_path):
        out = tmp_path / "sweep.tsv"
        assert (
            main(
                [
                    "sweep-gamma",
                    "--values",
                    "0,0.2,1.0",
                    "--data",
                    str(workspace / "train.jsonl"),
                    "--eval-data",
                    str(workspace / "test.jsonl"),
                    "--emb",
                    str(workspace / "embeddings.txt"),
                    "--neighbors",
                    str(workspace / "nbrs.jsonl"),
                    "--lexicon",
                    str(workspace / "lexicon.tsv"),
                    "--config",
                    str(workspace / "config.json"),
                    "--out",
                    str(out),
                ]
            )
            == EXIT_OK
        )
        lines = out.read_text().splitlines()
        assert lines[0] == "gamma\tattack_success_rate\tstandard_accuracy"
        assert len(lines) == 4
        gammas = [float(line.split("\t")[0]) for line in lines[1:]]
        assert gammas == [0.0, 0.2, 1.0]


class TestErrorPaths:
    def test_missing_data_exits_config_no_outputs(self, workspace, tmp_path, capsys):
        out_dir = tmp_path / "never"
        code = main(
            [
                "train",
                "--data",
                str(tmp_path / "missing.jsonl"),
                "--emb",
                str(workspace / "embeddings.txt"),
                "--out-dir",
                str(out_dir),
            ]
        )
        assert code == EXIT_CONFIG
        assert not out_dir.exists()
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "config"

    def test_invalid_config_json(self, workspace, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = main(
            [
                "train",
                "--data",
                str(workspace / "train.jsonl"),
                "--emb",
                str(workspace / "embeddings.txt"),
                "--config",
                str(bad),
                "--out-dir",
                str(tmp_path / "run"),
            ]
        )
        assert code == EXIT_CONFIG

    def test_unknown_config_key(self, workspace, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"learning_rate": 0.1}))
        code = main(
            [
                "train",
                "--data",
                str(workspace / "train.jsonl"),
                "--emb",
                str(workspace / "embeddings.txt"),
                "--config",
                str(bad),
                "--out-dir",
                str(tmp_path / "run"),
            ]
        )
        assert code == EXIT_CONFIG

    def test_invalid_budget(self, workspace, tmp_path):
        code = main(
            [
                "attack",
                "--model",
                str(workspace / "run" / "model.npz"),
                "--data",
                str(workspace / "test.jsonl"),
                "--neighbors",
                str(workspace / "nbrs.jsonl"),
                "--budget",
                "0",
                "--out",
                str(tmp_path / "x.jsonl"),
            ]
        )
        assert code == EXIT_CONFIG

    def test_bad_gamma_values(self, workspace, tmp_path):
        code = main(
            [
                "sweep-gamma",
                "--values",
                "0,2.5",
                "--data",
                str(workspace / "train.jsonl"),
                "--eval-data",
                str(workspace / "test.jsonl"),
                "--emb",
                str(workspace / "embeddings.txt"),
                "--neighbors",
                str(workspace / "nbrs.jsonl"),
                "--out",
                str(tmp_path / "s.tsv"),
            ]
        )
        assert code == EXIT_CONFIG


class TestOutputDirEnv:
    def test_relative_outputs_resolve_into_env_dir(self, workspace, tmp_path, monkeypatch):
        monkeypatch.setenv("ADVTEXT_OUT_DIR", str(tmp_path))
        assert (
            main(
                [
                    "precompute-neighbors",
                    "--emb",
                    str(workspace / "embeddings.txt"),
                    "--out",
                    "env_cache.jsonl",
                ]
            )
            == EXIT_OK
        )
        assert (tmp_path / "env_cache.jsonl").exists()
