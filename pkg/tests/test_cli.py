"""CLI exit codes, pipeline smoke tests, config layering, and determinism."""

from __future__ import annotations

import json

import pytest

from tinysparse.cli import build_parser, main
from tinysparse.distill.training import read_training_log
from tinysparse.evaluation import read_run
from tinysparse.toydata import generate_toy_fixture

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def write_fixture_files(tmp_path, n_pairs=6):
    """Token docs, pairs, queries, and qrels for a small end-to-end run."""
    fixture = generate_toy_fixture(seed=0)
    docs_path = tmp_path / "docs.jsonl"
    with open(docs_path, "w") as fh:
        for doc_id, tokens in fixture.docs:
            fh.write(json.dumps({"id": doc_id, "tokens": list(tokens)}) + "\n")
    pairs_path = tmp_path / "pairs.jsonl"
    with open(pairs_path, "w") as fh:
        for pair in fixture.pairs[:n_pairs]:
            fh.write(
                json.dumps(
                    {
                        "query_id": pair.query_id,
                        "query_tokens": list(pair.query_tokens),
                        "positive_id": pair.positive_id,
                    }
                )
                + "\n"
            )
    queries_path = tmp_path / "queries.jsonl"
    with open(queries_path, "w") as fh:
        for pair in fixture.pairs[:n_pairs]:
            fh.write(json.dumps({"id": pair.query_id, "tokens": list(pair.query_tokens)}) + "\n")
    qrels_path = tmp_path / "qrels.txt"
    with open(qrels_path, "w") as fh:
        for pair in fixture.pairs[:n_pairs]:
            fh.write(f"{pair.query_id} 0 {pair.positive_id} 1\n")
    vectors_path = tmp_path / "vectors.jsonl"
    with open(vectors_path, "w") as fh:
        for doc_id, tokens in fixture.docs:
            weights: dict[str, float] = {}
            for token in tokens:
                weights[token] = weights.get(token, 0.0) + 1.0
            fh.write(json.dumps({"id": doc_id, "vector": weights}) + "\n")
    return docs_path, pairs_path, queries_path, qrels_path, vectors_path


class TestParserBasics:
    def test_version_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "tinysparse" in capsys.readouterr().out

    @pytest.mark.parametrize(
        "command",
        ["idf", "index", "stats", "search", "train", "encode", "mine",
         "filter", "eval", "bench", "sweep", "demo"],
    )
    def test_every_subcommand_has_help(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "--config" in out

    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_missing_required_flag_is_usage_error(self, capsys):
        assert main(["stats"]) == 1

    def test_parser_builds_without_duplicate_flags(self):
        build_parser()


class TestIdfCommand:
    def test_docs_and_vectors_mutually_exclusive(self, tmp_path, capsys):
        docs, _, _, _, vectors = write_fixture_files(tmp_path)
        out = tmp_path / "idf.json"
        code = main(["idf", "--docs", str(docs), "--vectors", str(vectors), "--out", str(out)])
        assert code == 1
        assert main(["idf", "--out", str(out)]) == 1

    def test_from_docs(self, tmp_path, capsys):
        docs, _, _, _, _ = write_fixture_files(tmp_path)
        out = tmp_path / "idf.json"
        assert main(["idf", "--docs", str(docs), "--out", str(out)]) == 0
        obj = json.loads(out.read_text())
        assert set(obj) == {"source", "default", "values"}
        meta = json.loads((tmp_path / "idf.json.meta.json").read_text())
        assert meta["command"] == "idf"

    def test_corpus_alias(self, tmp_path):
        docs, _, _, _, _ = write_fixture_files(tmp_path)
        out = tmp_path / "idf.json"
        assert main(["idf", "--corpus", str(docs), "--out", str(out)]) == 0

    def test_missing_file_is_data_error(self, tmp_path, capsys):
        code = main(["idf", "--docs", str(tmp_path / "ghost.jsonl"), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "data error" in capsys.readouterr().err


class TestIndexSearchEval:
    def test_pipeline(self, tmp_path, capsys):
        docs, pairs, queries, qrels, vectors = write_fixture_files(tmp_path)
        index_path = tmp_path / "index.bin"
        assert main(["index", "--vectors", str(vectors), "--out", str(index_path)]) == 0
        capsys.readouterr()

        assert main(["stats", "--index", str(index_path)]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["corpus_size"] == 40

        run_path = tmp_path / "run.trec"
        code = main(
            ["search", "--index", str(index_path), "--queries", str(queries),
             "--out", str(run_path), "--k", "5"]
        )
        assert code == 0
        run = read_run(run_path)
        assert len(run) == 6
        assert all(len(hits) <= 5 for hits in run.values())

        metrics_path = tmp_path / "metrics.json"
        code = main(
            ["eval", "--run", str(run_path), "--qrels", str(qrels),
             "--k", "5", "--out", str(metrics_path)]
        )
        assert code == 0
        payload = json.loads(metrics_path.read_text())
        assert "ndcg@5" in payload["metrics"]
        assert "mrr@5" in payload["metrics"]
        assert "recall@5" in payload["metrics"]
        assert payload["config"]["k"] == 5

    def test_index_stats_flag(self, tmp_path, capsys):
        *_, vectors = write_fixture_files(tmp_path)
        index_path = tmp_path / "index.bin"
        assert main(["index", "--vectors", str(vectors), "--out", str(index_path), "--stats"]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["corpus_size"] == 40

    def test_stats_on_garbage_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"not an index at all")
        assert main(["stats", "--index", str(bad)]) == 2

    def test_two_phase_needs_window(self, tmp_path, capsys):
        _, _, queries, _, vectors = write_fixture_files(tmp_path)
        index_path = tmp_path / "index.bin"
        main(["index", "--vectors", str(vectors), "--out", str(index_path)])
        code = main(
            ["search", "--index", str(index_path), "--queries", str(queries),
             "--out", str(tmp_path / "r"), "--two-phase"]
        )
        assert code == 1

    def test_two_phase_search_runs(self, tmp_path):
        _, _, queries, _, vectors = write_fixture_files(tmp_path)
        index_path = tmp_path / "index.bin"
        main(["index", "--vectors", str(vectors), "--out", str(index_path)])
        run_path = tmp_path / "run.trec"
        code = main(
            ["search", "--index", str(index_path), "--queries", str(queries),
             "--out", str(run_path), "--k", "3", "--two-phase", "--window", "10"]
        )
        assert code == 0
        meta = json.loads((tmp_path / "run.trec.meta.json").read_text())
        assert meta["config"]["two_phase"] is True
        assert meta["config"]["window"] == 10

    def test_malformed_qrels_is_data_error(self, tmp_path, capsys):
        docs, pairs, queries, qrels, vectors = write_fixture_files(tmp_path)
        index_path = tmp_path / "index.bin"
        main(["index", "--vectors", str(vectors), "--out", str(index_path)])
        run_path = tmp_path / "run.trec"
        main(["search", "--index", str(index_path), "--queries", str(queries),
              "--out", str(run_path)])
        bad_qrels = tmp_path / "bad_qrels.txt"
        bad_qrels.write_text("q000 0 d001\n")
        assert main(["eval", "--run", str(run_path), "--qrels", str(bad_qrels)]) == 2


class TestTrainCommand:
    def train_args(self, tmp_path, out_name="enc.bin", extra=()):
        docs, pairs, *_ = write_fixture_files(tmp_path)
        out = tmp_path / out_name
        return [
            "train", "--docs", str(docs), "--pairs", str(pairs),
            "--out", str(out), "--steps", "3", "--batch-size", "3",
            "--negatives", "4", "--seed", "11",
            *extra,
        ], out

    def test_train_writes_encoder_log_and_sidecars(self, tmp_path):
        args, out = self.train_args(tmp_path)
        assert main(args) == 0
        assert out.exists()
        log = read_training_log(f"{out}.log.csv")
        assert [row.step for row in log] == [0, 1, 2]
        meta = json.loads((tmp_path / "enc.bin.meta.json").read_text())
        assert meta["config"]["seed"] == 11
        assert meta["config"]["lambda_d"] == 1e-7  # pretrain preset default

    def test_same_invocation_is_byte_identical(self, tmp_path):
        args_a, out_a = self.train_args(tmp_path, "enc_a.bin")
        assert main(args_a) == 0
        args_b, out_b = self.train_args(tmp_path, "enc_b.bin")
        assert main(args_b) == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        assert (tmp_path / "enc_a.bin.log.csv").read_bytes() == (
            tmp_path / "enc_b.bin.log.csv"
        ).read_bytes()

    def test_flag_overrides_config_file(self, tmp_path):
        config_path = tmp_path / "t.toml"
        config_path.write_text(
            "[train]\nseed = 3\nsteps = 2\nlambda_d = 0.5\n"
        )
        args, out = self.train_args(
            tmp_path, extra=["--config", str(config_path), "--lambda-d", "0.25"]
        )
        # --seed 11 and --steps 3 come from train_args and beat the file;
        # --lambda-d 0.25 beats the file's 0.5.
        assert main(args) == 0
        meta = json.loads((tmp_path / "enc.bin.meta.json").read_text())
        assert meta["config"]["seed"] == 11
        assert meta["config"]["steps"] == 3
        assert meta["config"]["lambda_d"] == 0.25

    def test_config_file_beats_defaults(self, tmp_path):
        config_path = tmp_path / "t.toml"
        config_path.write_text("[train]\nsteps = 2\nscale_s = 25.0\n")
        docs, pairs, *_ = write_fixture_files(tmp_path)
        out = tmp_path / "enc.bin"
        code = main(
            ["train", "--docs", str(docs), "--pairs", str(pairs),
             "--out", str(out), "--config", str(config_path)]
        )
        assert code == 0
        meta = json.loads((tmp_path / "enc.bin.meta.json").read_text())
        assert meta["config"]["steps"] == 2
        assert meta["config"]["scale_s"] == 25.0

    def test_bad_preset_is_usage_error(self, tmp_path):
        args, _ = self.train_args(tmp_path, extra=["--preset", "warmup"])
        assert main(args) == 1

    def test_figure_written(self, tmp_path):
        figure = tmp_path / "train.png"
        args, _ = self.train_args(tmp_path, extra=["--figure", str(figure)])
        assert main(args) == 0
        assert figure.read_bytes()[:8] == PNG_MAGIC

    def test_ensemble_add_changes_training(self, tmp_path):
        args_norm, out_norm = self.train_args(tmp_path, "enc_norm.bin")
        args_add, out_add = self.train_args(
            tmp_path, "enc_add.bin", extra=["--ensemble", "add"]
        )
        assert main(args_norm) == 0
        assert main(args_add) == 0
        assert out_norm.read_bytes() != out_add.read_bytes()


class TestEncodeMineFilter:
    def test_encode_round(self, tmp_path):
        args = TestTrainCommand().train_args(tmp_path)[0]
        assert main(args) == 0
        docs = tmp_path / "docs.jsonl"
        out = tmp_path / "encoded.jsonl"
        code = main(
            ["encode", "--docs", str(docs), "--encoder", str(tmp_path / "enc.bin"),
             "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 40
        first = json.loads(lines[0])
        assert set(first) == {"id", "vector"}

    def test_mine_then_filter(self, tmp_path):
        docs, pairs, queries, qrels, vectors = write_fixture_files(tmp_path)
        index_path = tmp_path / "index.bin"
        main(["index", "--vectors", str(vectors), "--out", str(index_path)])
        mined_path = tmp_path / "mined.jsonl"
        code = main(
            ["mine", "--index", str(index_path), "--pairs", str(pairs),
             "--m", "6", "--out", str(mined_path)]
        )
        assert code == 0
        rows = [json.loads(line) for line in mined_path.read_text().splitlines()]
        assert len(rows) == 6
        assert all(len(r["doc_ids"]) <= 6 for r in rows)

        kept_path = tmp_path / "kept.jsonl"
        assert main(["filter", "--mined", str(mined_path), "--k", "3",
                     "--out", str(kept_path)]) == 0
        kept = [json.loads(line) for line in kept_path.read_text().splitlines()]
        assert all(r["positive_rank"] <= 3 for r in kept)


class TestBenchCommand:
    def test_bench_json_and_figure(self, tmp_path):
        _, _, queries, _, vectors = write_fixture_files(tmp_path)
        index_path = tmp_path / "index.bin"
        main(["index", "--vectors", str(vectors), "--out", str(index_path)])
        out = tmp_path / "bench.json"
        figure = tmp_path / "bench.png"
        code = main(
            ["bench", "--index", str(index_path), "--queries", str(queries),
             "--levels", "1,2", "--repetitions", "10",
             "--out", str(out), "--figure", str(figure)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert [r["concurrency"] for r in payload["rows"]] == [1, 2]
        assert payload["config"]["repetitions"] == 10
        assert figure.read_bytes()[:8] == PNG_MAGIC


class TestSweepCommand:
    def test_sweep_outputs(self, tmp_path):
        docs, pairs, *_ = write_fixture_files(tmp_path)
        out_dir = tmp_path / "sweep"
        code = main(
            ["sweep", "--docs", str(docs), "--pairs", str(pairs),
             "--lambdas", "0,0.01", "--steps", "2", "--batch-size", "3",
             "--out-dir", str(out_dir)]
        )
        assert code == 0
        header = (out_dir / "sweep.csv").read_text().splitlines()[0]
        assert header == "lambda_d,idf_aware,mean_nnz,flops_value,final_loss,ndcg"
        payload = json.loads((out_dir / "sweep.json").read_text())
        assert len(payload["rows"]) == 4  # 2 lambdas x idf on/off
        assert (out_dir / "sweep.png").read_bytes()[:8] == PNG_MAGIC


class TestDemoCommand:
    def test_demo_produces_artifacts(self, tmp_path):
        out_dir = tmp_path / "demo"
        assert main(["demo", "--out-dir", str(out_dir), "--steps", "4"]) == 0
        for name in (
            "docs.jsonl", "pairs.jsonl", "queries.jsonl", "qrels.txt",
            "idf.json", "idf_flat.json", "summary.txt", "sweep.png",
            "run_two_phase.txt",
        ):
            assert (out_dir / name).exists(), name
        for variant in ("idf_aware", "uniform", "ensemble_add"):
            assert (out_dir / f"encoder_{variant}.bin").exists()
            assert (out_dir / f"index_{variant}.bin").exists()
        summary = (out_dir / "summary.txt").read_text()
        assert "ndcg@10" in summary
