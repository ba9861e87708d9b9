"""Command line flows exercised through ``main(argv)``."""

from __future__ import annotations

import json

import numpy as np
import pytest

from evadelab.cli import main
from evadelab.corpus import Document, load_documents, save_documents
from evadelab.decoding import GenerationConfig, generate
from evadelab.ngram import load_model


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A directory with a corpus, a language model, and a detector."""
    root = tmp_path_factory.mktemp("cli")
    assert main([
        "ingest", "--synthesize", "120", "--style", "answers", "--seed", "1",
        "--out", str(root / "docs.jsonl"),
    ]) == 0
    assert main([
        "train-lm", "--docs", str(root / "docs.jsonl"), "--order", "2",
        "--alpha", "0.01", "--out", str(root / "lm.json"),
    ]) == 0
    assert main([
        "ingest", "--synthesize", "100", "--style", "answers", "--seed", "2",
        "--id-prefix", "h", "--out", str(root / "human.jsonl"),
    ]) == 0
    lm = load_model(str(root / "lm.json"))
    gen = GenerationConfig(strategy="random", temperature=0.8, max_tokens=20)
    machine = [
        Document(
            id=f"g-{i}",
            text=generate(lm, "", gen, np.random.default_rng([8, i])),
            label="machine",
        )
        for i in range(60)
    ]
    human = load_documents(str(root / "human.jsonl"))
    save_documents(machine + human[:60], str(root / "labeled.jsonl"))
    assert main([
        "detect", "--train", str(root / "labeled.jsonl"),
        "--model", str(root / "nb.json"),
    ]) == 0
    return root


class TestIngest:
    def test_synthesize_writes_documents(self, tmp_path, capsys):
        out = tmp_path / "docs.jsonl"
        assert main([
            "ingest", "--synthesize", "7", "--style", "tweets",
            "--out", str(out),
        ]) == 0
        assert "wrote 7 documents" in capsys.readouterr().out
        assert len(load_documents(str(out))) == 7

    def test_input_lines_are_filtered(self, tmp_path):
        src = tmp_path / "raw.txt"
        src.write_text("tiny\na line long enough to keep\n", encoding="utf-8")
        out = tmp_path / "docs.jsonl"
        assert main([
            "ingest", "--input", str(src), "--min-chars", "10",
            "--out", str(out),
        ]) == 0
        docs = load_documents(str(out))
        assert [d.text for d in docs] == ["a line long enough to keep"]

    def test_no_source_is_usage_error(self, tmp_path):
        assert main(["ingest", "--out", str(tmp_path / "x.jsonl")]) == 1


class TestGenerate:
    def test_count_lines(self, workdir, capsys):
        assert main([
            "generate", "--model", str(workdir / "lm.json"), "--count", "3",
            "--strategy", "random", "--max-tokens", "8", "--seed", "3",
        ]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3
        assert all(1 <= len(line.split()) <= 8 for line in lines)

    def test_greedy_repeats_one_continuation(self, workdir, capsys):
        assert main([
            "generate", "--model", str(workdir / "lm.json"), "--count", "2",
            "--strategy", "greedy", "--max-tokens", "8",
        ]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == lines[1]


class TestSeedPrecedence:
    ARGS = ["--count", "1", "--strategy", "random", "--max-tokens", "8"]

    def _generate(self, workdir, capsys, extra=()):
        assert main(
            ["generate", "--model", str(workdir / "lm.json"), *self.ARGS, *extra]
        ) == 0
        return capsys.readouterr().out

    def test_env_seed_equals_set_seed(self, workdir, capsys, monkeypatch):
        monkeypatch.setenv("EVADE_SEED", "5")
        from_env = self._generate(workdir, capsys)
        monkeypatch.delenv("EVADE_SEED")
        from_set = self._generate(workdir, capsys, ["--set", "seed=5"])
        assert from_env == from_set

    def test_seed_flag_beats_env(self, workdir, capsys, monkeypatch):
        monkeypatch.setenv("EVADE_SEED", "5")
        with_flag = self._generate(workdir, capsys, ["--seed", "7"])
        monkeypatch.delenv("EVADE_SEED")
        plain_flag = self._generate(workdir, capsys, ["--seed", "7"])
        assert with_flag == plain_flag

    def test_set_beats_config_file(self, workdir, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "generation.max_tokens = 6\ngeneration.strategy = random\nseed = 5\n",
            encoding="utf-8",
        )
        base = ["generate", "--model", str(workdir / "lm.json"), "--count", "1"]
        assert main(base + ["--config", str(cfg)]) == 0
        from_file = capsys.readouterr().out
        assert main(
            base + ["--config", str(cfg), "--set", "generation.max_tokens=3"]
        ) == 0
        overridden = capsys.readouterr().out
        assert len(from_file.split()) <= 6
        assert len(overridden.split()) <= 3
        assert overridden.split() == from_file.split()[:len(overridden.split())]


class TestDetect:
    def test_score_one_text(self, workdir, capsys):
        assert main([
            "detect", "--model", str(workdir / "nb.json"),
            "--text", "the old river crossed the small harbor",
        ]) == 0
        verdict = json.loads(capsys.readouterr().out)
        assert set(verdict) == {"label", "p_machine", "score"}
        assert verdict["label"] in ("human", "machine")

    def test_evaluate_labeled_documents(self, workdir, capsys):
        assert main([
            "detect", "--model", str(workdir / "nb.json"),
            "--docs", str(workdir / "labeled.jsonl"),
        ]) == 0
        metrics = json.loads(capsys.readouterr().out)
        assert set(metrics) == {"accuracy", "precision", "recall", "f1"}
        assert metrics["accuracy"] > 0.5

    def test_zero_shot_needs_long_text(self, workdir):
        assert main([
            "detect", "--zero-shot", "--lm", str(workdir / "lm.json"),
            "--text", "too short",
        ]) == 2

    def test_no_action_is_usage_error(self, workdir):
        assert main(["detect"]) == 1


class TestRewardScore:
    FIELDS = {
        "special_chars", "repetition", "acceptability", "dictionary",
        "emoji_ratio", "emoji_count", "query_repetition", "special_tokens",
        "same_start", "number_start", "unknown_chars", "detector", "combined",
    }

    def test_breakdown_per_text(self, capsys):
        assert main([
            "reward", "score",
            "--text", "the river near the harbor", "--text", "   ",
        ]) == 0
        rows = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert len(rows) == 2
        assert set(rows[0]) == self.FIELDS
        assert rows[1]["detector"] == -1.0
        assert rows[1]["combined"] == -1.0

    def test_batch_file(self, tmp_path, capsys):
        batch = tmp_path / "batch.txt"
        batch.write_text("the river\nthe harbor\n", encoding="utf-8")
        assert main(["reward", "score", "--batch", str(batch)]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 2

    def test_no_texts_is_usage_error(self):
        assert main(["reward", "score"]) == 1


class TestAdapt:
    def test_writes_artifacts(self, workdir, tmp_path, capsys):
        hist = tmp_path / "hist.csv"
        params = tmp_path / "params.json"
        log = tmp_path / "log.jsonl"
        assert main([
            "adapt", "--lm", str(workdir / "lm.json"),
            "--detector", str(workdir / "nb.json"),
            "--set", "loop.iterations=2", "--set", "loop.population_size=4",
            "--set", "loop.batch_size=6", "--set", "loop.bias_dim=16",
            "--set", "generation.max_tokens=8",
            "--set", "generation.strategy=random",
            "--seed", "4",
            "--history", str(hist), "--params", str(params),
            "--train-log", str(log),
        ]) == 0
        assert "adapted for" in capsys.readouterr().out
        header = hist.read_text(encoding="utf-8").splitlines()[0]
        assert header == "iteration,mean_reward,best_reward,detector_f1,kl"
        payload = json.loads(params.read_text(encoding="utf-8"))
        assert set(payload) == {"bias_indices", "token_bias", "tau_offset"}
        assert len(payload["bias_indices"]) == 16
        entries = [json.loads(l) for l in log.read_text().splitlines()]
        assert len(entries) == 2 * 6
        assert set(entries[0]) == {"query", "response", "reward"}


class TestGrid:
    def test_one_cell_csv(self, workdir, tmp_path, capsys):
        out = tmp_path / "grid.csv"
        assert main([
            "grid", "--model", str(workdir / "lm.json"),
            "--human", str(workdir / "human.jsonl"),
            "--set", "grid.temperatures=1.0",
            "--set", "grid.strategies=greedy",
            "--set", "grid.sample_sizes=100",
            "--set", "grid.replications=1",
            "--out", str(out),
        ]) == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == (
            "temperature,strategy,sample_size,accuracy,precision,recall,f1"
        )
        assert len(lines) == 2

    def test_too_few_human_docs(self, workdir, tmp_path):
        assert main([
            "grid", "--model", str(workdir / "lm.json"),
            "--human", str(workdir / "human.jsonl"),
            "--set", "grid.sample_sizes=1000",
            "--out", str(tmp_path / "grid.csv"),
        ]) == 1


class TestParaphrase:
    def test_prints_one_line_per_text(self, workdir, capsys):
        text = (
            "the old painter near the harbor carefully watched the narrow "
            "bridge beside the quiet village ."
        )
        assert main([
            "paraphrase", "--lm", str(workdir / "lm.json"),
            "--reference", str(workdir / "human.jsonl"),
            "--text", text, "--seed", "3",
        ]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1
        assert lines[0]


class TestExitCodes:
    def test_missing_file_is_data_error(self):
        assert main(["generate", "--model", "missing.json"]) == 2

    def test_unknown_command_is_usage_error(self, capsys):
        assert main(["nonsense"]) == 1
        capsys.readouterr()

    def test_bad_set_value_is_usage_error(self, workdir):
        assert main([
            "generate", "--model", str(workdir / "lm.json"), "--set", "bogus",
        ]) == 1

    def test_unknown_config_key_is_usage_error(self, workdir, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("decoder.warmth = 1\n", encoding="utf-8")
        assert main([
            "generate", "--model", str(workdir / "lm.json"),
            "--config", str(cfg),
        ]) == 1

    def test_help_exits_clean(self, capsys):
        assert main(["--help"]) == 0
        assert "ingest" in capsys.readouterr().out
