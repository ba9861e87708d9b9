"""Biased generator, rollout/evaluate/divergence, and the search loop."""

from __future__ import annotations

import math

import numpy as np
import pytest

from evadelab.corpus import Document, tokenize
from evadelab.decoding import GenerationConfig, generate
from evadelab.demo_corpus import make_docs, word_dictionary
from evadelab.errors import ConfigError
from evadelab.ngram import train
from evadelab.optimizer import (
    GeneratorParams,
    LoopConfig,
    adapt,
    divergence,
    evaluate,
    rollout,
    zero_params,
)
from evadelab.rewards import RewardConfig, RewardEngine
from evadelab.shallow import evaluate as nb_evaluate
from evadelab.shallow import predict, train_nb

GEN = GenerationConfig(strategy="random", temperature=0.8, max_tokens=10)


@pytest.fixture(scope="module")
def base_lm():
    return train(make_docs(400, "answers", seed=1), order=2, alpha=0.01)


@pytest.fixture(scope="module")
def engine():
    return RewardEngine(RewardConfig(), word_dictionary())


@pytest.fixture(scope="module")
def prompts(base_lm):
    return [d.text.split()[0] for d in make_docs(5, "answers", seed=1)]


class TestBiasedModel:
    def test_bias_reweights_distribution(self, base_lm):
        idx = base_lm.vocab.index("river")
        params = GeneratorParams(base_lm, np.array([idx]), np.array([1.5]))
        context = base_lm.vocab.encode(["the"])
        p = base_lm.next_distribution_ids(context)
        want = p.copy()
        want[idx] *= math.exp(1.5)
        want /= want.sum()
        got = params.model().next_distribution_ids(context)
        assert np.allclose(got, want, atol=1e-12)
        assert got.sum() == pytest.approx(1.0, abs=1e-12)

    def test_tau_offset_merges_and_clamps(self, base_lm):
        params = GeneratorParams(base_lm, np.array([3]), np.array([0.0]), tau_offset=0.4)
        merged = params.generation_config(GEN)
        assert merged.temperature == pytest.approx(1.2)
        assert merged.strategy == GEN.strategy
        low = GeneratorParams(base_lm, np.array([3]), np.array([0.0]), tau_offset=-5.0)
        assert low.generation_config(GEN).temperature == 0.05

    def test_zero_params_covers_frequent_tokens(self, base_lm):
        cfg = LoopConfig(bias_dim=16)
        params = zero_params(base_lm, cfg)
        assert params.token_bias.shape == (16,)
        assert np.all(params.token_bias == 0.0)
        assert list(params.bias_indices) == base_lm.vocab.frequent_indices(16)


class TestRollout:
    def test_zero_params_match_base_generation(self, base_lm, prompts):
        params = zero_params(base_lm, LoopConfig(bias_dim=16))
        got = rollout(params, prompts, GEN, seed=9)
        want = [
            generate(base_lm, p, GEN, rng=np.random.default_rng([9, i]))
            for i, p in enumerate(prompts)
        ]
        assert got == want

    def test_deterministic_per_seed(self, base_lm, prompts):
        params = zero_params(base_lm, LoopConfig(bias_dim=16))
        assert rollout(params, prompts, GEN, seed=4) == rollout(
            params, prompts, GEN, seed=4
        )
        assert rollout(params, prompts, GEN, seed=4) != rollout(
            params, prompts, GEN, seed=5
        )

    def test_capped_bias_raises_token_frequency(self, base_lm):
        idx = base_lm.vocab.index("river")
        biased = GeneratorParams(base_lm, np.array([idx]), np.array([3.0]))
        neutral = zero_params(base_lm, LoopConfig(bias_dim=16))
        base_texts = rollout(neutral, [""] * 1000, GEN, seed=5)
        bias_texts = rollout(biased, [""] * 1000, GEN, seed=5)
        count = lambda texts: sum(t.split().count("river") for t in texts)
        assert count(bias_texts) > count(base_texts)

    def test_empty_prompt_list(self, base_lm):
        params = zero_params(base_lm, LoopConfig(bias_dim=16))
        assert rollout(params, [], GEN, seed=0) == []


class TestEvaluate:
    def test_violating_text_gets_its_penalty(self, engine):
        words = "the river small harbor near this old"
        violator = words + " " + "!" * (len(words) + 1)
        got = evaluate([violator, "some small old river"], ["", ""], engine)
        assert got[0] == pytest.approx(-1 / 3, abs=1e-9)

    def test_clean_text_scores_detector_evasion(self, engine):
        got = evaluate(
            ["the river near this harbor", "some small old river"],
            ["", ""],
            engine,
            detector=lambda ts: [0.1] * len(ts),
        )
        assert got == [pytest.approx(0.8, abs=1e-9)] * 2

    def test_identical_batch_hits_same_start_rule(self, engine):
        texts = ["the same reply"] * 4
        got = evaluate(texts, [""] * 4, engine)
        assert got == [-1.0] * 4

    def test_detector_override_wins(self):
        base_engine = RewardEngine(
            RewardConfig(), word_dictionary(), detect=lambda ts: [0.0] * len(ts)
        )
        got = evaluate(
            ["the river near this harbor"],
            [""],
            base_engine,
            detector=lambda ts: [0.5] * len(ts),
        )
        assert got == [0.0]

    def test_misaligned_lengths_rejected(self, engine):
        with pytest.raises(ConfigError):
            evaluate(["a"], ["p", "q"], engine)


class TestDivergence:
    def test_zero_params_give_zero(self, base_lm):
        params = zero_params(base_lm, LoopConfig(bias_dim=16))
        assert divergence(params, base_lm, [["the"], []]) == 0.0

    def test_non_negative_for_random_biases(self, base_lm):
        rng = np.random.default_rng(1)
        indices = np.asarray(base_lm.vocab.frequent_indices(16))
        for _ in range(20):
            params = GeneratorParams(
                base_lm, indices, rng.normal(scale=1.5, size=16)
            )
            assert divergence(params, base_lm, [["the"], ["some"]]) >= 0.0

    def test_single_token_bias_closed_form(self, base_lm):
        idx = base_lm.vocab.index("river")
        bias = 1.5
        params = GeneratorParams(base_lm, np.array([idx]), np.array([bias]))
        context_ids = base_lm.vocab.encode(["the"])
        p = float(base_lm.next_distribution_ids(context_ids)[idx])
        z = 1 + p * (math.exp(bias) - 1)
        want = (p * math.exp(bias) / z) * bias - math.log(z)
        got = divergence(params, base_lm, [["the"]])
        assert got == pytest.approx(want, abs=1e-12)

    def test_empty_probe_list_rejected(self, base_lm):
        params = zero_params(base_lm, LoopConfig(bias_dim=16))
        with pytest.raises(ConfigError):
            divergence(params, base_lm, [])


class TestLoopConfig:
    def test_population_floor(self):
        with pytest.raises(ConfigError):
            LoopConfig(population_size=1)

    def test_elite_fraction_range(self):
        with pytest.raises(ConfigError):
            LoopConfig(elite_fraction=0.6)

    def test_kl_weight_non_negative(self):
        with pytest.raises(ConfigError):
            LoopConfig(kl_weight=-0.1)


class TestAdapt:
    def test_overwhelming_kl_weight_zeroes_bias(self, base_lm, engine, prompts):
        cfg = LoopConfig(
            iterations=60,
            population_size=32,
            batch_size=4,
            seed=3,
            kl_weight=1e12,
            bias_dim=2,
            plateau_window=60,
        )
        res = adapt(
            base_lm, lambda ts: [0.5] * len(ts), engine, cfg, gen_cfg=GEN, prompts=prompts
        )
        assert float(np.linalg.norm(res.params.token_bias)) <= 1e-2

    def test_deterministic_history(self, base_lm, engine, prompts):
        cfg = LoopConfig(
            iterations=3, population_size=4, batch_size=4, seed=11, bias_dim=8
        )
        detector = lambda ts: [0.5] * len(ts)
        f1_eval = lambda params: 0.0
        a = adapt(
            base_lm, detector, engine, cfg,
            gen_cfg=GEN, prompts=prompts, f1_eval=f1_eval,
        )
        b = adapt(
            base_lm, detector, engine, cfg,
            gen_cfg=GEN, prompts=prompts, f1_eval=f1_eval,
        )
        assert a.history == b.history
        assert np.array_equal(a.params.token_bias, b.params.token_bias)
        assert a.params.tau_offset == b.params.tau_offset
        assert a.train_log == b.train_log

    def test_best_reward_envelope_non_decreasing(self, base_lm, engine, prompts):
        cfg = LoopConfig(
            iterations=4, population_size=4, batch_size=4, seed=11, bias_dim=8
        )
        res = adapt(
            base_lm, lambda ts: [0.5] * len(ts), engine, cfg, gen_cfg=GEN, prompts=prompts
        )
        envelope = np.maximum.accumulate([h.best_reward for h in res.history])
        assert np.all(np.diff(envelope) >= 0)
        assert [h.iteration for h in res.history] == list(range(len(res.history)))
        assert all(h.kl >= 0 for h in res.history)

    def test_train_log_mirrors_best_member(self, base_lm, engine, prompts):
        cfg = LoopConfig(
            iterations=2, population_size=4, batch_size=3, seed=11, bias_dim=8
        )
        res = adapt(
            base_lm, lambda ts: [0.5] * len(ts), engine, cfg, gen_cfg=GEN, prompts=prompts
        )
        assert len(res.train_log) == 2 * 3
        assert all(set(row) == {"query", "response", "reward"} for row in res.train_log)


class TestAdaptVersusDetector:
    def test_detector_f1_drops_on_toy_run(self):
        docs = make_docs(2000, "answers", seed=1)
        lm = train(docs, order=3, alpha=1e-4)
        human = make_docs(600, "answers", seed=2)
        gen_cfg = GenerationConfig(strategy="random", temperature=0.45, max_tokens=12)
        prompts = []
        for i, doc in enumerate(make_docs(120, "answers", seed=7)):
            tokens = tokenize(doc.text)
            k = 4 + i % 8
            if len(tokens) > k + 2:
                prompts.append(" ".join(tokens[:k]))

        neutral = zero_params(lm, LoopConfig(bias_dim=128))
        batch = [prompts[i % len(prompts)] for i in range(600)]
        continuations = rollout(neutral, batch, gen_cfg, seed=21)
        machine = [
            Document(id=f"m{i}", text=f"{p} {c}", label="machine")
            for i, (p, c) in enumerate(zip(batch, continuations))
        ]
        nb = train_nb(machine[:300] + human[:300], alpha=1.0)
        pre = nb_evaluate(nb, machine[300:] + human[300:600])
        assert pre.f1 > 0.8

        def detector(texts):
            return [predict(nb, t).p_machine for t in texts]

        def f1_eval(params):
            eval_batch = [prompts[i % len(prompts)] for i in range(200)]
            eval_texts = rollout(params, eval_batch, gen_cfg, seed=77)
            eval_docs = [
                Document(id=f"e{i}", text=f"{p} {c}", label="machine")
                for i, (p, c) in enumerate(zip(eval_batch, eval_texts))
            ]
            return nb_evaluate(nb, eval_docs + human[:200]).f1

        reward_engine = RewardEngine(
            RewardConfig(), word_dictionary(), detect=detector
        )
        cfg = LoopConfig(
            iterations=15,
            population_size=16,
            batch_size=32,
            seed=5,
            kl_weight=0.02,
            bias_dim=128,
            plateau_window=15,
        )
        res = adapt(
            lm, detector, reward_engine, cfg,
            gen_cfg=gen_cfg, prompts=prompts, f1_eval=f1_eval,
        )
        assert res.history[-1].detector_f1 < res.history[0].detector_f1
        assert res.history[-1].detector_f1 < pre.f1
