"""Temperature scaling, truncation strategies, and generation."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evadelab.corpus import Document
from evadelab.decoding import (
    GenerationConfig,
    apply_temperature,
    generate,
    sample_index,
    truncate,
    truncate_nucleus,
    truncate_top_k,
    truncate_typical,
)
from evadelab.errors import ConfigError, ZeroTemperature
from evadelab.ngram import train


def distributions(min_size: int = 2, max_size: int = 8):
    return (
        st.lists(
            st.floats(min_value=1e-6, max_value=1.0),
            min_size=min_size,
            max_size=max_size,
        )
        .map(lambda w: np.asarray(w) / np.sum(w))
    )


class TestApplyTemperature:
    def test_identity_at_one(self):
        probs = np.array([0.5, 0.25, 0.25])
        assert np.allclose(apply_temperature(probs, 1.0), probs, atol=1e-12)

    def test_square_root_at_two(self):
        probs = np.array([0.5, 0.25, 0.25])
        root = np.sqrt(probs)
        expected = root / root.sum()
        got = apply_temperature(probs, 2.0)
        assert np.allclose(got, expected, atol=1e-9)
        assert got[0] == pytest.approx(0.41421356, abs=1e-8)
        assert got[1] == pytest.approx(0.29289322, abs=1e-8)

    def test_sharpening_limit(self):
        probs = np.array([0.9, 0.1])
        sharp = apply_temperature(probs, 1e-3)
        assert sharp[0] > 1 - 1e-9

    def test_zero_temperature_rejected(self):
        with pytest.raises(ZeroTemperature):
            apply_temperature(np.array([0.5, 0.5]), 0.0)

    @given(distributions(), st.floats(min_value=0.05, max_value=2.0))
    @settings(max_examples=100, deadline=None)
    def test_argmax_preserved_and_normalized(self, probs, tau):
        scaled = apply_temperature(probs, tau)
        assert scaled.sum() == pytest.approx(1.0, abs=1e-9)
        assert (scaled >= 0).all()
        assert int(np.argmax(scaled)) == int(np.argmax(probs))


class TestTruncateTopK:
    def test_hand_arithmetic(self):
        got = truncate_top_k(np.array([0.5, 0.3, 0.2]), 2)
        assert np.allclose(got, [0.625, 0.375, 0.0], atol=1e-12)

    def test_k_at_least_vocab_is_identity(self):
        probs = np.array([0.5, 0.3, 0.2])
        assert np.allclose(truncate_top_k(probs, 3), probs)
        assert np.allclose(truncate_top_k(probs, 10), probs)

    def test_tie_at_boundary_keeps_lower_index(self):
        got = truncate_top_k(np.array([0.4, 0.3, 0.3]), 2)
        assert got[1] > 0
        assert got[2] == 0.0

    def test_k_one_is_greedy_support(self):
        got = truncate_top_k(np.array([0.2, 0.5, 0.3]), 1)
        assert np.allclose(got, [0.0, 1.0, 0.0])


class TestTruncateNucleus:
    def test_hand_arithmetic(self):
        got = truncate_nucleus(np.array([0.5, 0.3, 0.2]), 0.7)
        assert np.allclose(got, [0.625, 0.375, 0.0], atol=1e-12)

    def test_mass_one_is_identity(self):
        probs = np.array([0.5, 0.3, 0.2])
        assert np.allclose(truncate_nucleus(probs, 1.0), probs)

    def test_tiny_mass_is_greedy(self):
        got = truncate_nucleus(np.array([0.2, 0.5, 0.3]), 0.1)
        assert np.allclose(got, [0.0, 1.0, 0.0])

    def test_support_is_minimal(self):
        probs = np.array([0.4, 0.3, 0.2, 0.1])
        p = 0.65
        got = truncate_nucleus(probs, p)
        kept = np.flatnonzero(got)
        kept_mass = probs[kept].sum()
        assert kept_mass >= p - 1e-12
        smallest = kept[np.argmin(probs[kept])]
        assert kept_mass - probs[smallest] < p


class TestTruncateTypical:
    def test_formal_rule_on_tied_distances(self):
        got = truncate_typical(np.array([0.5, 0.25, 0.25]), 0.5)
        assert np.allclose(got, [1.0, 0.0, 0.0])

    def test_uniform_keeps_index_prefix(self):
        got = truncate_typical(np.full(4, 0.25), 0.5)
        assert np.allclose(got, [0.5, 0.5, 0.0, 0.0])

    def test_mass_one_is_identity(self):
        probs = np.array([0.5, 0.3, 0.2])
        assert np.allclose(truncate_typical(probs, 1.0), probs)

    def test_matches_hand_ranking(self):
        probs = np.array([0.6, 0.25, 0.1, 0.05])
        entropy = -(probs * np.log(probs)).sum()
        distance = np.abs(-np.log(probs) - entropy)
        order = np.argsort(np.round(distance, 12), kind="stable")
        kept = []
        mass = 0.0
        for idx in order:
            kept.append(idx)
            mass += probs[idx]
            if mass >= 0.5 - 1e-12:
                break
        expected = np.zeros_like(probs)
        expected[kept] = probs[kept] / probs[kept].sum()
        assert np.allclose(truncate_typical(probs, 0.5), expected, atol=1e-12)


class TestTruncationProperties:
    @given(distributions(), st.integers(min_value=1, max_value=8))
    @settings(max_examples=100, deadline=None)
    def test_top_k_postconditions(self, probs, k):
        got = truncate_top_k(probs, k)
        assert got.sum() == pytest.approx(1.0, abs=1e-9)
        assert (got >= 0).all()
        assert np.count_nonzero(got) == min(k, len(probs))

    @given(distributions(), st.floats(min_value=0.05, max_value=1.0))
    @settings(max_examples=100, deadline=None)
    def test_nucleus_postconditions(self, probs, p):
        got = truncate_nucleus(probs, p)
        assert got.sum() == pytest.approx(1.0, abs=1e-9)
        kept = np.flatnonzero(got)
        assert probs[kept].sum() >= min(p, probs.sum()) - 1e-9

    @given(distributions(), st.floats(min_value=0.05, max_value=1.0))
    @settings(max_examples=100, deadline=None)
    def test_typical_postconditions(self, probs, mass):
        got = truncate_typical(probs, mass)
        assert got.sum() == pytest.approx(1.0, abs=1e-9)
        kept = np.flatnonzero(got)
        assert probs[kept].sum() >= mass - 1e-9


class TestSampleIndex:
    def test_inverse_cdf_against_frequency(self, rng):
        probs = np.array([0.2, 0.5, 0.3])
        n = 100_000
        draws = np.array([sample_index(probs, rng) for _ in range(n)])
        for i, p in enumerate(probs):
            freq = (draws == i).mean()
            sigma = math.sqrt(p * (1 - p) / n)
            assert abs(freq - p) < 3 * sigma + 1e-4


class TestGenerate:
    def test_greedy_deterministic_chain(self, tiny_lm):
        first = generate(tiny_lm, "the", GenerationConfig(strategy="greedy"))
        second = generate(tiny_lm, "the", GenerationConfig(strategy="greedy"))
        assert first == second
        assert first

    def test_same_seed_identical(self, tiny_lm):
        cfg = GenerationConfig(strategy="random", seed=7)
        assert generate(tiny_lm, "the", cfg) == generate(tiny_lm, "the", cfg)

    def test_returns_continuation_only(self, tiny_lm):
        out = generate(tiny_lm, "the cat", GenerationConfig(strategy="greedy"))
        assert not out.startswith("the cat")

    def test_max_tokens_respected(self, tiny_lm):
        cfg = GenerationConfig(strategy="random", max_tokens=3, seed=1)
        out = generate(tiny_lm, "the", cfg)
        assert len(out.split()) <= 3

    def test_stops_at_sentence_end(self):
        model = train([Document(id="0", text="a b .")], order=2, alpha=1e-4)
        out = generate(model, "a", GenerationConfig(strategy="greedy", max_tokens=50))
        assert out == "b ."


class TestConfigValidation:
    def test_unknown_strategy(self):
        with pytest.raises(ConfigError):
            GenerationConfig(strategy="beam")

    def test_temperature_range(self):
        with pytest.raises(ConfigError):
            GenerationConfig(temperature=0.0)
        with pytest.raises(ConfigError):
            GenerationConfig(temperature=2.5)

    def test_truncate_dispatch(self):
        probs = np.array([0.5, 0.3, 0.2])
        cfg = GenerationConfig(strategy="top_k", top_k=2)
        assert np.allclose(truncate(probs, cfg), truncate_top_k(probs, 2))
