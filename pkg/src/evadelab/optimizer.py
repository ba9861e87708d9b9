"""Derivative-free adaptation of a biased generator against a detector.

The generator is parameterized by an additive log-space bias over the
most frequent vocabulary tokens plus a temperature offset. A
cross-entropy-method loop samples parameter populations around a running
mean, scores each member by mean constrained reward minus a
KL-divergence penalty toward the unbiased base model, and refits the
proposal on the elite slice. The three stages per member are: roll out
text for a prompt batch, evaluate it with the reward engine, and
aggregate fitness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decoding import GenerationConfig, generate
from .errors import ConfigError
from .ngram import NgramModel
from .rewards import RewardEngine

# Effective temperature is kept inside the range generation accepts.
_TAU_MIN = 0.05
_TAU_MAX = 2.0


@dataclass
class LoopConfig:
    iterations: int = 50
    population_size: int = 32
    elite_fraction: float = 0.25
    batch_size: int = 8
    kl_weight: float = 0.1
    seed: int = 0
    bias_cap: float = 3.0
    bias_dim: int = 512
    init_bias_scale: float = 0.5
    init_tau_scale: float = 0.1
    scale_decay: float = 0.95
    plateau_delta: float = 1e-4
    plateau_window: int = 5

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ConfigError("population_size must be at least 2")
        if not 0 < self.elite_fraction <= 0.5:
            raise ConfigError("elite_fraction must be in (0, 0.5]")
        if self.kl_weight < 0:
            raise ConfigError("kl_weight must be non-negative")
        if self.iterations < 1 or self.batch_size < 1 or self.bias_dim < 1:
            raise ConfigError("iterations, batch_size, bias_dim must be positive")


class BiasedNgramModel:
    """Base model with p'(t|ctx) ∝ p(t|ctx)·exp(bias_t) on biased ids."""

    def __init__(self, base: NgramModel, bias_indices: np.ndarray, token_bias: np.ndarray):
        self.base = base
        self.vocab = base.vocab
        self.order = base.order
        self.bias_indices = bias_indices
        self.bias_weights = np.exp(token_bias)

    def next_distribution_ids(self, context: list[int]) -> np.ndarray:
        probs = self.base.next_distribution_ids(context)
        probs[self.bias_indices] *= self.bias_weights
        return probs / probs.sum()


@dataclass
class GeneratorParams:
    base: NgramModel
    bias_indices: np.ndarray
    token_bias: np.ndarray
    tau_offset: float = 0.0

    def model(self) -> BiasedNgramModel:
        return BiasedNgramModel(self.base, self.bias_indices, self.token_bias)

    def generation_config(self, gen_cfg: GenerationConfig) -> GenerationConfig:
        tau = min(max(gen_cfg.temperature + self.tau_offset, _TAU_MIN), _TAU_MAX)
        merged = GenerationConfig(**gen_cfg.__dict__)
        merged.temperature = tau
        return merged


def zero_params(base: NgramModel, cfg: LoopConfig) -> GeneratorParams:
    indices = np.asarray(base.vocab.frequent_indices(cfg.bias_dim), dtype=np.int64)
    return GeneratorParams(base, indices, np.zeros(indices.size))


def rollout(
    params: GeneratorParams,
    prompts: list[str],
    gen_cfg: GenerationConfig,
    seed: int = 0,
) -> list[str]:
    """One completion per prompt from the biased model; prompt i uses an
    rng derived from (seed, i), so batches parallelize deterministically."""
    model = params.model()
    cfg = params.generation_config(gen_cfg)
    texts = []
    for i, prompt in enumerate(prompts):
        rng = np.random.default_rng([seed, i])
        texts.append(generate(model, prompt, cfg, rng=rng))
    return texts


def evaluate(
    texts: list[str],
    prompts: list[str],
    engine: RewardEngine,
    detector=None,
) -> list[float]:
    """Combined reward per text, batch rules over the whole rollout.

    ``detector`` (batch text → P(machine)) overrides the engine's bound
    detector when given.
    """
    if len(texts) != len(prompts):
        raise ConfigError("texts and prompts must align")
    if detector is not None:
        engine = RewardEngine(
            engine.cfg,
            engine.dictionary,
            coherence=engine.coherence,
            detect=detector,
            detector_mode=engine.detector_mode,
        )
    rows = engine.score_batch(texts, queries=prompts)
    return [row.combined for row in rows]


def divergence(
    params: GeneratorParams, base: NgramModel, probe_contexts: list[list[str]]
) -> float:
    """Mean KL(biased ‖ base) over probe contexts, in nats."""
    if not probe_contexts:
        raise ConfigError("need at least one probe context")
    model = params.model()
    total = 0.0
    for context in probe_contexts:
        ids = base.vocab.encode(context)
        p = model.next_distribution_ids(ids)
        q = base.next_distribution_ids(ids)
        total += float(np.sum(p * (np.log(p) - np.log(q))))
    return total / len(probe_contexts)


@dataclass
class HistoryRow:
    iteration: int
    mean_reward: float
    best_reward: float
    detector_f1: float
    kl: float


@dataclass
class AdaptResult:
    params: GeneratorParams
    history: list[HistoryRow]
    train_log: list[dict] = field(default_factory=list)


def _sample_member(
    mean: np.ndarray, scale: np.ndarray, rng: np.random.Generator, cfg: LoopConfig
) -> np.ndarray:
    theta = mean + scale * rng.standard_normal(mean.size)
    theta[:-1] = np.clip(theta[:-1], -cfg.bias_cap, cfg.bias_cap)
    theta[-1] = np.clip(theta[-1], _TAU_MIN - 1.0, _TAU_MAX - 1.0)
    return theta


def _params_from_theta(
    theta: np.ndarray, base: NgramModel, indices: np.ndarray
) -> GeneratorParams:
    return GeneratorParams(base, indices, theta[:-1].copy(), float(theta[-1]))


def adapt(
    base: NgramModel,
    detector,
    engine: RewardEngine,
    cfg: LoopConfig,
    gen_cfg: GenerationConfig | None = None,
    prompts: list[str] | None = None,
    probe_contexts: list[list[str]] | None = None,
    f1_eval=None,
) -> AdaptResult:
    """Cross-entropy-method search for detector-evading parameters.

    Per iteration: draw a population around the mean, roll out a prompt
    batch per member, score fitness = mean reward − kl_weight·KL, refit
    mean and scale on the elite slice (scale additionally decays).
    Stops early once the best fitness has improved by less than
    ``plateau_delta`` across ``plateau_window`` iterations.

    ``detector`` maps a text batch to P(machine); ``f1_eval`` optionally
    maps GeneratorParams to a detector F1 for the history.
    """
    if gen_cfg is None:
        gen_cfg = GenerationConfig()
    pool = prompts if prompts else [""]
    indices = np.asarray(base.vocab.frequent_indices(cfg.bias_dim), dtype=np.int64)
    dim = indices.size + 1
    if probe_contexts is None:
        probe_contexts = [[]]
        for prompt in pool[:8]:
            tail = prompt.split()[-(base.order - 1):] if prompt else []
            if tail:
                probe_contexts.append(tail)
    mean = np.zeros(dim)
    scale = np.full(dim, cfg.init_bias_scale)
    scale[-1] = cfg.init_tau_scale
    history: list[HistoryRow] = []
    train_log: list[dict] = []
    best_curve: list[float] = []
    for t in range(cfg.iterations):
        batch_rng = np.random.default_rng([cfg.seed, t])
        batch = [pool[i] for i in batch_rng.integers(0, len(pool), cfg.batch_size)]
        thetas = []
        fitness = np.empty(cfg.population_size)
        rewards = np.empty(cfg.population_size)
        member_texts: list[list[str]] = []
        member_rewards: list[list[float]] = []
        for m in range(cfg.population_size):
            member_rng = np.random.default_rng([cfg.seed, t, m])
            theta = _sample_member(mean, scale, member_rng, cfg)
            params = _params_from_theta(theta, base, indices)
            seed = int(np.random.SeedSequence([cfg.seed, t, m]).generate_state(1)[0])
            texts = rollout(params, batch, gen_cfg, seed=seed)
            per_text = evaluate(texts, batch, engine, detector)
            reward = float(np.mean(per_text))
            kl = divergence(params, base, probe_contexts) if cfg.kl_weight else 0.0
            thetas.append(theta)
            rewards[m] = reward
            fitness[m] = reward - cfg.kl_weight * kl
            member_texts.append(texts)
            member_rewards.append(per_text)
        order = np.argsort(-fitness, kind="stable")
        n_elite = max(1, int(round(cfg.population_size * cfg.elite_fraction)))
        elite = np.stack([thetas[i] for i in order[:n_elite]])
        mean = elite.mean(axis=0)
        scale = np.maximum(cfg.scale_decay * elite.std(axis=0), 1e-3)
        best = int(order[0])
        for query, response, reward in zip(
            batch, member_texts[best], member_rewards[best]
        ):
            train_log.append(
                {"query": query, "response": response, "reward": float(reward)}
            )
        current = _params_from_theta(mean, base, indices)
        history.append(
            HistoryRow(
                iteration=t,
                mean_reward=float(rewards.mean()),
                best_reward=float(rewards.max()),
                detector_f1=float(f1_eval(current)) if f1_eval else float("nan"),
                kl=divergence(current, base, probe_contexts),
            )
        )
        best_curve.append(max(fitness.max(), best_curve[-1] if best_curve else -np.inf))
        if (
            len(best_curve) > cfg.plateau_window
            and best_curve[-1] - best_curve[-1 - cfg.plateau_window]
            < cfg.plateau_delta
        ):
            break
    return AdaptResult(_params_from_theta(mean, base, indices), history, train_log)
