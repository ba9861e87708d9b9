"""Temperature scaling, truncation strategies, and autoregressive text
generation on top of the n-gram model.

A token distribution is a numpy vector aligned to vocabulary indices,
non-negative and summing to one. Every step of generation applies
temperature first, then the strategy's truncation, then draws a token
(argmax for greedy, inverse-CDF sampling otherwise). All tie rules favor
the lower vocabulary index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import BOS_ID, EOS_ID, detokenize, tokenize
from .errors import ConfigError, ZeroTemperature
from .ngram import NgramModel

STRATEGIES = ("greedy", "random", "top_k", "nucleus", "typical")

# Slack when comparing cumulative mass against a target, so exact-tie
# prefixes computed in real arithmetic survive floating-point rounding.
_MASS_EPS = 1e-12


@dataclass
class GenerationConfig:
    strategy: str = "random"
    temperature: float = 1.0
    top_k: int = 50
    top_p: float = 0.95
    typical_mass: float = 0.9
    max_tokens: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not 0 < self.temperature <= 2:
            raise ConfigError("temperature must be in (0, 2]")
        if self.top_k < 1:
            raise ConfigError("top_k must be at least 1")
        if not 0 < self.top_p <= 1:
            raise ConfigError("top_p must be in (0, 1]")
        if not 0 < self.typical_mass <= 1:
            raise ConfigError("typical_mass must be in (0, 1]")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be at least 1")


def apply_temperature(probs: np.ndarray, temperature: float) -> np.ndarray:
    """Rescale so p'_i ∝ p_i^(1/τ), computed in log space for stability."""
    if temperature <= 0:
        raise ZeroTemperature("temperature must be strictly positive")
    if temperature == 1.0:
        return probs.copy()
    with np.errstate(divide="ignore"):
        logs = np.log(probs)
    logs = logs / temperature
    peak = logs.max()
    scaled = np.exp(logs - peak)
    return scaled / scaled.sum()


def _descending_order(probs: np.ndarray) -> np.ndarray:
    # Stable sort on negated probs: equal entries keep index order.
    return np.argsort(-probs, kind="stable")


def truncate_top_k(probs: np.ndarray, k: int) -> np.ndarray:
    if k < 1:
        raise ConfigError("k must be at least 1")
    if k >= probs.size:
        return probs.copy()
    keep = _descending_order(probs)[:k]
    out = np.zeros_like(probs)
    out[keep] = probs[keep]
    return out / out.sum()


def truncate_nucleus(probs: np.ndarray, p: float) -> np.ndarray:
    """Keep the smallest descending-probability prefix with mass ≥ p."""
    if not 0 < p <= 1:
        raise ConfigError("p must be in (0, 1]")
    order = _descending_order(probs)
    cumulative = np.cumsum(probs[order])
    cut = int(np.searchsorted(cumulative, p - _MASS_EPS, side="left"))
    cut = min(cut, probs.size - 1)
    keep = order[: cut + 1]
    out = np.zeros_like(probs)
    out[keep] = probs[keep]
    return out / out.sum()


def truncate_typical(probs: np.ndarray, mass: float) -> np.ndarray:
    """Keep tokens closest to the distribution's entropy.

    Tokens are ranked by |−log p_i − H| ascending (distances quantized at
    1e-12 so analytic ties stay ties), then the smallest prefix whose
    original mass reaches ``mass`` survives.
    """
    if not 0 < mass <= 1:
        raise ConfigError("mass must be in (0, 1]")
    positive = probs > 0
    with np.errstate(divide="ignore"):
        logs = np.log(probs, where=positive, out=np.zeros_like(probs))
    entropy = -(probs[positive] * logs[positive]).sum()
    distance = np.full_like(probs, np.inf)
    distance[positive] = np.abs(-logs[positive] - entropy)
    distance = np.round(distance, 12)
    order = np.lexsort((np.arange(probs.size), distance))
    cumulative = np.cumsum(probs[order])
    cut = int(np.searchsorted(cumulative, mass - _MASS_EPS, side="left"))
    cut = min(cut, probs.size - 1)
    keep = order[: cut + 1]
    out = np.zeros_like(probs)
    out[keep] = probs[keep]
    return out / out.sum()


def truncate(probs: np.ndarray, cfg: GenerationConfig) -> np.ndarray:
    """Apply the truncation named by the config strategy (none for
    greedy/random)."""
    if cfg.strategy == "top_k":
        return truncate_top_k(probs, cfg.top_k)
    if cfg.strategy == "nucleus":
        return truncate_nucleus(probs, cfg.top_p)
    if cfg.strategy == "typical":
        return truncate_typical(probs, cfg.typical_mass)
    return probs


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; reproducible across platforms for a given rng."""
    cumulative = np.cumsum(probs)
    draw = rng.random() * cumulative[-1]
    return int(min(np.searchsorted(cumulative, draw, side="right"), probs.size - 1))


def step(
    probs: np.ndarray, cfg: GenerationConfig, rng: np.random.Generator
) -> int:
    """One decoding step: temperature, truncation, then token choice."""
    probs = apply_temperature(probs, cfg.temperature)
    probs = truncate(probs, cfg)
    if cfg.strategy == "greedy":
        return int(np.argmax(probs))
    return sample_index(probs, rng)


def generate(
    model: NgramModel,
    prompt: str,
    cfg: GenerationConfig,
    rng: np.random.Generator | None = None,
) -> str:
    """Complete ``prompt``, returning only the generated continuation.

    Stops on ⟨eos⟩ or after ``max_tokens`` tokens. With the default rng
    the output is a pure function of (model, prompt, cfg.seed).
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    context = [BOS_ID] * max(model.order - 1, 1)
    context += model.vocab.encode(tokenize(prompt))
    produced: list[str] = []
    for _ in range(cfg.max_tokens):
        probs = model.next_distribution_ids(context)
        token_id = step(probs, cfg, rng)
        if token_id == EOS_ID:
            break
        produced.append(model.vocab.token(token_id))
        context.append(token_id)
    return detokenize(produced)
