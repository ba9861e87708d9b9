"""Sentence paraphrasing by entity-protected masking and infilling.

Per sentence: protect entity-like tokens, enumerate all 2-tuples of
maskable positions under a 15% token budget, draw a handful of plans,
ask the infill scorer for candidate fills, keep candidates that stay
similar and acceptably coherent, and select the survivor with the
highest log loss. Applied recursively, each pass pushes the text further
from the generator's high-probability manifold while the filters hold
meaning and fluency roughly fixed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .corpus import MASK, detokenize, split_sentences, tokenize
from .decoding import GenerationConfig, generate
from .errors import EmptyText, InsufficientMaskable, NoSurvivors
from .ngram import NgramModel
from .scorers import ScorerSet

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    n_combos: int = 10
    n_fill: int = 10
    mask_budget: float = 0.15
    sim_threshold: float = 0.9
    coh_threshold: float = 0.9
    coh_delta: float = 0.05
    max_groups: int = 1
    seed: int = 0
    gazetteer: frozenset[str] = frozenset()


@dataclass
class MaskPlan:
    tokens: list[str]
    protected: set[int]
    groups: list[tuple[int, ...]]
    masked_fraction: float

    def positions(self) -> set[int]:
        return {p for group in self.groups for p in group}


@dataclass
class ParaphraseCandidate:
    text: str
    similarity: float = float("nan")
    coherence: float = float("nan")
    log_loss: float = float("nan")
    plan: MaskPlan | None = None


@dataclass
class TrainPair:
    source: str
    target: str
    log_loss: float
    similarity: float
    coherence_src: float
    coherence_tgt: float


def protect_entities(
    tokens: list[str], gazetteer: frozenset[str] = frozenset()
) -> set[int]:
    """Positions that masking must never touch.

    Protected: capitalized tokens after the first position, tokens
    containing digits, @-handles and #-tags, case-folded gazetteer
    entries, and always the final token.
    """
    protected: set[int] = set()
    for i, token in enumerate(tokens):
        if i > 0 and token[:1].isupper():
            protected.add(i)
        elif any(ch.isdigit() for ch in token):
            protected.add(i)
        elif token[:1] in "@#" and len(token) > 1:
            protected.add(i)
        elif token.casefold() in gazetteer:
            protected.add(i)
    if tokens:
        protected.add(len(tokens) - 1)
    return protected


def enumerate_masks(
    tokens: list[str], protected: set[int], budget: float = 0.15
) -> list[MaskPlan]:
    """All position 2-tuples among maskable tokens, budget-filtered.

    Every plan masks the same share 2/len(tokens), so the budget filter
    keeps either every pair or none.
    """
    maskable = [i for i in range(len(tokens)) if i not in protected]
    if len(maskable) < 2:
        raise InsufficientMaskable(
            f"need 2 maskable positions, have {len(maskable)}"
        )
    fraction = 2 / len(tokens)
    if fraction > budget:
        raise InsufficientMaskable(
            f"pair share {fraction:.3f} exceeds budget {budget}"
        )
    return [
        MaskPlan(tokens, protected, [pair], fraction)
        for pair in combinations(maskable, 2)
    ]


def compose_plans(plans: list[MaskPlan], max_groups: int) -> list[MaskPlan]:
    """Merge disjoint 2-tuples of sibling plans into multi-group plans.

    Returns the originals plus every combination of up to ``max_groups``
    mutually disjoint tuples that still fits the budget the originals
    were built under. With ``max_groups`` = 1 this is the identity.
    """
    if max_groups <= 1 or not plans:
        return list(plans)
    tokens = plans[0].tokens
    per_pair = plans[0].masked_fraction
    budget_groups = min(max_groups, int(0.15 / per_pair) if per_pair else max_groups)
    out = list(plans)
    pairs = [plan.groups[0] for plan in plans]
    for size in range(2, budget_groups + 1):
        for combo in combinations(pairs, size):
            flat = [p for pair in combo for p in pair]
            if len(set(flat)) != len(flat):
                continue
            out.append(
                MaskPlan(tokens, plans[0].protected, list(combo), per_pair * size)
            )
    return out


def sample_mask_combos(plans: list[MaskPlan], n: int, seed) -> list[MaskPlan]:
    """Draw min(n, len(plans)) plans uniformly without replacement."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(plans))[: min(n, len(plans))]
    return [plans[i] for i in order]


def fill_masks(
    tokens: list[str], plan: MaskPlan, infill, n_fill: int
) -> list[ParaphraseCandidate]:
    """Candidate sentences for one plan, deduplicated.

    Candidates equal to the original are dropped, as are candidates that
    lost any protected token (a remote filler returns whole sentences,
    so protection is enforced here by token multiset).
    """
    assert plan.masked_fraction <= 0.15 + 1e-9, "mask plan exceeds budget"
    positions = plan.positions()
    original = detokenize(tokens)
    masked = detokenize([MASK if i in positions else t for i, t in enumerate(tokens)])
    fills = infill([masked], n_fill, [original])[0]
    required: dict[str, int] = {}
    for i in plan.protected:
        required[tokens[i]] = required.get(tokens[i], 0) + 1
    seen: set[str] = set()
    candidates: list[ParaphraseCandidate] = []
    for text in fills:
        if not text or text == original or text in seen:
            continue
        seen.add(text)
        candidate_tokens = tokenize(text)
        counts: dict[str, int] = {}
        for t in candidate_tokens:
            counts[t] = counts.get(t, 0) + 1
        if any(counts.get(t, 0) < need for t, need in required.items()):
            continue
        candidates.append(ParaphraseCandidate(text=text, plan=plan))
    return candidates


def filter_candidates(
    original: str,
    candidates: list[ParaphraseCandidate],
    scorers: ScorerSet,
    cfg: PipelineConfig,
) -> list[ParaphraseCandidate]:
    """Similarity and coherence gates, populated in place.

    Keep iff similarity ≥ threshold, and coherence stays ≥ threshold
    when the original met it, or within ±delta of the original when it
    did not.
    """
    if not candidates:
        return []
    sims = scorers.similarity([(original, c.text) for c in candidates])
    cohs = scorers.coherence([original] + [c.text for c in candidates])
    coh_original = cohs[0]
    survivors = []
    for candidate, sim, coh in zip(candidates, sims, cohs[1:]):
        candidate.similarity = sim
        candidate.coherence = coh
        if sim < cfg.sim_threshold:
            continue
        if coh_original >= cfg.coh_threshold:
            if coh < cfg.coh_threshold:
                continue
        elif abs(coh - coh_original) > cfg.coh_delta:
            continue
        survivors.append(candidate)
    return survivors


def select_best(
    survivors: list[ParaphraseCandidate], logloss
) -> ParaphraseCandidate:
    """Highest log loss wins; ties go to the smallest text."""
    if not survivors:
        raise NoSurvivors("no candidate passed the filters")
    losses = logloss([c.text for c in survivors])
    for candidate, loss in zip(survivors, losses):
        candidate.log_loss = loss
    return min(survivors, key=lambda c: (-c.log_loss, c.text))


def _paraphrase_sentence(
    sentence: str, scorers: ScorerSet, cfg: PipelineConfig, seed
) -> ParaphraseCandidate:
    tokens = tokenize(sentence)
    if not tokens:
        raise EmptyText("sentence has no tokens")
    protected = protect_entities(tokens, cfg.gazetteer)
    plans = enumerate_masks(tokens, protected, cfg.mask_budget)
    plans = compose_plans(plans, cfg.max_groups)
    plans = sample_mask_combos(plans, cfg.n_combos, seed)
    pool: list[ParaphraseCandidate] = []
    seen: set[str] = set()
    for plan in plans:
        for candidate in fill_masks(tokens, plan, scorers.infill, cfg.n_fill):
            if candidate.text not in seen:
                seen.add(candidate.text)
                pool.append(candidate)
    survivors = filter_candidates(sentence, pool, scorers, cfg)
    return select_best(survivors, scorers.logloss)


def paraphrase_text(text: str, scorers: ScorerSet, cfg: PipelineConfig) -> str:
    """Paraphrase each sentence independently; sentences the pipeline
    cannot improve pass through unchanged."""
    pieces = []
    for idx, sentence in enumerate(split_sentences(text)):
        try:
            pieces.append(
                _paraphrase_sentence(sentence, scorers, cfg, [cfg.seed, idx]).text
            )
        except (InsufficientMaskable, NoSurvivors, EmptyText):
            pieces.append(sentence)
    return " ".join(pieces)


@dataclass
class TrajectoryPoint:
    iteration: int
    text: str
    similarity: float
    coherence: float
    detection: float


def recursive_paraphrase(
    text: str, iterations: int, scorers: ScorerSet, cfg: PipelineConfig
) -> list[TrajectoryPoint]:
    """Iterate the paraphraser, scoring each stage against the original.

    Point 0 is the untouched input. Detection comes from the bound
    detect scorer (NaN when absent); entity protection is recomputed
    every pass since capitalization may have moved.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    points = [_trajectory_point(0, text, text, scorers)]
    current = text
    for i in range(1, iterations + 1):
        stage_cfg = PipelineConfig(**{**cfg.__dict__, "seed": _stage_seed(cfg.seed, i)})
        current = paraphrase_text(current, scorers, stage_cfg)
        points.append(_trajectory_point(i, text, current, scorers))
    return points


def _stage_seed(seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([seed, iteration]).generate_state(1)[0])


def _trajectory_point(
    iteration: int, original: str, current: str, scorers: ScorerSet
) -> TrajectoryPoint:
    similarity = scorers.similarity([(original, current)])[0]
    coherence = scorers.coherence([current])[0]
    detection = (
        float(scorers.detect([current])[0]) if scorers.detect else float("nan")
    )
    return TrajectoryPoint(iteration, current, similarity, coherence, detection)


def build_trainset(
    questions: list[str],
    lm: NgramModel,
    scorers: ScorerSet,
    cfg: PipelineConfig,
    gen_cfg: GenerationConfig | None = None,
) -> list[TrainPair]:
    """Generate an answer per question, paraphrase it sentence by
    sentence, and emit a source→target pair for every sentence with
    survivors. Failures skip the sentence, never the batch."""
    if not questions:
        raise EmptyText("no questions given")
    if gen_cfg is None:
        gen_cfg = GenerationConfig(strategy="nucleus", seed=cfg.seed)
    pairs: list[TrainPair] = []
    for q_idx, question in enumerate(questions):
        rng = np.random.default_rng([cfg.seed, q_idx])
        answer = generate(lm, question, gen_cfg, rng=rng)
        if not answer.strip():
            log.warning("question %d produced an empty answer", q_idx)
            continue
        for s_idx, sentence in enumerate(split_sentences(answer)):
            try:
                best = _paraphrase_sentence(
                    sentence, scorers, cfg, [cfg.seed, q_idx, s_idx]
                )
            except (InsufficientMaskable, NoSurvivors, EmptyText) as exc:
                log.info("sentence skipped (%s)", exc.__class__.__name__)
                continue
            coh_src = scorers.coherence([sentence])[0]
            pairs.append(
                TrainPair(
                    source=sentence,
                    target=best.text,
                    log_loss=best.log_loss,
                    similarity=best.similarity,
                    coherence_src=coh_src,
                    coherence_tgt=best.coherence,
                )
            )
    return pairs


def save_trainset(pairs: list[TrainPair], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            row = {
                "source": pair.source,
                "target": pair.target,
                "log_loss": pair.log_loss,
                "similarity": pair.similarity,
                "coherence_src": pair.coherence_src,
                "coherence_tgt": pair.coherence_tgt,
            }
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
