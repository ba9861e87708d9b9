"""Experiment harnesses: detector grid over decoding parameters,
word-probability distribution comparison, adaptation before/after
report, and recursive-paraphrase curves. All outputs are plain CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .corpus import Document, tokenize
from .decoding import GenerationConfig, generate
from .errors import ConfigError, DataError, EmptyText, TooShort
from .ngram import NgramModel
from .optimizer import GeneratorParams
from .paraphrase import PipelineConfig, recursive_paraphrase
from .scorers import ScorerSet
from .shallow import Metrics, evaluate, train_nb
from .zero_shot import PerturbationConfig, detect_zero_shot

DEFAULT_TEMPERATURES = (0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4)
DEFAULT_STRATEGIES = ("greedy", "random", "top_k", "nucleus", "typical")


@dataclass
class GridSpec:
    temperatures: tuple[float, ...] = DEFAULT_TEMPERATURES
    strategies: tuple[str, ...] = DEFAULT_STRATEGIES
    sample_sizes: tuple[int, ...] = (1000, 10000)
    replications: int = 3
    seed: int = 0
    gen_max_tokens: int = 32
    top_k: int = 100
    top_p: float = 0.95
    typical_mass: float = 0.9
    alpha_nb: float = 1.0

    def __post_init__(self) -> None:
        if any(t <= 0 for t in self.temperatures):
            raise ConfigError("temperatures must be positive")
        if any(s < 100 for s in self.sample_sizes):
            raise ConfigError("sample sizes must be at least 100")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")


@dataclass
class GridCell:
    temperature: float
    strategy: str
    sample_size: int
    metrics: Metrics


def split_docs(
    docs: list[Document], fractions: dict[str, float], seed: int = 0
) -> dict[str, list[Document]]:
    """Shuffle once, then slice into named splits by fraction."""
    if abs(sum(fractions.values()) - 1.0) > 1e-9:
        raise ConfigError("split fractions must sum to 1")
    order = np.random.default_rng(seed).permutation(len(docs))
    shuffled = [docs[i] for i in order]
    splits: dict[str, list[Document]] = {}
    start = 0
    names = list(fractions)
    for i, name in enumerate(names):
        stop = len(docs) if i == len(names) - 1 else start + int(
            round(fractions[name] * len(docs))
        )
        splits[name] = shuffled[start:stop]
        start = stop
    return splits


def assert_disjoint(**splits: list[Document]) -> None:
    """Raise unless every pair of splits has disjoint document ids."""
    names = list(splits)
    for i, a in enumerate(names):
        ids_a = {doc.id for doc in splits[a]}
        for b in names[i + 1 :]:
            overlap = ids_a & {doc.id for doc in splits[b]}
            if overlap:
                raise DataError(
                    f"splits {a!r} and {b!r} share ids: {sorted(overlap)[:5]}"
                )


def _cell_config(spec: GridSpec, temperature: float, strategy: str) -> GenerationConfig:
    return GenerationConfig(
        strategy=strategy,
        temperature=temperature,
        top_k=spec.top_k,
        top_p=spec.top_p,
        typical_mass=spec.typical_mass,
        max_tokens=spec.gen_max_tokens,
    )


def sample_texts(
    lm: NgramModel,
    cfg: GenerationConfig,
    count: int,
    seed_path: tuple[int, ...],
    prompt: str = "",
) -> list[str]:
    """``count`` generations with per-sample derived rngs.

    Greedy is deterministic, so one generation is computed and repeated.
    The rare empty generation (stop symbol drawn first) is retried on a
    deeper derived stream to keep counts exact.
    """
    if cfg.strategy == "greedy":
        return [generate(lm, prompt, cfg)] * count
    texts = []
    for i in range(count):
        for attempt in range(100):
            rng = np.random.default_rng([*seed_path, i, attempt])
            text = generate(lm, prompt, cfg, rng=rng)
            if text:
                texts.append(text)
                break
        else:
            raise EmptyText("generation kept producing empty texts")
    return texts


def _machine_docs(texts: list[str], tag: str) -> list[Document]:
    return [
        Document(id=f"m-{tag}-{i}", text=text, label="machine")
        for i, text in enumerate(texts)
    ]


def grid_cell(
    human_docs: list[Document],
    lm: NgramModel,
    spec: GridSpec,
    zi: int,
    ti: int,
    si: int,
) -> GridCell:
    """One (sample size, temperature, strategy) cell of the grid.

    Per replication: generate ``size`` machine texts, pair them with
    ``size`` sampled human docs, train the Bayes detector on one half of
    each and evaluate on the disjoint other half. Metrics are averaged
    over replications.
    """
    size = spec.sample_sizes[zi]
    temperature = spec.temperatures[ti]
    strategy = spec.strategies[si]
    cfg = _cell_config(spec, temperature, strategy)
    scores = np.zeros(4)
    for rep in range(spec.replications):
        texts = sample_texts(lm, cfg, size, (spec.seed, rep, zi, ti, si))
        machine = _machine_docs(texts, f"{zi}-{ti}-{si}-{rep}")
        order = np.random.default_rng([spec.seed, rep]).permutation(
            len(human_docs)
        )
        human = [human_docs[i] for i in order[:size]]
        half = size // 2
        train = machine[:half] + human[:half]
        test = machine[half:] + human[half:]
        model = train_nb(train, spec.alpha_nb)
        m = evaluate(model, test)
        scores += np.array([m.accuracy, m.precision, m.recall, m.f1])
    scores /= spec.replications
    return GridCell(temperature, strategy, size, Metrics(*scores))


def grid_indices(spec: GridSpec) -> list[tuple[int, int, int]]:
    return [
        (zi, ti, si)
        for zi in range(len(spec.sample_sizes))
        for ti in range(len(spec.temperatures))
        for si in range(len(spec.strategies))
    ]


def run_grid(
    human_docs: list[Document], lm: NgramModel, spec: GridSpec
) -> list[GridCell]:
    """Detector quality per (temperature, strategy, sample size).

    ``human_docs`` must be disjoint from the LM's training split; the
    caller owns that split.
    """
    largest = max(spec.sample_sizes)
    if len(human_docs) < largest:
        raise ConfigError(
            f"need at least {largest} human docs, have {len(human_docs)}"
        )
    return [
        grid_cell(human_docs, lm, spec, zi, ti, si)
        for zi, ti, si in grid_indices(spec)
    ]


@dataclass
class DistributionReport:
    quantiles: list[tuple[float, float, float]]
    mean_abs_log_gap: float
    bin_edges: list[float]
    density_human: list[float]
    density_machine: list[float]


def _occurrence_log_probs(docs: list[Document]) -> np.ndarray:
    counts: dict[str, int] = {}
    total = 0
    for doc in docs:
        for token in tokenize(doc.text):
            counts[token] = counts.get(token, 0) + 1
            total += 1
    if total < 1000:
        raise TooShort(f"need at least 1000 tokens, have {total}")
    probs = np.array(
        [counts[t] / total for t in counts for _ in range(counts[t])]
    )
    return np.log10(probs)


def distribution_report(
    human_docs: list[Document],
    machine_docs: list[Document],
    n_quantiles: int = 101,
    n_bins: int = 40,
) -> DistributionReport:
    """Compare per-occurrence word-probability distributions.

    Every token occurrence contributes its own corpus frequency; the two
    resulting distributions are summarized by log-scaled quantile pairs
    and histogram bin masses (each summing to 1).
    """
    log_h = _occurrence_log_probs(human_docs)
    log_m = _occurrence_log_probs(machine_docs)
    qs = np.linspace(0, 1, n_quantiles)
    quant_h = np.quantile(log_h, qs)
    quant_m = np.quantile(log_m, qs)
    edges = np.histogram_bin_edges(
        np.concatenate([log_h, log_m]), bins=n_bins
    )
    hist_h, _ = np.histogram(log_h, bins=edges)
    hist_m, _ = np.histogram(log_m, bins=edges)
    return DistributionReport(
        quantiles=[(float(q), float(a), float(b)) for q, a, b in zip(qs, quant_h, quant_m)],
        mean_abs_log_gap=float(np.mean(np.abs(quant_h - quant_m))),
        bin_edges=edges.tolist(),
        density_human=(hist_h / hist_h.sum()).tolist(),
        density_machine=(hist_m / hist_m.sum()).tolist(),
    )


def before_after_report(
    detector,
    base_lm: NgramModel,
    params: GeneratorParams,
    human_docs: list[Document],
    gen_cfg: GenerationConfig,
    n_samples: int = 200,
    seed: int = 0,
    prompts: list[str] | None = None,
) -> list[tuple[str, Metrics]]:
    """Detector metrics on fresh generations before vs after adaptation.

    Both phases share the same human half, so any movement comes from
    the generator.
    """
    if len(human_docs) < n_samples:
        raise ConfigError("not enough human docs for the report")
    pool = prompts if prompts else [""]
    rows = []
    for phase, model, cfg in (
        ("before", base_lm, gen_cfg),
        ("after", params.model(), params.generation_config(gen_cfg)),
    ):
        texts = []
        for i in range(n_samples):
            prompt = pool[i % len(pool)]
            texts.extend(
                sample_texts(model, cfg, 1, (seed, 7, i), prompt=prompt)
            )
        docs = _machine_docs(texts, phase) + human_docs[:n_samples]
        rows.append((phase, evaluate(detector, docs)))
    return rows


def zero_shot_detector(lm: NgramModel, cfg: PerturbationConfig):
    """Batch callable mapping texts to 0/1 machine verdicts.

    Texts too short to perturb count as human, which the underlying
    method cannot handle by construction.
    """

    def detect(texts: list[str]) -> list[float]:
        out = []
        for text in texts:
            try:
                verdict = detect_zero_shot(lm, text, cfg)
            except TooShort:
                out.append(0.0)
                continue
            out.append(1.0 if verdict.label == "machine" else 0.0)
        return out

    return detect


@dataclass
class RecursionRow:
    iteration: int
    detection_rate: float
    acceptability: float
    similarity: float


def recursion_report(
    answers: list[str],
    scorers: ScorerSet,
    iterations: int = 10,
    cfg: PipelineConfig | None = None,
) -> list[RecursionRow]:
    """Mean detection/coherence/similarity per recursion depth.

    Row 0 is the untouched baseline. ``scorers.detect`` supplies the
    detection signal (typically the calibrated zero-shot wrapper).
    """
    if not answers:
        raise EmptyText("no answers to paraphrase")
    if cfg is None:
        cfg = PipelineConfig()
    trajectories = []
    for idx, answer in enumerate(answers):
        item_seed = int(
            np.random.SeedSequence([cfg.seed, 31 + idx]).generate_state(1)[0]
        )
        item_cfg = PipelineConfig(**{**cfg.__dict__, "seed": item_seed})
        trajectories.append(recursive_paraphrase(answer, iterations, scorers, item_cfg))
    rows = []
    for i in range(iterations + 1):
        points = [t[i] for t in trajectories]
        rows.append(
            RecursionRow(
                iteration=i,
                detection_rate=float(np.mean([p.detection for p in points])),
                acceptability=float(np.mean([p.coherence for p in points])),
                similarity=float(np.mean([p.similarity for p in points])),
            )
        )
    return rows


def write_grid_csv(cells: list[GridCell], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["temperature", "strategy", "sample_size", "accuracy", "precision", "recall", "f1"]
        )
        for cell in cells:
            m = cell.metrics
            writer.writerow(
                [
                    cell.temperature,
                    cell.strategy,
                    cell.sample_size,
                    f"{m.accuracy:.6f}",
                    f"{m.precision:.6f}",
                    f"{m.recall:.6f}",
                    f"{m.f1:.6f}",
                ]
            )


def write_qq_csv(reports: list[tuple[float, DistributionReport]], path: str) -> None:
    """Quantile pairs per machine-corpus temperature."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["temperature", "quantile", "log_p_human", "log_p_machine"])
        for temperature, report in reports:
            for q, log_h, log_m in report.quantiles:
                writer.writerow(
                    [temperature, f"{q:.4f}", f"{log_h:.6f}", f"{log_m:.6f}"]
                )


def write_before_after_csv(rows: list[tuple[str, Metrics]], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["phase", "accuracy", "precision", "recall", "f1"])
        for phase, m in rows:
            writer.writerow(
                [
                    phase,
                    f"{m.accuracy:.6f}",
                    f"{m.precision:.6f}",
                    f"{m.recall:.6f}",
                    f"{m.f1:.6f}",
                ]
            )


def write_recursion_csv(rows: list[RecursionRow], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "detection_rate", "acceptability", "similarity"])
        for row in rows:
            writer.writerow(
                [
                    row.iteration,
                    f"{row.detection_rate:.6f}",
                    f"{row.acceptability:.6f}",
                    f"{row.similarity:.6f}",
                ]
            )
