"""Command line entry points.

Exit codes: 0 success, 1 usage or configuration problems, 2 data
problems (unreadable files, empty corpora, and similar), 3 remote
scorer failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import demo_corpus
from .config import AppConfig, apply_settings, parse_config
from .corpus import Document, FilterPolicy, filter_corpus, load_documents, save_documents
from .decoding import GenerationConfig
from .errors import ConfigError, EvadeError, ScorerError
from .experiments import (
    grid_cell,
    grid_indices,
    recursion_report,
    sample_texts,
    write_grid_csv,
    write_recursion_csv,
    zero_shot_detector,
)
from .ngram import load_model, save_model, train
from .optimizer import GeneratorParams, adapt, zero_params
from .paraphrase import PipelineConfig, build_trainset, paraphrase_text, save_trainset
from .rewards import RewardEngine, dictionary_from_docs
from .scorers import local_scorer_set
from .shallow import evaluate, load_nb, predict, save_nb, train_nb
from .zero_shot import PerturbationConfig, detect_zero_shot

USAGE_EXIT = 1
DATA_EXIT = 2
SCORER_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad arguments; the contract here is 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    parser.add_argument("--seed", type=int, help="override the run seed")


def _resolve(args: argparse.Namespace) -> AppConfig:
    """Merge config sources; command line beats EVADE_SEED beats file."""
    cfg = AppConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as handle:
            cfg = apply_settings(cfg, parse_config(handle.read()))
    env_seed = os.environ.get("EVADE_SEED")
    if env_seed is not None:
        cfg = apply_settings(cfg, {"seed": env_seed})
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    if overrides:
        cfg = apply_settings(cfg, overrides)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _gen_config(cfg: AppConfig, args: argparse.Namespace) -> GenerationConfig:
    overrides = {
        name: getattr(args, name)
        for name in ("strategy", "temperature", "top_k", "top_p", "max_tokens")
        if getattr(args, name, None) is not None
    }
    return dataclasses.replace(cfg.generation, **overrides)


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as handle:
        return [line.strip() for line in handle if line.strip()]


def _dictionary(args: argparse.Namespace, docs: list[Document] | None = None):
    if getattr(args, "dictionary", None):
        return frozenset(w.casefold() for w in _read_lines(args.dictionary))
    if docs:
        return dictionary_from_docs(docs)
    return demo_corpus.word_dictionary()


def _cmd_ingest(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    if args.synthesize:
        docs = demo_corpus.make_docs(
            args.synthesize,
            style=args.style,
            seed=cfg.seed,
            label=args.label,
            id_prefix=args.id_prefix,
        )
    else:
        if not args.input:
            raise ConfigError("either --input or --synthesize is required")
        docs = [
            Document(id=f"{args.id_prefix}-{i}", text=line, label=args.label)
            for i, line in enumerate(_read_lines(args.input))
        ]
        policy = FilterPolicy(min_chars=args.min_chars, max_chars=args.max_chars)
        docs = filter_corpus(docs, policy)
    save_documents(docs, args.out)
    print(f"wrote {len(docs)} documents to {args.out}")
    return 0


def _cmd_train_lm(args: argparse.Namespace) -> int:
    docs = load_documents(args.docs)
    model = train(docs, order=args.order, alpha=args.alpha, min_count=args.min_count)
    save_model(model, args.out)
    print(
        f"trained order-{model.order} model on {len(docs)} documents, "
        f"{len(model.vocab.index_to_token)} token types"
    )
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    model = load_model(args.model)
    gen_cfg = _gen_config(cfg, args)
    texts = sample_texts(
        model, gen_cfg, args.count, (cfg.seed,), prompt=args.prompt
    )
    for text in texts:
        print(text)
    return 0


def _cmd_grid(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    spec = dataclasses.replace(cfg.grid, seed=cfg.seed)
    model = load_model(args.model)
    human = load_documents(args.human)
    largest = max(spec.sample_sizes)
    if len(human) < largest:
        raise ConfigError(f"need {largest} human docs, have {len(human)}")
    indices = grid_indices(spec)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            cells = list(
                pool.map(lambda idx: grid_cell(human, model, spec, *idx), indices)
            )
    else:
        cells = [grid_cell(human, model, spec, *idx) for idx in indices]
    write_grid_csv(cells, args.out)
    print(f"wrote {len(cells)} grid cells to {args.out}")
    return 0


def _cmd_detect(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    if args.train:
        if not args.model:
            raise ConfigError("--train needs --model as the output path")
        docs = load_documents(args.train)
        model = train_nb(docs, alpha=args.alpha)
        save_nb(model, args.model)
        print(f"trained detector on {len(docs)} documents")
        return 0
    if args.zero_shot:
        if not args.lm or args.text is None:
            raise ConfigError("--zero-shot needs --lm and --text")
        lm = load_model(args.lm)
        pcfg = PerturbationConfig(seed=cfg.seed)
        verdict = detect_zero_shot(lm, args.text, pcfg)
        print(
            json.dumps(
                {
                    "label": verdict.label,
                    "discrepancy": verdict.discrepancy,
                    "normalized_discrepancy": verdict.normalized_discrepancy,
                }
            )
        )
        return 0
    if not args.model:
        raise ConfigError("detect needs --model")
    model = load_nb(args.model)
    if args.text is not None:
        verdict = predict(model, args.text)
        print(
            json.dumps(
                {
                    "label": verdict.label,
                    "p_machine": verdict.p_machine,
                    "score": verdict.score,
                }
            )
        )
        return 0
    if args.docs:
        metrics = evaluate(model, load_documents(args.docs))
        print(json.dumps(dataclasses.asdict(metrics)))
        return 0
    raise ConfigError("detect needs --train, --text, or --docs")


def _cmd_reward_score(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    engine = RewardEngine(cfg.reward, _dictionary(args))
    texts = list(args.text)
    if args.batch:
        texts.extend(_read_lines(args.batch))
    if not texts:
        raise ConfigError("reward score needs --text or --batch")
    queries = [args.query] * len(texts) if args.query is not None else None
    for breakdown in engine.score_batch(texts, queries=queries):
        print(json.dumps(breakdown.as_dict()))
    return 0


def _write_history_csv(history, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["iteration", "mean_reward", "best_reward", "detector_f1", "kl"]
        )
        for row in history:
            writer.writerow(
                [
                    row.iteration,
                    f"{row.mean_reward:.6f}",
                    f"{row.best_reward:.6f}",
                    f"{row.detector_f1:.6f}",
                    f"{row.kl:.6f}",
                ]
            )


def _save_params(params: GeneratorParams, path: str) -> None:
    payload = {
        "bias_indices": [int(i) for i in params.bias_indices],
        "token_bias": [float(b) for b in params.token_bias],
        "tau_offset": float(params.tau_offset),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)


def _cmd_adapt(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    lm = load_model(args.lm)
    nb = load_nb(args.detector)

    def detect_batch(texts: list[str]) -> list[float]:
        return [predict(nb, t).p_machine for t in texts]

    human = load_documents(args.human) if args.human else []
    dictionary = _dictionary(args, human)
    engine = RewardEngine(cfg.reward, dictionary, detect=detect_batch)
    prompts = _read_lines(args.prompts) if args.prompts else None
    loop_cfg = dataclasses.replace(cfg.loop, seed=cfg.seed)
    result = adapt(
        lm,
        detect_batch,
        engine,
        loop_cfg,
        gen_cfg=cfg.generation,
        prompts=prompts,
    )
    if args.history:
        _write_history_csv(result.history, args.history)
    if args.train_log:
        with open(args.train_log, "w", encoding="utf-8") as handle:
            for row in result.train_log:
                handle.write(json.dumps(row) + "\n")
    if args.params:
        _save_params(result.params, args.params)
    final = result.history[-1]
    print(
        f"adapted for {len(result.history)} iterations, "
        f"final mean reward {final.mean_reward:.4f}"
    )
    return 0


def load_params(path: str, lm) -> GeneratorParams:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    params = zero_params(lm)
    return dataclasses.replace(
        params,
        bias_indices=np.array(payload["bias_indices"], dtype=np.int64),
        token_bias=np.array(payload["token_bias"], dtype=np.float64),
        tau_offset=float(payload["tau_offset"]),
    )


def _scorers_for(args: argparse.Namespace, cfg: AppConfig):
    lm = load_model(args.lm)
    reference = [doc.text for doc in load_documents(args.reference)]
    detector = None
    if getattr(args, "detector", None):
        nb = load_nb(args.detector)

        def detector(text: str) -> float:
            return predict(nb, text).p_machine

    scorers = local_scorer_set(lm, reference, detector=detector)
    if getattr(args, "zero_shot", False):
        pcfg = PerturbationConfig(seed=cfg.seed)
        scorers = dataclasses.replace(scorers, detect=zero_shot_detector(lm, pcfg))
    return lm, scorers


def _cmd_paraphrase(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    _, scorers = _scorers_for(args, cfg)
    pipeline = PipelineConfig(seed=cfg.seed)
    texts = [args.text] if args.text is not None else _read_lines(args.input)
    for text in texts:
        print(paraphrase_text(text, scorers, pipeline))
    return 0


def _cmd_trainset(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    lm, scorers = _scorers_for(args, cfg)
    questions = _read_lines(args.questions)
    pipeline = PipelineConfig(seed=cfg.seed)
    pairs = build_trainset(questions, lm, scorers, pipeline, gen_cfg=cfg.generation)
    save_trainset(pairs, args.out)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    return 0


def _cmd_recursion_report(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    _, scorers = _scorers_for(args, cfg)
    answers = _read_lines(args.answers)
    pipeline = PipelineConfig(seed=cfg.seed)
    rows = recursion_report(
        answers, scorers, iterations=args.iterations, cfg=pipeline
    )
    write_recursion_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a document file")
    _add_common(p)
    p.add_argument("--input", help="plain text, one document per line")
    p.add_argument("--synthesize", type=int, default=0, metavar="N")
    p.add_argument("--style", default="tweets", choices=("tweets", "answers", "mixed"))
    p.add_argument("--label", default="human")
    p.add_argument("--id-prefix", default="doc")
    p.add_argument("--min-chars", type=int, default=1)
    p.add_argument("--max-chars", type=int, default=100_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("train-lm", help="fit the n-gram language model")
    _add_common(p)
    p.add_argument("--docs", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=1e-4)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_lm)

    p = sub.add_parser("generate", help="sample continuations from a model")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--prompt", default="")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--strategy")
    p.add_argument("--temperature", type=float)
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--top-p", type=float, dest="top_p")
    p.add_argument("--max-tokens", type=int, dest="max_tokens")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("grid", help="detector grid over decoding settings")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--human", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("detect", help="train or apply detectors")
    _add_common(p)
    p.add_argument("--model", help="detector file to read or write")
    p.add_argument("--train", metavar="DOCS", help="train on labeled documents")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--text")
    p.add_argument("--docs", help="labeled documents to evaluate")
    p.add_argument("--zero-shot", action="store_true", dest="zero_shot")
    p.add_argument("--lm", help="language model for --zero-shot")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("reward", help="reward utilities")
    reward_sub = p.add_subparsers(dest="reward_command", required=True)
    ps = reward_sub.add_parser("score", help="print reward breakdowns")
    _add_common(ps)
    ps.add_argument("--text", action="append", default=[])
    ps.add_argument("--batch", help="plain text, one item per line")
    ps.add_argument("--query")
    ps.add_argument("--dictionary", help="word list, one per line")
    ps.set_defaults(func=_cmd_reward_score)

    p = sub.add_parser("adapt", help="tune the generator against a detector")
    _add_common(p)
    p.add_argument("--lm", required=True)
    p.add_argument("--detector", required=True)
    p.add_argument("--human", help="documents for the dictionary rule")
    p.add_argument("--dictionary", help="word list, one per line")
    p.add_argument("--prompts", help="plain text, one prompt per line")
    p.add_argument("--history", help="per-iteration CSV")
    p.add_argument("--train-log", dest="train_log", help="best-member JSONL")
    p.add_argument("--params", help="tuned parameter JSON")
    p.set_defaults(func=_cmd_adapt)

    p = sub.add_parser("paraphrase", help="rewrite text under the quality gates")
    _add_common(p)
    p.add_argument("--lm", required=True)
    p.add_argument("--reference", required=True, help="documents for scorers")
    p.add_argument("--text")
    p.add_argument("--input", help="plain text, one item per line")
    p.set_defaults(func=_cmd_paraphrase)

    p = sub.add_parser("trainset", help="build paraphrase training pairs")
    _add_common(p)
    p.add_argument("--lm", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_trainset)

    p = sub.add_parser("recursion-report", help="repeated-paraphrase curves")
    _add_common(p)
    p.add_argument("--lm", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--answers", required=True)
    p.add_argument("--detector", help="Bayes detector file")
    p.add_argument("--zero-shot", action="store_true", dest="zero_shot")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_recursion_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except ScorerError as exc:
        print(f"scorer error: {exc}", file=sys.stderr)
        return SCORER_EXIT
    except (EvadeError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
