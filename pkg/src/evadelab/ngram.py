"""Count-based n-gram language model with add-α smoothing.

This is the desk-scale generative model: it produces the next-token
distributions consumed by the decoding strategies, the per-token log
losses used to rank paraphrases, and the sequence log probabilities
needed by the perturbation-discrepancy detector.

Within a seen context the estimate is pure add-α over the full
vocabulary, so every token has positive probability. An entirely unseen
context falls back to the (order−1) table. The classic backoff discount
is kept as a serialized field for compatibility, but once the fallback
distribution is renormalized the constant cancels, so it has no
numerical effect.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .corpus import BOS_ID, Document, Vocabulary, build_vocab, split_sentences, tokenize
from .errors import ConfigError, DataError, EmptyCorpus, EmptyText

BACKOFF_FACTOR = 0.4

_ContextTable = dict[tuple[int, ...], dict[int, int]]


class NgramModel:
    """Immutable after construction; reads are thread-safe."""

    def __init__(
        self,
        order: int,
        alpha: float,
        vocab: Vocabulary,
        tables: list[_ContextTable],
        backoff: float = BACKOFF_FACTOR,
    ):
        if not 1 <= order <= 6:
            raise ConfigError("order must be in [1, 6]")
        if alpha <= 0:
            raise ConfigError("smoothing constant must be positive")
        self.order = order
        self.alpha = alpha
        self.vocab = vocab
        self.backoff = backoff
        # tables[L] maps a length-L context to packed (token ids, counts,
        # total) arrays; tables[0] holds the unigram row under ().
        self._packed: list[dict[tuple[int, ...], tuple[np.ndarray, np.ndarray, int]]] = []
        for table in tables:
            packed = {}
            for context, row in table.items():
                ids = np.fromiter(row.keys(), dtype=np.int64, count=len(row))
                counts = np.fromiter(row.values(), dtype=np.float64, count=len(row))
                packed[context] = (ids, counts, int(counts.sum()))
            self._packed.append(packed)

    def context_ids(self, tokens: list[str]) -> list[int]:
        return self.vocab.encode(tokens)

    def next_distribution_ids(self, context: list[int]) -> np.ndarray:
        """Smoothed distribution over the vocabulary given id context."""
        size = len(self.vocab)
        window = tuple(context[max(0, len(context) - (self.order - 1)):])
        for length in range(len(window), -1, -1):
            row = self._packed[length].get(window[len(window) - length:])
            if row is not None:
                ids, counts, total = row
                probs = np.full(size, self.alpha, dtype=np.float64)
                probs[ids] += counts
                probs /= total + self.alpha * size
                return probs
        raise EmptyCorpus("model has no unigram table")

    def next_distribution(self, context: list[str]) -> np.ndarray:
        return self.next_distribution_ids(self.context_ids(context))

    def _token_log_prob(self, context: list[int], token_id: int) -> float:
        size = len(self.vocab)
        window = tuple(context[max(0, len(context) - (self.order - 1)):])
        for length in range(len(window), -1, -1):
            row = self._packed[length].get(window[len(window) - length:])
            if row is not None:
                ids, counts, total = row
                hit = counts[ids == token_id]
                count = float(hit[0]) if hit.size else 0.0
                return math.log(count + self.alpha) - math.log(total + self.alpha * size)
        raise EmptyCorpus("model has no unigram table")

    def _sentence_log_prob(self, tokens: list[str]) -> tuple[float, int]:
        ids = self.vocab.encode(tokens)
        context = [BOS_ID] * (self.order - 1)
        total = 0.0
        for token_id in ids:
            total += self._token_log_prob(context, token_id)
            context = (context + [token_id])[-(self.order - 1):] if self.order > 1 else []
        return total, len(ids)


def train(
    docs: list[Document],
    order: int,
    alpha: float,
    vocab: Vocabulary | None = None,
    min_count: int = 1,
) -> NgramModel:
    """Count n-grams of every length up to ``order`` over doc sentences.

    Each sentence is padded with ⟨bos⟩ context and terminated with ⟨eos⟩,
    so sentence boundaries reset the context during scoring and the model
    can emit an explicit stop symbol during generation.
    """
    if not 1 <= order <= 6:
        raise ConfigError("order must be in [1, 6]")
    if alpha <= 0:
        raise ConfigError("smoothing constant must be positive")
    if not docs:
        raise EmptyCorpus("no documents to train on")
    if vocab is None:
        vocab = build_vocab(docs, min_count=min_count)
    tables: list[_ContextTable] = [{} for _ in range(order)]
    eos = vocab.index("⟨eos⟩")
    for doc in docs:
        for sentence in split_sentences(doc.text):
            tokens = tokenize(sentence)
            if not tokens:
                continue
            ids = [BOS_ID] * (order - 1) + vocab.encode(tokens) + [eos]
            for pos in range(order - 1, len(ids)):
                token_id = ids[pos]
                for length in range(order):
                    context = tuple(ids[pos - length:pos])
                    row = tables[length].setdefault(context, {})
                    row[token_id] = row.get(token_id, 0) + 1
    if not tables[0]:
        raise EmptyCorpus("no document produced tokens")
    return NgramModel(order, alpha, vocab, tables)


def log_loss(model: NgramModel, text: str) -> float:
    """Mean per-token negative log probability of ``text``, in nats.

    The context is reset at every sentence boundary and the stop symbol
    is not scored, so the loss of concatenated sentences is exactly the
    token-weighted mean of the per-sentence losses.
    """
    total, count = 0.0, 0
    for sentence in split_sentences(text):
        tokens = tokenize(sentence)
        if not tokens:
            continue
        log_prob, n = model._sentence_log_prob(tokens)
        total += log_prob
        count += n
    if count == 0:
        raise EmptyText("log_loss needs at least one token")
    return -total / count


def total_log_prob(model: NgramModel, text: str) -> float:
    """Sum of per-token log probabilities of ``text``, in nats."""
    total, count = 0.0, 0
    for sentence in split_sentences(text):
        tokens = tokenize(sentence)
        if not tokens:
            continue
        log_prob, n = model._sentence_log_prob(tokens)
        total += log_prob
        count += n
    if count == 0:
        raise EmptyText("total_log_prob needs at least one token")
    return total


def save_model(model: NgramModel, path: str) -> None:
    """Persist as a JSON header line plus one (context, token, count)
    triple per line, contexts and tokens spelled as vocabulary strings."""
    with open(path, "w", encoding="utf-8") as handle:
        header = {
            "order": model.order,
            "alpha": model.alpha,
            "backoff": model.backoff,
            "tokens": model.vocab.index_to_token,
            "counts": model.vocab.counts,
        }
        handle.write(json.dumps(header, ensure_ascii=False) + "\n")
        for length, table in enumerate(model._packed):
            for context, (ids, counts, _total) in sorted(table.items()):
                context_tokens = [model.vocab.token(i) for i in context]
                for token_id, count in zip(ids.tolist(), counts.tolist()):
                    triple = [context_tokens, model.vocab.token(token_id), int(count)]
                    handle.write(json.dumps(triple, ensure_ascii=False) + "\n")


def load_model(path: str) -> NgramModel:
    with open(path, encoding="utf-8") as handle:
        header_line = handle.readline()
        if not header_line:
            raise DataError(f"{path}: empty model file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: bad header: {exc}") from exc
        if not isinstance(header, dict) or "order" not in header:
            raise DataError(f"{path}: missing model header")
        vocab = Vocabulary(header["tokens"], header["counts"])
        order = int(header["order"])
        tables: list[_ContextTable] = [{} for _ in range(order)]
        for line in handle:
            line = line.strip()
            if not line:
                continue
            context_tokens, token, count = json.loads(line)
            context = tuple(vocab.index(t) for t in context_tokens)
            row = tables[len(context)].setdefault(context, {})
            row[vocab.index(token)] = int(count)
        return NgramModel(
            order,
            float(header["alpha"]),
            vocab,
            tables,
            backoff=float(header.get("backoff", BACKOFF_FACTOR)),
        )
