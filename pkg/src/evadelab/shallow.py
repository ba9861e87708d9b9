"""Bag-of-words multinomial Naive Bayes detector.

Features are raw token counts against a fixed vocabulary; unknown tokens
fall into the ⟨unk⟩ bucket. All arithmetic happens in log space and the
verdict score is the machine-vs-human log-odds, which for two classes
equals ln(p_machine / (1 − p_machine)) exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import Document, Vocabulary, build_vocab, tokenize
from .errors import ConfigError, EmptyText, MissingClass

CLASSES = ("human", "machine")


@dataclass
class DetectionVerdict:
    p_machine: float
    label: str
    score: float


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float


class NaiveBayesModel:
    """Immutable after training; predictions are pure reads."""

    def __init__(
        self,
        vocab: Vocabulary,
        alpha: float,
        class_counts: dict[str, np.ndarray],
        class_docs: dict[str, int],
        threshold: float = 0.5,
    ):
        if alpha <= 0:
            raise ConfigError("smoothing constant must be positive")
        self.vocab = vocab
        self.alpha = alpha
        self.class_counts = class_counts
        self.class_docs = class_docs
        self.threshold = threshold
        total_docs = sum(class_docs[c] for c in CLASSES)
        size = len(vocab)
        self.log_priors = {
            c: float(np.log(class_docs[c] / total_docs)) for c in CLASSES
        }
        self.log_likelihoods = {}
        for c in CLASSES:
            counts = class_counts[c]
            self.log_likelihoods[c] = np.log(counts + alpha) - np.log(
                counts.sum() + alpha * size
            )

    def _features(self, text: str) -> np.ndarray:
        tokens = tokenize(text)
        if not tokens:
            raise EmptyText("cannot classify empty text")
        ids = np.asarray(self.vocab.encode(tokens), dtype=np.int64)
        return np.bincount(ids, minlength=len(self.vocab)).astype(np.float64)

    def log_posterior(self, text: str) -> dict[str, float]:
        feats = self._features(text)
        return {
            c: self.log_priors[c] + float(feats @ self.log_likelihoods[c])
            for c in CLASSES
        }


def train_nb(
    docs: list[Document], alpha: float, vocab: Vocabulary | None = None
) -> NaiveBayesModel:
    """Add-α estimates from class-conditional token counts."""
    labeled = [d for d in docs if d.label in CLASSES]
    present = {d.label for d in labeled}
    if present != set(CLASSES):
        raise MissingClass(f"need both classes, got {sorted(present)}")
    if vocab is None:
        vocab = build_vocab(labeled, min_count=1)
    size = len(vocab)
    class_counts = {c: np.zeros(size, dtype=np.float64) for c in CLASSES}
    class_docs = {c: 0 for c in CLASSES}
    for doc in labeled:
        class_docs[doc.label] += 1
        ids = np.asarray(vocab.encode(tokenize(doc.text)), dtype=np.int64)
        if ids.size:
            class_counts[doc.label] += np.bincount(ids, minlength=size)
    return NaiveBayesModel(vocab, alpha, class_counts, class_docs)


def predict(model: NaiveBayesModel, text: str) -> DetectionVerdict:
    posts = model.log_posterior(text)
    gap = posts["machine"] - posts["human"]
    # logistic of the log-odds, stable on both tails
    if gap >= 0:
        p_machine = 1.0 / (1.0 + np.exp(-gap))
    else:
        e = np.exp(gap)
        p_machine = e / (1.0 + e)
    label = "machine" if p_machine >= model.threshold else "human"
    return DetectionVerdict(float(p_machine), label, float(gap))


def evaluate(model: NaiveBayesModel, docs: list[Document]) -> Metrics:
    """Confusion-matrix metrics with machine as the positive class."""
    labeled = [d for d in docs if d.label in CLASSES]
    present = {d.label for d in labeled}
    if present != set(CLASSES):
        raise MissingClass(f"need both classes, got {sorted(present)}")
    tp = fp = tn = fn = 0
    for doc in labeled:
        predicted = predict(model, doc.text).label
        if doc.label == "machine":
            tp += predicted == "machine"
            fn += predicted == "human"
        else:
            fp += predicted == "machine"
            tn += predicted == "human"
    total = tp + fp + tn + fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics((tp + tn) / total, precision, recall, f1)


def save_nb(model: NaiveBayesModel, path: str) -> None:
    payload = {
        "alpha": model.alpha,
        "threshold": model.threshold,
        "tokens": model.vocab.index_to_token,
        "vocab_counts": model.vocab.counts,
        "class_docs": model.class_docs,
        "class_counts": {c: model.class_counts[c].tolist() for c in CLASSES},
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, ensure_ascii=False)
        handle.write("\n")


def load_nb(path: str) -> NaiveBayesModel:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    vocab = Vocabulary(payload["tokens"], payload["vocab_counts"])
    class_counts = {
        c: np.asarray(payload["class_counts"][c], dtype=np.float64) for c in CLASSES
    }
    return NaiveBayesModel(
        vocab,
        float(payload["alpha"]),
        class_counts,
        {c: int(payload["class_docs"][c]) for c in CLASSES},
        threshold=float(payload.get("threshold", 0.5)),
    )
