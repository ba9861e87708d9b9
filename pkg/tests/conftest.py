"""Shared fixtures: tiny corpora and models reused across test modules."""

from __future__ import annotations

import numpy as np
import pytest

from evadelab.corpus import Document
from evadelab.ngram import train


def make_doc(i: int, text: str, label: str = "human") -> Document:
    return Document(id=f"d{i}", text=text, label=label)


@pytest.fixture(scope="session")
def tiny_docs() -> list[Document]:
    texts = [
        "the cat sat on the mat .",
        "the dog sat on the rug .",
        "a cat ran to the dog .",
        "the mat was warm .",
        "a dog and a cat sat .",
    ]
    return [make_doc(i, t) for i, t in enumerate(texts)]


@pytest.fixture(scope="session")
def tiny_lm(tiny_docs):
    return train(tiny_docs, order=2, alpha=0.1)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
