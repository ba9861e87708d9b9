"""Small-scale test bench for detector evasion experiments.

Everything runs on n-gram language models and bag-of-words detectors,
so the full loop (generate, detect, reward, adapt, paraphrase) fits on
one machine with no external services.
"""

from .corpus import Document, Vocabulary, build_vocab, split_sentences, tokenize
from .decoding import GenerationConfig, generate
from .errors import EvadeError
from .ngram import NgramModel, train
from .rewards import RewardConfig, RewardEngine
from .shallow import NaiveBayesModel, evaluate, predict, train_nb

__version__ = "0.1.0"

__all__ = [
    "Document",
    "EvadeError",
    "GenerationConfig",
    "NaiveBayesModel",
    "NgramModel",
    "RewardConfig",
    "RewardEngine",
    "Vocabulary",
    "build_vocab",
    "evaluate",
    "generate",
    "predict",
    "split_sentences",
    "tokenize",
    "train",
    "train_nb",
    "__version__",
]
