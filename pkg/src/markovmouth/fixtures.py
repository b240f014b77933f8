"""Seeded desk-scale fixtures shared by the test suite and `oracle-check`.

F1: M=3, T=2, all-zero tabular scorer (the uniform field).
F2: M=3, T=2, tabular scorer with an explicit random table (seed 17)
    covering every context over V plus MASK, and a small 5-sentence corpus.
Log-linear fixtures: seeded random-parameter scorers at M=3 for kernel and
gradient checks.
"""

from __future__ import annotations

import itertools

import numpy as np

from .lexicon import Corpus, Vocabulary
from .scorers import LogLinearScorer, TabularScorer, zero_scorer

ABC_VOCAB = Vocabulary(tokens=("a", "b", "c"))


def fixture_f1() -> TabularScorer:
    return zero_scorer(ABC_VOCAB)


def fixture_f2(T: int = 2) -> TabularScorer:
    """Random tabular scorer, seed 17, every context over V ∪ {MASK} filled."""
    vocab = ABC_VOCAB
    rng = np.random.default_rng(17)
    context_alphabet = list(range(vocab.size)) + [vocab.mask_id]
    table = {}
    for t in range(T):
        for ctx in itertools.product(context_alphabet, repeat=T - 1):
            table[(t, ctx)] = rng.standard_normal(vocab.size)
    return TabularScorer(vocab, table)


def fixture_f2_corpus() -> Corpus:
    sentences = ((0, 1), (1, 2), (2, 0), (0, 0), (1, 1))
    return Corpus(sentences=sentences, source="fixture:f2")


def fixture_loglinear(seed: int = 0, T_window: int = 1, scale: float = 0.5) -> LogLinearScorer:
    vocab = ABC_VOCAB
    rng = np.random.default_rng(seed)
    scorer = LogLinearScorer(vocab, window=T_window)
    scorer.parameters = scale * rng.standard_normal(scorer.parameters.shape)
    return scorer


FIXTURES = {
    "f1": lambda: ("tabular", fixture_f1(), 2),
    "f2": lambda: ("tabular", fixture_f2(), 2),
    "loglinear-1": lambda: ("loglinear", fixture_loglinear(1), 3),
    "loglinear-2": lambda: ("loglinear", fixture_loglinear(2), 3),
    "loglinear-3": lambda: ("loglinear", fixture_loglinear(3), 3),
    "loglinear-4": lambda: ("loglinear", fixture_loglinear(4), 3),
    "loglinear-5": lambda: ("loglinear", fixture_loglinear(5), 3),
}


def load_fixture(name: str):
    """(kind, scorer, default T) for a named fixture."""
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
