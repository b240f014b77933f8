"""Masked-LM-as-MRF toolkit: a scorer-parameterized random field over
fixed-length token sequences, with pseudo-likelihood training, Gibbs /
sequential / parallel sampling, ranking, diversity metrics, and exact
desk-scale oracles."""

from .lexicon import (
    Corpus,
    MaskedSequence,
    Vocabulary,
    build_vocabulary,
    decode,
    encode,
)
from .mrf import (
    conditional,
    joint_probability,
    log_potential,
    partition_function_log,
    rank_sentences,
    unnormalized_log_joint,
)
from .scorers import ExternalScorer, LogLinearScorer, Scorer, TabularScorer, zero_scorer

__all__ = [
    "Corpus",
    "MaskedSequence",
    "Vocabulary",
    "build_vocabulary",
    "decode",
    "encode",
    "conditional",
    "joint_probability",
    "log_potential",
    "partition_function_log",
    "rank_sentences",
    "unnormalized_log_joint",
    "ExternalScorer",
    "LogLinearScorer",
    "Scorer",
    "TabularScorer",
    "zero_scorer",
]

__version__ = "0.1.0"
