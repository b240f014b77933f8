"""The random field itself: log-potentials, joints, conditionals, ranking.

The joint over fixed-length sequences is the product of per-position
potentials; each potential selects the logit of the sequence's own token
from the scorer run on the sequence with that position masked. A MASK
anywhere else zeroes the log-potential, so joints and ranking reject
sequences containing reserved symbols outright.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .lexicon import MaskedSequence, Sequence, Vocabulary
from .scorers import Scorer

ENUMERATION_CAP = 10_000_000


class MRFError(ValueError):
    pass


def _check_unreserved(seq: Sequence, vocab: Vocabulary, what: str) -> None:
    for pos, x in enumerate(seq, start=1):
        if int(x) >= vocab.size:
            raise MRFError(
                f"{what} undefined: reserved symbol {vocab.token_of(int(x))} at position {pos}"
            )


def log_potential(scorer: Scorer, seq: Sequence, t: int) -> float:
    """Per-position log-potential; ``t`` is 0-based.

    Returns exactly 0.0 when MASK occupies any other position; errors when
    the target itself is a reserved symbol (no output coordinate exists).
    """
    vocab = scorer.vocab
    if not 0 <= t < len(seq):
        raise MRFError(f"position {t} out of range for length {len(seq)}")
    if any(int(x) == vocab.mask_id for s, x in enumerate(seq) if s != t):
        return 0.0
    xt = int(seq[t])
    if xt >= vocab.size:
        raise MRFError(
            f"potential undefined for {vocab.token_of(xt)} target at position {t + 1}"
        )
    ms = MaskedSequence.mask(seq, t, vocab)
    return float(scorer.logits(ms)[xt])


def unnormalized_log_joint(scorer: Scorer, seq: Sequence) -> float:
    _check_unreserved(seq, scorer.vocab, "joint")
    total = 0.0
    for t in range(len(seq)):
        total += log_potential(scorer, seq, t)
    if not math.isfinite(total):
        raise MRFError("non-finite unnormalized log joint")
    return total


def all_sequences(vocab: Vocabulary, T: int, cap: int = ENUMERATION_CAP):
    """All M^T MASK-free sequences in lexicographic id order."""
    if vocab.size ** T > cap:
        raise MRFError(
            f"M^T = {vocab.size}^{T} exceeds the enumeration cap {cap}; "
            "exact enumeration is for oracle-scale use only"
        )
    return itertools.product(range(vocab.size), repeat=T)


def partition_function_log(scorer: Scorer, T: int, vocab: Vocabulary,
                           cap: int = ENUMERATION_CAP) -> float:
    """Exact log Z by enumeration, log-sum-exp stabilized."""
    scores = np.fromiter(
        (unnormalized_log_joint(scorer, seq) for seq in all_sequences(vocab, T, cap)),
        dtype=float,
        count=vocab.size ** T,
    )
    hi = scores.max()
    return float(hi + np.log(np.exp(scores - hi).sum()))


def joint_probability(scorer: Scorer, seq: Sequence, cap: int = ENUMERATION_CAP) -> float:
    log_z = partition_function_log(scorer, len(seq), scorer.vocab, cap)
    return float(math.exp(unnormalized_log_joint(scorer, seq) - log_z))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def truncate_top_k(probs: np.ndarray, k: int) -> np.ndarray:
    """Keep the k highest-probability entries (ties to lower id), renormalize."""
    m = len(probs)
    if k >= m:
        return probs
    # lexsort: primary key last; descending prob, then ascending id
    order = np.lexsort((np.arange(m), -probs))
    out = np.zeros_like(probs)
    keep = order[:k]
    out[keep] = probs[keep]
    return out / out.sum()


def conditional(scorer: Scorer, seq: Sequence, t: int, top_k: int | None = None) -> np.ndarray:
    """Softmax over V of the scorer's logits with slot ``t`` masked.

    ``seq`` may contain MASK at other positions (early sampling iterations
    condition on whatever populates the context). Reserved symbols never
    receive probability: the output has exactly M entries.
    """
    vocab = scorer.vocab
    if not 0 <= t < len(seq):
        raise MRFError(f"position {t} out of range for length {len(seq)}")
    if top_k is not None and not 1 <= top_k <= vocab.size:
        raise MRFError(f"top_k {top_k} outside 1..{vocab.size}")
    ms = MaskedSequence.mask(seq, t, vocab)
    probs = softmax(np.asarray(scorer.logits(ms), dtype=float))
    if top_k is not None:
        probs = truncate_top_k(probs, top_k)
    return probs


def rank_sentences(scorer: Scorer, seqs) -> list:
    """(sequence, unnormalized log-prob) pairs, best first; stable on ties.

    All sequences must share one length: the partition function differs by
    length, so cross-length comparison is undefined.
    """
    seqs = [tuple(s) for s in seqs]
    if not seqs:
        return []
    lengths = {len(s) for s in seqs}
    if len(lengths) > 1:
        raise MRFError(
            f"ranking requires a single fixed length, got lengths {sorted(lengths)}"
        )
    scored = [(s, unnormalized_log_joint(scorer, s)) for s in seqs]
    return sorted(scored, key=lambda pair: -pair[1])
