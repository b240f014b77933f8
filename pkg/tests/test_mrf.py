import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from markovmouth.lexicon import MaskedSequence, Vocabulary
from markovmouth.mrf import (
    MRFError,
    conditional,
    joint_probability,
    log_potential,
    partition_function_log,
    rank_sentences,
    softmax,
    truncate_top_k,
    unnormalized_log_joint,
)
from markovmouth.scorers import TabularScorer, zero_scorer


def brute_unnormalized(scorer, seq):
    """Independent re-summation of per-position potentials."""
    total = 0.0
    vocab = scorer.vocab
    for t in range(len(seq)):
        ms = MaskedSequence.mask(seq, t, vocab)
        total += float(scorer.logits(ms)[seq[t]])
    return total


def test_log_potential_masked_target_errors(f2, vocab):
    with pytest.raises(MRFError, match="potential undefined"):
        log_potential(f2, (vocab.mask_id, 0), 0)


def test_log_potential_zero_branch(f2, vocab):
    # MASK at another position collapses the potential to exactly 0
    assert log_potential(f2, (0, vocab.mask_id), 0) == 0.0


def test_log_potential_table_lookup(vocab):
    scorer = TabularScorer(vocab, {(0, (1,)): np.array([0.5, -1.0, 2.0])})
    assert log_potential(scorer, (0, 1), 0) == 0.5
    assert log_potential(scorer, (2, 1), 0) == 2.0


def test_unnormalized_log_joint_single_term(f2):
    seq = (1,)
    assert unnormalized_log_joint(f2, seq) == log_potential(f2, seq, 0)


def test_unnormalized_log_joint_zero_scorer(f1):
    assert unnormalized_log_joint(f1, (0, 1)) == 0.0


def test_unnormalized_log_joint_vs_brute_force(f2):
    for seq in itertools.product(range(3), repeat=2):
        assert unnormalized_log_joint(f2, seq) == pytest.approx(
            brute_unnormalized(f2, seq), abs=1e-12
        )


def test_joint_rejects_mask(f2, vocab):
    with pytest.raises(MRFError):
        unnormalized_log_joint(f2, (0, vocab.mask_id))


def test_partition_single_token_vocab():
    v = Vocabulary(tokens=("only",))
    assert partition_function_log(zero_scorer(v), 3, v) == pytest.approx(0.0)


def test_partition_uniform(f1, vocab):
    assert partition_function_log(f1, 2, vocab) == pytest.approx(math.log(9))


def test_partition_vs_enumeration_oracle(f2, vocab):
    # independent enumeration in test code
    scores = [brute_unnormalized(f2, s) for s in itertools.product(range(3), repeat=2)]
    hi = max(scores)
    expected = hi + math.log(sum(math.exp(x - hi) for x in scores))
    assert partition_function_log(f2, 2, vocab) == pytest.approx(expected, abs=1e-12)
    # regression constant from the first verified run
    assert partition_function_log(f2, 2, vocab) == pytest.approx(2.26099736899976, abs=1e-10)


def test_partition_cap():
    v = Vocabulary(tokens=tuple(f"t{i}" for i in range(10)))
    with pytest.raises(MRFError, match="cap"):
        partition_function_log(zero_scorer(v), 9, v, cap=10**6)


def test_joint_probability_degenerate():
    v = Vocabulary(tokens=("only",))
    assert joint_probability(zero_scorer(v), (0, 0)) == pytest.approx(1.0)


def test_joint_probability_uniform(f1):
    assert joint_probability(f1, (1, 2)) == pytest.approx(1 / 9)


def test_joint_probability_sums_to_one(f2):
    total = sum(joint_probability(f2, s) for s in itertools.product(range(3), repeat=2))
    assert total == pytest.approx(1.0, abs=1e-10)


def test_joint_probability_vs_oracle(f2):
    scores = {s: brute_unnormalized(f2, s) for s in itertools.product(range(3), repeat=2)}
    z = sum(math.exp(x) for x in scores.values())
    assert joint_probability(f2, (0, 1)) == pytest.approx(math.exp(scores[(0, 1)]) / z)


def test_conditional_uniform(f1):
    assert np.allclose(conditional(f1, (0, 1), 0), [1 / 3, 1 / 3, 1 / 3])


def test_conditional_closed_form(vocab):
    scorer = TabularScorer(vocab, {(0, (0,)): np.array([0.0, 0.0, math.log(2)])})
    assert np.allclose(conditional(scorer, (1, 0), 0), [0.25, 0.25, 0.5])


def test_conditional_top_k_one(vocab):
    scorer = TabularScorer(vocab, {(0, (0,)): np.array([0.0, 0.0, math.log(2)])})
    assert np.allclose(conditional(scorer, (1, 0), 0, top_k=1), [0, 0, 1])


def test_top_k_tie_break_lower_id():
    probs = np.array([0.25, 0.25, 0.25, 0.25])
    out = truncate_top_k(probs, 2)
    assert np.allclose(out, [0.5, 0.5, 0.0, 0.0])


def test_top_k_equal_m_is_identity(f2):
    full = conditional(f2, (0, 1), 0, top_k=None)
    assert np.array_equal(conditional(f2, (0, 1), 0, top_k=3), full)


@given(st.lists(st.floats(-30, 30), min_size=2, max_size=50))
def test_softmax_normalization(logits):
    p = softmax(np.array(logits))
    assert abs(p.sum() - 1.0) < 1e-12
    assert (p >= 0).all()


@given(st.lists(st.floats(-30, 30), min_size=2, max_size=50), st.floats(-100, 100))
def test_softmax_shift_invariance(logits, c):
    a = softmax(np.array(logits))
    b = softmax(np.array(logits) + c)
    assert int(np.argmax(a)) == int(np.argmax(b))
    assert np.max(np.abs(a - b)) < 1e-12


def test_rank_single(f2):
    out = rank_sentences(f2, [(0, 1)])
    assert out == [((0, 1), unnormalized_log_joint(f2, (0, 1)))]


def test_rank_ties_stable(f1):
    seqs = [(1, 2), (0, 0), (2, 1)]
    out = rank_sentences(f1, seqs)
    assert [s for s, _ in out] == seqs


def test_rank_mixed_lengths_rejected(f2):
    with pytest.raises(MRFError, match="fixed length"):
        rank_sentences(f2, [(0, 1), (0, 1, 2)])


def test_rank_matches_exact_joint_order(f2):
    # Z cancels: unnormalized order == exact joint-probability order
    seqs = list(itertools.product(range(3), repeat=2))
    by_unnorm = [s for s, _ in rank_sentences(f2, seqs)]
    exact = sorted(seqs, key=lambda s: (-joint_probability(f2, s), seqs.index(s)))
    assert by_unnorm == exact


def test_log_potential_zero_with_stray_mask_all_positions(f2, vocab):
    seq = (0, vocab.mask_id, 2)
    for t in (0, 2):
        assert log_potential(f2, seq, t) == 0.0
