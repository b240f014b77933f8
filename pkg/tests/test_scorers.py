import json

import numpy as np
import pytest

from markovmouth.lexicon import MaskedSequence, Vocabulary
from markovmouth.scorers import (
    LogLinearScorer,
    TabularScorer,
    load_checkpoint,
    save_checkpoint,
    zero_scorer,
)


def test_tabular_lookup_and_default(vocab):
    row = np.array([0.5, -1.0, 2.0])
    scorer = TabularScorer(vocab, {(0, (1,)): row})
    hit = scorer.logits(MaskedSequence.mask((2, 1), 0, vocab))
    assert np.array_equal(hit, row)
    miss = scorer.logits(MaskedSequence.mask((2, 2), 0, vocab))
    assert np.array_equal(miss, np.zeros(3))


def test_mask_blindness_tabular(f2, vocab):
    # the pre-mask token at the target slot must be unobservable
    for original in range(vocab.size):
        ms = MaskedSequence.mask((original, 1), 0, vocab)
        assert np.array_equal(f2.logits(ms), f2.logits(MaskedSequence.mask((2, 1), 0, vocab)))


def test_mask_blindness_loglinear(loglinear, vocab):
    outs = [
        loglinear.logits(MaskedSequence.mask((0, x, 2), 1, vocab))
        for x in range(vocab.size)
    ]
    for o in outs[1:]:
        assert np.array_equal(o, outs[0])


def test_logits_all_matches_per_position(loglinear, vocab):
    seq = (0, 2, 1)
    rows = loglinear.logits_all(seq)
    for t in range(3):
        expected = loglinear.logits(MaskedSequence.mask(seq, t, vocab))
        assert np.allclose(rows[t], expected)


def test_loglinear_formula_by_hand(vocab):
    # w=1: logits[v] = bias[v] + sum_s A[x_s, v, clip(s-t)+1]
    rng = np.random.default_rng(3)
    scorer = LogLinearScorer(vocab, window=1)
    scorer.parameters = rng.standard_normal(scorer.parameters.shape)
    seq = (2, 0, 1, 2)
    t = 1
    expected = scorer.bias.copy()
    for s, x in enumerate(seq):
        if s == t:
            continue
        off = max(-1, min(1, s - t)) + 1
        expected = expected + scorer.interaction[x, :, off]
    ms = MaskedSequence.mask(seq, t, vocab)
    assert np.allclose(scorer.logits(ms), expected)


def test_loglinear_w0_is_unigram(vocab):
    scorer = LogLinearScorer(vocab, window=0)
    scorer.bias = np.array([1.0, -2.0, 0.5])
    for ctx in [(0, 0), (1, 2), (2, 1)]:
        ms = MaskedSequence.mask(ctx, 0, vocab)
        assert np.array_equal(scorer.logits(ms), scorer.bias)


def test_loglinear_checkpoint_round_trip(tmp_path, loglinear, vocab):
    path = tmp_path / "model.json"
    save_checkpoint(loglinear, path)
    loaded = load_checkpoint(path, vocab)
    rng = np.random.default_rng(0)
    for _ in range(100):
        T = int(rng.integers(2, 6))
        seq = tuple(int(i) for i in rng.integers(0, vocab.size, size=T))
        t = int(rng.integers(T))
        ms = MaskedSequence.mask(seq, t, vocab)
        assert np.array_equal(loaded.logits(ms), loglinear.logits(ms))


def test_checkpoint_format_is_flat_row_major(tmp_path, loglinear):
    path = tmp_path / "model.json"
    save_checkpoint(loglinear, path)
    obj = json.loads(path.read_text())
    assert obj["type"] == "loglinear"
    assert obj["w"] == loglinear.window
    assert obj["A"] == list(loglinear.interaction.ravel())


def test_tabular_checkpoint_round_trip(tmp_path, f2, vocab):
    path = tmp_path / "tab.json"
    save_checkpoint(f2, path)
    loaded = load_checkpoint(path, vocab)
    ms = MaskedSequence.mask((0, 1), 1, vocab)
    assert np.array_equal(loaded.logits(ms), f2.logits(ms))


def test_zero_scorer_uniform(vocab):
    z = zero_scorer(vocab)
    ms = MaskedSequence.mask((0, 1), 0, vocab)
    assert np.array_equal(z.logits(ms), np.zeros(3))


def test_parameters_round_trip(loglinear):
    theta = loglinear.parameters
    loglinear.parameters = theta * 2
    assert np.allclose(loglinear.parameters, theta * 2)
