"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (run with -s or check captured output). Tolerances are fixed
here, not configurable."""

import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from markovmouth import cli, evalkit, oracle, samplers
from markovmouth.fixtures import (
    ABC_VOCAB,
    fixture_f1,
    fixture_f2,
    fixture_f2_corpus,
    fixture_loglinear,
    load_fixture,
)
from markovmouth.lexicon import Corpus, Vocabulary
from markovmouth.mrf import conditional, rank_sentences
from markovmouth.scorers import ExternalScorer, LogLinearScorer, zero_scorer
from markovmouth.training import TrainConfig, pll_gradient, pseudo_log_likelihood, \
    stochastic_pll_estimate, train_pll

ZERO_SERVER = Path(__file__).resolve().parent.parent / "scripts" / "zero_scorer_server.py"


def report(criterion, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion} failed: {detail}"


def test_criterion_1_gibbs_kernel_correctness():
    scorer = fixture_loglinear(seed=1)
    vocab = scorer.vocab
    T = 3
    start = time.monotonic()
    kernel = oracle.gibbs_transition_matrix(
        oracle.scorer_conditional_fn(scorer, top_k=None), T, vocab)
    pi = oracle.stationary_distribution(kernel)
    steps = 200_000
    config = samplers.SamplerConfig(
        iterations=500 + steps, burn_in=500, thinning=1, top_k=None,
        chains=1, init="random_tokens", seed=404)
    samples, _ = samplers.run_gibbs(scorer, config, T)
    emp = oracle.empirical_distribution([s.ids for s in samples], pi.states)
    tv = oracle.total_variation(emp, pi)
    elapsed = time.monotonic() - start
    report(1, tv <= 0.02 and elapsed <= 60,
           f"TV(empirical, stationary) = {tv:.5f} (<= 0.02), {elapsed:.1f}s (<= 60s)")


def test_criterion_2_gibbs_on_exact_conditionals():
    worst = 0.0
    for name in ("f2", "loglinear-1", "loglinear-2"):
        _, scorer, T = load_fixture(name)
        joint = oracle.enumerate_joint(scorer, T, scorer.vocab)
        kernel = oracle.gibbs_transition_matrix(
            oracle.joint_conditional_fn(joint), T, scorer.vocab)
        pi = oracle.stationary_distribution(kernel)
        worst = max(worst, oracle.total_variation(pi, joint))
    report(2, worst <= 1e-8, f"max TV(stationary, joint) = {worst:.2e} (<= 1e-8)")


def test_criterion_3_conditional_vs_joint_discrepancy_report():
    names = ["f2", "loglinear-1", "loglinear-2", "loglinear-3", "loglinear-4"]
    values = {}
    for name in names:
        _, scorer, T = load_fixture(name)
        kernel = oracle.gibbs_transition_matrix(
            oracle.scorer_conditional_fn(scorer), T, scorer.vocab)
        pi = oracle.stationary_distribution(kernel)
        joint = oracle.enumerate_joint(scorer, T, scorer.vocab)
        values[name] = oracle.total_variation(pi, joint)
    detail = ", ".join(f"{k}={v:.4f}" for k, v in values.items())
    # reported, not asserted: the conditional-softmax kernel's stationary law
    # need not equal the joint for a general scorer
    report(3, all(0.0 <= v <= 1.0 for v in values.values()),
           f"TV(conditional-kernel stationary, joint) emitted: {detail}")


def test_criterion_4_gradient_check():
    rng = np.random.default_rng(77)
    corpus = list(fixture_f2_corpus())
    start = time.monotonic()
    worst = 0.0
    h = 1e-5
    for _ in range(10):
        scorer = LogLinearScorer(ABC_VOCAB, window=1)
        scorer.parameters = 0.5 * rng.standard_normal(scorer.parameters.shape)
        _, analytic = pll_gradient(scorer, corpus, mode="exact_pll")
        theta = scorer.parameters.copy()
        numeric = np.zeros_like(theta)
        wrapped = Corpus(tuple(corpus))
        for i in range(len(theta)):
            bump = np.zeros_like(theta)
            bump[i] = h
            scorer.parameters = theta + bump
            hi = pseudo_log_likelihood(scorer, wrapped)
            scorer.parameters = theta - bump
            lo = pseudo_log_likelihood(scorer, wrapped)
            numeric[i] = (hi - lo) / (2 * h)
        scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / scale)))
    elapsed = time.monotonic() - start
    report(4, worst <= 1e-5 and elapsed <= 10,
           f"max relative error {worst:.2e} (<= 1e-5), {elapsed:.1f}s (<= 10s)")


def test_criterion_5_training_recovery():
    vocab = Vocabulary(tokens=tuple("abcdefghij"))
    probs = np.arange(1, 11, dtype=float)
    probs /= probs.sum()
    rng = np.random.default_rng(2024)
    length = 8
    sentences = tuple(
        tuple(int(i) for i in rng.choice(10, size=length, p=probs))
        for _ in range(10_000)
    )
    corpus = Corpus(sentences)
    scorer = LogLinearScorer(vocab, window=0)
    result = train_pll(scorer, corpus, TrainConfig(
        learning_rate=0.5, epochs=20, batch_size=100, seed=0))
    per_token = result.trace[-1] / length
    entropy = -float(np.sum(probs * np.log(probs)))
    gap = abs(per_token + entropy)
    report(5, gap < 0.05,
           f"per-token PLL {per_token:.4f} vs -H = {-entropy:.4f}, gap {gap:.4f} (< 0.05)")


def test_criterion_6_ranking_consistency():
    ok = True
    for name in ("f1", "f2", "loglinear-1", "loglinear-2", "loglinear-3",
                 "loglinear-4", "loglinear-5"):
        _, scorer, T = load_fixture(name)
        joint = oracle.enumerate_joint(scorer, T, scorer.vocab)
        seqs = list(joint.states)
        ranked = [s for s, _ in rank_sentences(scorer, seqs)]
        exact = [s for _, s in sorted(
            ((-joint.prob_of(s), s) for s in seqs),
            key=lambda pair: (pair[0], seqs.index(pair[1])))]
        ok = ok and ranked == exact
    report(6, ok, "rank_sentences order equals exact joint-probability order "
                  "(tie-aware) on every enumerable fixture")


def test_criterion_7_stochastic_estimator():
    scorer = fixture_f2()
    seq = (0, 1)
    exact_mean = pseudo_log_likelihood(scorer, Corpus((seq,))) / len(seq)
    rng = np.random.default_rng(31337)
    draws = np.array([stochastic_pll_estimate(scorer, seq, 1, rng)
                      for _ in range(10_000)])
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    gap = abs(float(draws.mean()) - exact_mean)
    report(7, gap <= 3 * se,
           f"|mean - exact PLL/T| = {gap:.5f} <= 3 SE = {3 * se:.5f}")


def test_criterion_8_metric_degeneracies():
    same = [list("abcd"), list("efgh")]
    identical = [list("abcd")] * 5
    disjoint_gen = [["a", "b", "c"]]
    disjoint_ref = [["x", "y", "z"]]
    hand = evalkit.corpus_bleu([["a", "b", "c", "d"]], [["a", "b", "c", "d", "e"]])
    checks = {
        "self_bleu identical = 100": evalkit.self_bleu(identical) == pytest.approx(100.0),
        "corpus_bleu(c, c) = 100": evalkit.corpus_bleu(same, same) == pytest.approx(100.0),
        "disjoint unique = 100": evalkit.unique_ngram_pct(disjoint_gen, disjoint_ref, 2) == 100.0,
        "hand BLEU 77.88": abs(hand - 77.88) <= 0.01,
    }
    report(8, all(checks.values()),
           "; ".join(f"{k}: {'ok' if v else 'FAIL'}" for k, v in checks.items()))


def test_criterion_9_sample_determinism(tmp_path):
    vocab_path = tmp_path / "vocab.json"
    ABC_VOCAB.save(vocab_path)

    def run(name):
        out = tmp_path / name
        rc = cli.main([
            "sample", "--scorer", "fixture:loglinear-1", "--vocab", str(vocab_path),
            "--scheme", "gibbs", "--length", "3", "--count", "40",
            "--chains", "4", "--burn-in", "20", "--thinning", "2",
            "--top-k", "0", "--seed", "1234", "--out", str(out),
        ])
        assert rc == 0
        return out.read_bytes()

    first, second = run("a.jsonl"), run("b.jsonl")
    chains = {json.loads(l)["chain"] for l in first.decode().splitlines()}
    report(9, first == second and chains == {0, 1, 2, 3},
           f"two runs byte-identical ({len(first)} bytes), chains {sorted(chains)} all present")


def test_criterion_10_scheme_coverage():
    scorer = fixture_loglinear(seed=1)
    mask_id = scorer.vocab.mask_id
    seq_cfg = samplers.SamplerConfig(scheme="sequential", top_k=None,
                                     init="all_mask", passes=1, seed=0)
    seq_out = samplers.sequential_sample(scorer, seq_cfg, 6)
    par_cfg = samplers.SamplerConfig(scheme="parallel", top_k=None,
                                     init="all_mask", iterations=2, seed=0)
    par_out = samplers.run_parallel(scorer, par_cfg, 6)
    detected = 0
    for seed in range(100):
        cfg = samplers.SamplerConfig(scheme="parallel", top_k=None,
                                     init="all_mask", seed=seed)
        found, _, _ = samplers.detect_parallel_cycle(scorer, cfg, 3, max_steps=100)
        detected += found
    ok = mask_id not in seq_out and mask_id not in par_out and detected >= 90
    report(10, ok,
           f"sequential/parallel outputs MASK-free; fixed point or cycle detected "
           f"in {detected}/100 seeded runs (>= 90)")


def test_criterion_11_wire_cross_implementation():
    endpoint = f"cmd:{sys.executable} {ZERO_SERVER} --tokens a,b,c"
    external = ExternalScorer(endpoint, ABC_VOCAB)
    builtin = zero_scorer(ABC_VOCAB)
    ok = True
    for seq, t in [((0, 1), 0), ((2, 0, 1), 2), ((1, 1, 1, 1), 1)]:
        a = conditional(external, seq, t, top_k=None)
        b = conditional(builtin, seq, t, top_k=None)
        ok = ok and a.tobytes() == b.tobytes()
    external.close()
    report(11, ok, "zero-logit echo server matches built-in zero scorer "
                   "bit-for-bit through the full client path")


def test_criterion_11_bridge_selftest():
    bridge_dir = Path(__file__).resolve().parent.parent / "bridge"
    if not (bridge_dir / "src").exists():
        pytest.skip("bridge package not present in this checkout")
    import subprocess
    proc = subprocess.run(
        [sys.executable, "-m", "bertbridge.server", "--selftest"],
        capture_output=True, text=True,
        env={**os.environ, "PYTHONPATH": str(bridge_dir / "src")},
    )
    report(11, proc.returncode == 0,
           f"bridge transcript self-test exit {proc.returncode}: "
           f"{proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()}")


@pytest.mark.skipif(os.environ.get("MARKOVMOUTH_HEAVY") != "1",
                    reason="pretrained-model generation study needs downloaded "
                           "weights and hours of sampling; run "
                           "scripts/pretrained_generation_study.py with "
                           "MARKOVMOUTH_HEAVY=1")
def test_criterion_12_pretrained_generation_study():
    pytest.fail("invoke scripts/pretrained_generation_study.py manually; see README")
