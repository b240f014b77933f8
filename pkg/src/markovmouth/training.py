"""Pseudo log-likelihood: the exact objective, its stochastic estimator,
multi-token corruption, analytic gradients for the log-linear scorer, and a
plain-SGD trainer.

Gradients are hand-derived softmax calculus: each per-position term
contributes (onehot(x_t) - p(.|context)) pushed through the log-linear
feature map. Plain SGD, no momentum, so the finite-difference checks stay
tight and the whole run is deterministic under a fixed seed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .lexicon import Corpus, MaskedSequence, Sequence
from .scorers import LogLinearScorer, Scorer


class TrainingError(ValueError):
    pass


class TrainingDiverged(TrainingError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    mode: str = "exact_pll"  # exact_pll | stochastic_pll | multi_mask
    K: int = 1               # positions sampled per sequence (stochastic mode)
    mask_rate: float = 0.15  # multi_mask mode
    l2: float = 0.0

    def validate(self) -> None:
        problems = []
        if self.learning_rate <= 0:
            problems.append("learning_rate must be > 0")
        if self.epochs < 0:
            problems.append("epochs must be >= 0")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.mode not in ("exact_pll", "stochastic_pll", "multi_mask"):
            problems.append(f"unknown mode {self.mode!r}")
        if self.K < 1:
            problems.append("K must be >= 1")
        if not 0 < self.mask_rate < 1:
            problems.append("mask_rate must be in (0, 1)")
        if problems:
            raise TrainingError("; ".join(problems))


def _log_probs(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return z - np.log(np.exp(z).sum())


def pseudo_log_likelihood(scorer: Scorer, corpus: Corpus) -> float:
    """Exact PLL: mean over sentences of the summed per-position
    log-conditionals (no truncation)."""
    total = 0.0
    for seq in corpus:
        if any(int(x) >= scorer.vocab.size for x in seq):
            raise TrainingError(f"reserved symbol in training sentence {seq}")
        rows = np.asarray(scorer.logits_all(seq), dtype=float)
        z = rows - rows.max(axis=1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=1))
        total += float((z[np.arange(len(seq)), list(seq)] - lse).sum())
    return total / len(corpus)


def stochastic_pll_estimate(scorer: Scorer, seq: Sequence, K: int,
                            rng: np.random.Generator) -> float:
    """Average of K uniformly-sampled (with replacement) per-position terms.

    Estimates the per-position mean of the PLL inner sum, i.e. PLL-sum / T.
    """
    if K < 1:
        raise TrainingError("K must be >= 1")
    T = len(seq)
    total = 0.0
    for _ in range(K):
        t = int(rng.integers(T))
        logits = scorer.logits(MaskedSequence.mask(seq, t, scorer.vocab))
        total += float(_log_probs(np.asarray(logits, dtype=float))[int(seq[t])])
    return total / K


def corrupt_multi_mask(seq: Sequence, rate: float, rng: np.random.Generator,
                       mask_id: int):
    """Multi-token corruption: (corrupted sequence, [(position, original id)]).

    Each position is independently replaced by MASK with probability
    ``rate``; the draw repeats until at least one position is masked, since
    an uncorrupted sample carries no gradient."""
    if not 0 < rate < 1:
        raise TrainingError("rate must be in (0, 1)")
    T = len(seq)
    while True:
        pattern = rng.random(T) < rate
        if pattern.any():
            break
    targets = [(t, int(seq[t])) for t in range(T) if pattern[t]]
    masked = {t for t, _ in targets}
    corrupted = tuple(mask_id if t in masked else int(seq[t]) for t in range(T))
    return corrupted, targets


def pll_gradient(scorer: Scorer, batch, mode: str = "exact_pll",
                 rng: np.random.Generator | None = None,
                 K: int = 1, mask_rate: float = 0.15):
    """(objective value, gradient wrt flat parameters) for a batch.

    The objective is the batch-mean PLL term for the given mode; exact mode
    is deterministic, the other two select positions through ``rng`` and are
    unbiased in expectation.
    """
    if not isinstance(scorer, LogLinearScorer):
        raise TrainingError("gradient requires a trainable (log-linear) scorer")
    if not batch:
        raise TrainingError("empty batch")
    grad_bias = np.zeros_like(scorer.bias)
    grad_inter = np.zeros_like(scorer.interaction)
    value = 0.0

    def term(context_ids, t, target, weight):
        """One conditional term; context_ids already has slot t masked."""
        logits = scorer.bias.copy()
        if scorer.window > 0:
            for s, x in enumerate(context_ids):
                if s != t:
                    logits += scorer.interaction[x, :, scorer._offset_slot(s, t)]
        logp = _log_probs(logits)
        delta = -np.exp(logp)
        delta[target] += 1.0
        grad_bias[:] += weight * delta
        if scorer.window > 0:
            for s, x in enumerate(context_ids):
                if s != t:
                    grad_inter[x, :, scorer._offset_slot(s, t)] += weight * delta
        return weight * float(logp[target])

    mask_id = scorer.vocab.mask_id
    for seq in batch:
        seq = tuple(int(x) for x in seq)
        T = len(seq)
        if mode == "exact_pll":
            for t in range(T):
                ctx = seq[:t] + (mask_id,) + seq[t + 1:]
                value += term(ctx, t, seq[t], 1.0)
        elif mode == "stochastic_pll":
            if rng is None:
                raise TrainingError("stochastic mode requires an rng")
            for _ in range(K):
                t = int(rng.integers(T))
                ctx = seq[:t] + (mask_id,) + seq[t + 1:]
                value += term(ctx, t, seq[t], 1.0 / K)
        elif mode == "multi_mask":
            if rng is None:
                raise TrainingError("multi_mask mode requires an rng")
            corrupted, targets = corrupt_multi_mask(seq, mask_rate, rng, mask_id)
            for t, original in targets:
                value += term(corrupted, t, original, 1.0)
        else:
            raise TrainingError(f"unknown mode {mode!r}")

    n = len(batch)
    grad = np.concatenate([grad_bias, grad_inter.ravel()]) / n
    return value / n, grad


@dataclass
class TrainResult:
    trace: list            # per-epoch exact PLL, index 0 = before training
    parameters: np.ndarray
    wall_ms: list = field(default_factory=list)

    def trace_jsonl(self) -> str:
        lines = []
        for epoch, pll in enumerate(self.trace):
            ms = self.wall_ms[epoch] if epoch < len(self.wall_ms) else 0
            lines.append(json.dumps({"epoch": epoch, "pll": pll, "wall_ms": ms}))
        return "\n".join(lines) + "\n"


def train_pll(scorer: LogLinearScorer, corpus: Corpus, config: TrainConfig) -> TrainResult:
    """Plain-SGD ascent on the mode's PLL objective, deterministic per seed."""
    config.validate()
    if not isinstance(scorer, LogLinearScorer):
        raise TrainingError("training requires a trainable (log-linear) scorer")
    rng = np.random.default_rng(config.seed)
    sentences = list(corpus)
    trace = [pseudo_log_likelihood(scorer, corpus)]
    wall_ms = [0]
    for _ in range(config.epochs):
        start = time.monotonic()
        order = rng.permutation(len(sentences))
        for lo in range(0, len(sentences), config.batch_size):
            batch = [sentences[i] for i in order[lo:lo + config.batch_size]]
            _, grad = pll_gradient(
                scorer, batch, mode=config.mode, rng=rng,
                K=config.K, mask_rate=config.mask_rate,
            )
            if config.l2 > 0:
                grad = grad - config.l2 * scorer.parameters
            scorer.parameters = scorer.parameters + config.learning_rate * grad
        pll = pseudo_log_likelihood(scorer, corpus)
        if not np.isfinite(pll):
            raise TrainingDiverged(
                f"PLL became {pll} after epoch {len(trace)}; lower the learning rate"
            )
        trace.append(pll)
        wall_ms.append(int((time.monotonic() - start) * 1000))
    return TrainResult(trace=trace, parameters=scorer.parameters, wall_ms=wall_ms)
