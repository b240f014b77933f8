"""Generation procedures: random-scan Gibbs, ordered sweeps, all-at-once.

All randomness flows through per-chain numpy Generators derived from
(seed, chain index), so a single seed reproduces every chain byte-for-byte
regardless of execution interleaving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lexicon import Corpus, MaskedSequence, Sequence, Vocabulary
from .mrf import conditional, softmax, truncate_top_k
from .scorers import Scorer


class SamplerError(ValueError):
    pass


@dataclass
class SamplerConfig:
    scheme: str = "gibbs"  # gibbs | sequential | parallel
    iterations: int = 5500
    burn_in: int = 500
    thinning: int = 10
    top_k: int | None = 100
    chains: int = 1
    init: str = "all_mask"  # all_mask | random_tokens | from_corpus
    seed: int = 0
    passes: int = 1  # sequential scheme only

    def validate(self, vocab_size: int | None = None) -> None:
        problems = []
        if self.scheme not in ("gibbs", "sequential", "parallel"):
            problems.append(f"unknown scheme {self.scheme!r}")
        if self.thinning < 1:
            problems.append("thinning must be >= 1")
        if self.chains < 1:
            problems.append("chains must be >= 1")
        if self.passes < 1:
            problems.append("passes must be >= 1")
        if self.burn_in >= self.iterations:
            problems.append("burn_in must be < iterations")
        if self.init not in ("all_mask", "random_tokens", "from_corpus"):
            problems.append(f"unknown init {self.init!r}")
        if self.top_k is not None:
            if self.top_k < 1:
                problems.append("top_k must be >= 1")
            elif vocab_size is not None and self.top_k > vocab_size:
                problems.append(f"top_k {self.top_k} exceeds vocabulary size {vocab_size}")
        if problems:
            raise SamplerError("; ".join(problems))


@dataclass
class ChainState:
    current: tuple
    iteration: int
    rng: np.random.Generator
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class Sample:
    chain: int
    iteration: int
    ids: tuple


def chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, chain_index)))


def sample_token(dist: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw over token ids in ascending id order."""
    dist = np.asarray(dist, dtype=float)
    total = dist.sum()
    if abs(total - 1.0) > 1e-9:
        raise SamplerError(f"distribution sums to {total}, not 1")
    cdf = np.cumsum(dist)
    cdf[-1] = 1.0
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def init_sequence(strategy: str, T: int, vocab: Vocabulary,
                  rng: np.random.Generator, corpus: Corpus | None = None) -> tuple:
    if strategy == "all_mask":
        return (vocab.mask_id,) * T
    if strategy == "random_tokens":
        return tuple(int(i) for i in rng.integers(0, vocab.size, size=T))
    if strategy == "from_corpus":
        if corpus is None:
            raise SamplerError("from_corpus init requires a corpus")
        candidates = [s for s in corpus if len(s) == T]
        if not candidates:
            raise SamplerError(f"corpus has no sentence of length {T}")
        return tuple(candidates[int(rng.integers(len(candidates)))])
    raise SamplerError(f"unknown init strategy {strategy!r}")


def gibbs_step(scorer: Scorer, state: ChainState, config: SamplerConfig) -> ChainState:
    """Resample one uniformly chosen slot from its conditional."""
    ids = state.current
    t = int(state.rng.integers(len(ids)))
    dist = conditional(scorer, ids, t, top_k=config.top_k)
    new_token = sample_token(dist, state.rng)
    state.current = ids[:t] + (new_token,) + ids[t + 1:]
    state.iteration += 1
    return state


def run_gibbs(scorer: Scorer, config: SamplerConfig, T: int,
              corpus: Corpus | None = None):
    """Multi-chain random-scan Gibbs with burn-in and thinning.

    Returns (samples, withheld): samples are MASK-free generations in
    (chain, iteration) order; withheld counts samples that still contained
    MASK at emission time (possible early from all-mask init) and were
    flagged instead of emitted.
    """
    config.validate(scorer.vocab.size)
    samples: list = []
    withheld: list = []
    for c in range(config.chains):
        rng = chain_rng(config.seed, c)
        state = ChainState(
            current=init_sequence(config.init, T, scorer.vocab, rng, corpus),
            iteration=0,
            rng=rng,
        )
        for i in range(1, config.iterations + 1):
            gibbs_step(scorer, state, config)
            if i > config.burn_in and (i - config.burn_in) % config.thinning == 0:
                if scorer.vocab.mask_id in state.current:
                    withheld.append(Sample(chain=c, iteration=i, ids=state.current))
                else:
                    samples.append(Sample(chain=c, iteration=i, ids=state.current))
    return samples, withheld


def sequential_sample(scorer: Scorer, config: SamplerConfig, T: int,
                      rng: np.random.Generator | None = None,
                      corpus: Corpus | None = None) -> tuple:
    """Left-to-right sweeps: mask slot t, sample, substitute, t = 1..T."""
    if rng is None:
        rng = chain_rng(config.seed, 0)
    ids = init_sequence(config.init, T, scorer.vocab, rng, corpus)
    for _ in range(config.passes):
        for t in range(T):
            dist = conditional(scorer, ids, t, top_k=config.top_k)
            ids = ids[:t] + (sample_token(dist, rng),) + ids[t + 1:]
    return ids


def parallel_step(scorer: Scorer, ids: tuple, rng: np.random.Generator,
                  config: SamplerConfig) -> tuple:
    """Resample every position at once from its own-slot-masked conditional."""
    rows = scorer.logits_all(ids)
    out = []
    for t in range(len(ids)):
        probs = softmax(np.asarray(rows[t], dtype=float))
        if config.top_k is not None and config.top_k < scorer.vocab.size:
            probs = truncate_top_k(probs, config.top_k)
        out.append(sample_token(probs, rng))
    return tuple(out)


def run_parallel(scorer: Scorer, config: SamplerConfig, T: int,
                 rng: np.random.Generator | None = None,
                 corpus: Corpus | None = None) -> tuple:
    """Apply parallel steps ``config.iterations`` times from the init state."""
    if rng is None:
        rng = chain_rng(config.seed, 0)
    ids = init_sequence(config.init, T, scorer.vocab, rng, corpus)
    for _ in range(config.iterations):
        ids = parallel_step(scorer, ids, rng, config)
    return ids


def detect_parallel_cycle(scorer: Scorer, config: SamplerConfig, T: int,
                          max_steps: int = 100,
                          corpus: Corpus | None = None):
    """Run parallel steps until a state repeats (fixed point or cycle).

    Returns (found, step, cycle_length); found is False when no state
    recurred within max_steps.
    """
    rng = chain_rng(config.seed, 0)
    ids = init_sequence(config.init, T, scorer.vocab, rng, corpus)
    seen = {ids: 0}
    for step in range(1, max_steps + 1):
        ids = parallel_step(scorer, ids, rng, config)
        if ids in seen:
            return True, step, step - seen[ids]
        seen[ids] = step
    return False, max_steps, 0
