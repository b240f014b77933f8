"""Brute-force ground truth for desk-scale instances.

Everything here enumerates the full M^T state space: exact joints, exact
Gibbs kernels, stationary distributions by power iteration, and total
variation. Shipped in the library so acceptance checks run anywhere, but
capped hard so nobody points it at a real model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lexicon import Vocabulary
from .mrf import all_sequences, conditional, unnormalized_log_joint
from .scorers import Scorer

KERNEL_STATE_CAP = 4096


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class DistributionTable:
    """All M^T MASK-free states in lexicographic id order, with probabilities."""

    states: tuple
    probs: np.ndarray

    def __post_init__(self):
        if len(self.states) != len(self.probs):
            raise OracleError("states and probs length mismatch")
        if np.any(self.probs < -1e-15):
            raise OracleError("negative probability in table")
        if abs(float(self.probs.sum()) - 1.0) > 1e-10:
            raise OracleError(f"probabilities sum to {self.probs.sum()}, not 1")

    def index_of(self, state) -> int:
        state = tuple(state)
        # lexicographic order == base-M integer value of the id tuple
        T = len(self.states[0])
        M = round(len(self.states) ** (1.0 / T))
        idx = 0
        for x in state:
            idx = idx * M + int(x)
        return idx

    def prob_of(self, state) -> float:
        return float(self.probs[self.index_of(state)])

    def to_json(self) -> str:
        return json.dumps({
            "states": [list(s) for s in self.states],
            "probs": [float(p) for p in self.probs],
        })


@dataclass(frozen=True)
class TransitionMatrix:
    matrix: np.ndarray  # dense row-stochastic, canonical state order
    states: tuple

    def __post_init__(self):
        n = len(self.states)
        if self.matrix.shape != (n, n):
            raise OracleError("transition matrix shape mismatch")
        rows = self.matrix.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-10):
            raise OracleError("transition matrix rows must sum to 1")


def _enumerate_states(vocab: Vocabulary, T: int, cap: int):
    if vocab.size ** T > cap:
        raise OracleError(
            f"M^T = {vocab.size}^{T} exceeds the oracle cap {cap}"
        )
    return tuple(all_sequences(vocab, T))


def enumerate_joint(scorer: Scorer, T: int, vocab: Vocabulary,
                    cap: int = 10_000_000) -> DistributionTable:
    """Exact normalized joint over all M^T sequences."""
    states = _enumerate_states(vocab, T, cap)
    scores = np.array([unnormalized_log_joint(scorer, s) for s in states])
    hi = scores.max()
    weights = np.exp(scores - hi)
    return DistributionTable(states=states, probs=weights / weights.sum())


def scorer_conditional_fn(scorer: Scorer, top_k: int | None = None):
    """Conditionals as the samplers see them: softmax of masked-slot logits."""
    def fn(state, t):
        return conditional(scorer, state, t, top_k=top_k)
    return fn


def joint_conditional_fn(table: DistributionTable):
    """Exact conditionals by fiber renormalization of an enumerated joint."""
    T = len(table.states[0])
    M = round(len(table.states) ** (1.0 / T))

    def fn(state, t):
        state = tuple(state)
        fiber = np.array([
            table.prob_of(state[:t] + (v,) + state[t + 1:]) for v in range(M)
        ])
        total = fiber.sum()
        if total <= 0:
            raise OracleError(f"zero-mass fiber at position {t} of state {state}")
        return fiber / total
    return fn


def gibbs_transition_matrix(conditional_fn, T: int, vocab: Vocabulary,
                            cap: int = KERNEL_STATE_CAP) -> TransitionMatrix:
    """Random-scan kernel: pick a slot uniformly, resample from its conditional.

    P(X -> X') = (1/T) * sum over t of [X' agrees with X off t] * p(x'_t | rest).
    ``conditional_fn(state, t)`` supplies the per-slot distribution, so the
    same construction serves both scorer-derived and joint-derived kernels.
    """
    states = _enumerate_states(vocab, T, cap)
    M = vocab.size
    n = len(states)
    index = {s: i for i, s in enumerate(states)}
    P = np.zeros((n, n))
    for i, state in enumerate(states):
        for t in range(T):
            dist = conditional_fn(state, t)
            for v in range(M):
                j = index[state[:t] + (v,) + state[t + 1:]]
                P[i, j] += dist[v] / T
    return TransitionMatrix(matrix=P, states=states)


def stationary_distribution(P: TransitionMatrix, tol: float = 1e-10,
                            max_iterations: int = 1_000_000) -> DistributionTable:
    """Power iteration from uniform until the L1 residual drops below tol."""
    n = len(P.states)
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iterations):
        nxt = pi @ P.matrix
        residual = np.abs(nxt - pi).sum()
        pi = nxt
        if residual <= tol:
            pi = pi / pi.sum()
            return DistributionTable(states=P.states, probs=pi)
    raise OracleError(f"power iteration did not converge; residual {residual:.3e}")


def empirical_distribution(samples, states) -> DistributionTable:
    """Normalized visit counts of sampled states over the canonical order."""
    index = {s: i for i, s in enumerate(states)}
    counts = np.zeros(len(states))
    for s in samples:
        counts[index[tuple(s)]] += 1
    total = counts.sum()
    if total == 0:
        raise OracleError("no samples")
    return DistributionTable(states=tuple(states), probs=counts / total)


def total_variation(p: DistributionTable, q: DistributionTable) -> float:
    if p.states != q.states:
        raise OracleError("distribution tables use different state orders")
    return float(0.5 * np.abs(p.probs - q.probs).sum())
