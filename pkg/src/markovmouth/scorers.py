"""Pluggable scorers realizing the logit function behind the random field.

A scorer maps (masked sequence, position) to M finite logits over the output
alphabet. Reserved symbols may appear in the *input* context but never have
an output coordinate. Because scorers only ever see the masked sequence, the
original token under the mask cannot influence the output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lexicon import MaskedSequence, Sequence, Vocabulary


class ScorerError(ValueError):
    pass


class Scorer:
    """Interface: subclasses provide ``logits``; ``logits_all`` masks each slot."""

    vocab: Vocabulary

    def logits(self, ms: MaskedSequence) -> np.ndarray:
        raise NotImplementedError

    def logits_all(self, ids: Sequence) -> np.ndarray:
        """T x M logits; row t is the logit vector with slot t masked."""
        rows = [
            self.logits(MaskedSequence.mask(ids, t, self.vocab))
            for t in range(len(ids))
        ]
        return np.stack(rows)


class TabularScorer(Scorer):
    """Exhaustively parameterized scorer for oracle-scale tests.

    ``table`` maps (position, context-ids-excluding-position) to an M-vector
    of logits; missing entries are all-zero.
    """

    def __init__(self, vocab: Vocabulary, table: dict | None = None, max_entries: int = 1_000_000):
        self.vocab = vocab
        self.table = dict(table or {})
        if len(self.table) > max_entries:
            raise ScorerError(f"tabular scorer exceeds {max_entries} entries")
        for key, row in self.table.items():
            if len(row) != vocab.size:
                raise ScorerError(f"table row for {key} has {len(row)} logits, want {vocab.size}")

    def logits(self, ms: MaskedSequence) -> np.ndarray:
        context = tuple(x for s, x in enumerate(ms.ids) if s != ms.position)
        row = self.table.get((ms.position, context))
        if row is None:
            return np.zeros(self.vocab.size)
        return np.asarray(row, dtype=float).copy()

    def to_checkpoint(self) -> dict:
        entries = [
            {"position": pos, "context": list(ctx), "logits": list(map(float, row))}
            for (pos, ctx), row in sorted(self.table.items())
        ]
        return {"type": "tabular", "entries": entries}

    @classmethod
    def from_checkpoint(cls, obj: dict, vocab: Vocabulary) -> "TabularScorer":
        table = {
            (e["position"], tuple(e["context"])): np.asarray(e["logits"], dtype=float)
            for e in obj["entries"]
        }
        return cls(vocab, table)


class LogLinearScorer(Scorer):
    """Trainable log-linear scorer with a clipped relative-offset window.

    logits(ms)[v] = bias[v] + sum over context slots s != t of
    A[x_s, v, clip(s - t, -w, w) + w]. Context ids include the reserved
    symbols (MASK can appear during sampling), so A's first axis has M + 3
    rows. The center offset slot exists for layout regularity but is never
    addressed when w >= 1; at w = 0 every offset clips to the center and the
    interaction term is dropped entirely, reducing the model to a unigram
    scorer over the bias.
    """

    def __init__(self, vocab: Vocabulary, window: int = 3,
                 bias: np.ndarray | None = None, interaction: np.ndarray | None = None):
        if window < 0:
            raise ScorerError("window must be >= 0")
        self.vocab = vocab
        self.window = window
        m = vocab.size
        n_ids = m + 3
        self.bias = np.zeros(m) if bias is None else np.asarray(bias, dtype=float).copy()
        shape = (n_ids, m, 2 * window + 1)
        if interaction is None:
            self.interaction = np.zeros(shape)
        else:
            self.interaction = np.asarray(interaction, dtype=float).reshape(shape).copy()
        if self.bias.shape != (m,):
            raise ScorerError(f"bias must have shape ({m},)")

    # --- flat parameter vector (bias then row-major interaction) ---

    @property
    def parameters(self) -> np.ndarray:
        return np.concatenate([self.bias, self.interaction.ravel()])

    @parameters.setter
    def parameters(self, theta: np.ndarray) -> None:
        m = self.vocab.size
        theta = np.asarray(theta, dtype=float)
        self.bias = theta[:m].copy()
        self.interaction = theta[m:].reshape(self.interaction.shape).copy()

    def _offset_slot(self, s: int, t: int):
        """Index into the offset axis, or None if the term is dropped (w=0)."""
        if self.window == 0:
            return None
        off = max(-self.window, min(self.window, s - t))
        return off + self.window

    def logits(self, ms: MaskedSequence) -> np.ndarray:
        out = self.bias.copy()
        t = ms.position
        if self.window > 0:
            for s, x in enumerate(ms.ids):
                if s == t:
                    continue
                out += self.interaction[x, :, self._offset_slot(s, t)]
        return out

    def logits_all(self, ids: Sequence) -> np.ndarray:
        T = len(ids)
        m = self.vocab.size
        out = np.tile(self.bias, (T, 1))
        if self.window > 0:
            ids_arr = np.asarray(ids)
            for t in range(T):
                for s in range(T):
                    if s == t:
                        continue
                    out[t] += self.interaction[ids_arr[s], :, self._offset_slot(s, t)]
        return out

    def to_checkpoint(self) -> dict:
        return {
            "type": "loglinear",
            "w": self.window,
            "bias": list(map(float, self.bias)),
            "A": list(map(float, self.interaction.ravel())),
        }

    @classmethod
    def from_checkpoint(cls, obj: dict, vocab: Vocabulary) -> "LogLinearScorer":
        return cls(
            vocab,
            window=obj["w"],
            bias=np.asarray(obj["bias"], dtype=float),
            interaction=np.asarray(obj["A"], dtype=float),
        )


class ExternalScorer(Scorer):
    """Scorer served over the wire protocol by a child process or TCP peer.

    The handshake-advertised vocabulary must equal the local one token for
    token; requests and responses travel as token strings, so both sides
    agree on the rendering of reserved symbols.
    """

    def __init__(self, endpoint: str, vocab: Vocabulary, timeout: float = 30.0):
        from .wire import WireClient

        self.vocab = vocab
        self.client = WireClient(endpoint, timeout=timeout)
        hello = self.client.hello()
        remote = list(hello.get("vocab", []))
        local = list(vocab.tokens)
        if remote != local:
            first = next(
                (i for i, (a, b) in enumerate(zip(local, remote)) if a != b),
                min(len(local), len(remote)),
            )
            raise ScorerError(
                f"endpoint vocabulary mismatch at index {first}: "
                f"local {local[first] if first < len(local) else '<absent>'!r} vs "
                f"remote {remote[first] if first < len(remote) else '<absent>'!r}"
            )
        self.max_len = hello.get("max_len")
        self.framing = bool(hello.get("framing", False))

    def _tokens(self, ids) -> list:
        return [self.vocab.token_of(int(i)) for i in ids]

    def logits(self, ms: MaskedSequence) -> np.ndarray:
        values = self.client.logits(self._tokens(ms.ids), ms.position + 1)
        out = np.asarray(values, dtype=float)
        if out.shape != (self.vocab.size,):
            raise ScorerError(f"endpoint returned {out.shape} logits, want ({self.vocab.size},)")
        return out

    def logits_all(self, ids: Sequence) -> np.ndarray:
        values = self.client.logits_all(self._tokens(ids))
        out = np.asarray(values, dtype=float)
        if out.shape != (len(ids), self.vocab.size):
            raise ScorerError(
                f"endpoint returned {out.shape} logits, want ({len(ids)}, {self.vocab.size})"
            )
        return out

    def ar_logprob(self, ids: Sequence) -> list:
        return [float(v) for v in self.client.ar_logprob(self._tokens(ids))]

    def close(self) -> None:
        self.client.close()


def zero_scorer(vocab: Vocabulary) -> TabularScorer:
    """All-zero logits everywhere: the uniform random field."""
    return TabularScorer(vocab, {})


def save_checkpoint(scorer, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scorer.to_checkpoint(), f)
        f.write("\n")


def load_checkpoint(path, vocab: Vocabulary):
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    if obj["type"] == "tabular":
        return TabularScorer.from_checkpoint(obj, vocab)
    if obj["type"] == "loglinear":
        return LogLinearScorer.from_checkpoint(obj, vocab)
    raise ScorerError(f"unknown checkpoint type {obj['type']!r}")
