"""Vocabulary, token-id sequences, and corpus ingestion.

Tokenization is plain whitespace splitting on pre-tokenized text. The output
alphabet V gets dense ids 0..M-1; the reserved input-only symbols MASK, CLS
and SEP sit above V and are never produced by any conditional distribution.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

MASK_TOKEN = "[MASK]"
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
RESERVED_TOKENS = (MASK_TOKEN, CLS_TOKEN, SEP_TOKEN)

MAX_SEQUENCE_LENGTH = 500

Sequence = tuple  # tuple[int, ...]; immutable and hashable so oracle tables can key on states


class LexiconError(ValueError):
    pass


class OOVError(LexiconError):
    """A token outside V ∪ reserved was encountered during encoding."""


@dataclass(frozen=True)
class Vocabulary:
    """Output alphabet plus reserved input-only symbols.

    ``tokens`` holds V only; reserved symbols get the three ids directly
    above ``size``.
    """

    tokens: tuple
    casing: str = "none"  # "lower" | "none"

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise LexiconError("vocabulary tokens must be unique")
        for t in self.tokens:
            if t in RESERVED_TOKENS:
                raise LexiconError(f"reserved symbol {t!r} cannot be a vocabulary token")
        if self.casing not in ("lower", "none"):
            raise LexiconError(f"unknown casing mode {self.casing!r}")
        object.__setattr__(self, "_id_of", {t: i for i, t in enumerate(self.tokens)})

    @property
    def size(self) -> int:
        """M, the number of producible tokens."""
        return len(self.tokens)

    @property
    def mask_id(self) -> int:
        return self.size

    @property
    def cls_id(self) -> int:
        return self.size + 1

    @property
    def sep_id(self) -> int:
        return self.size + 2

    @property
    def reserved_ids(self) -> tuple:
        return (self.mask_id, self.cls_id, self.sep_id)

    def id_of(self, token: str):
        if token == MASK_TOKEN:
            return self.mask_id
        if token == CLS_TOKEN:
            return self.cls_id
        if token == SEP_TOKEN:
            return self.sep_id
        return self._id_of.get(token)

    def token_of(self, token_id: int) -> str:
        if 0 <= token_id < self.size:
            return self.tokens[token_id]
        if token_id == self.mask_id:
            return MASK_TOKEN
        if token_id == self.cls_id:
            return CLS_TOKEN
        if token_id == self.sep_id:
            return SEP_TOKEN
        raise LexiconError(f"invalid token id {token_id}")

    def validate_sequence(self, ids: Sequence) -> None:
        if not 1 <= len(ids) <= MAX_SEQUENCE_LENGTH:
            raise LexiconError(
                f"sequence length {len(ids)} outside 1..{MAX_SEQUENCE_LENGTH}"
            )
        for i in ids:
            self.token_of(int(i))

    def to_json(self) -> str:
        return json.dumps({"tokens": list(self.tokens), "casing": self.casing})

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        obj = json.loads(text)
        return cls(tokens=tuple(obj["tokens"]), casing=obj.get("casing", "none"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())


@dataclass(frozen=True)
class MaskedSequence:
    """A sequence with exactly one position replaced by MASK."""

    ids: tuple
    position: int  # 0-based index of the masked slot
    mask_id: int

    def __post_init__(self):
        if not 0 <= self.position < len(self.ids):
            raise LexiconError(f"masked position {self.position} out of range")
        if self.ids[self.position] != self.mask_id:
            raise LexiconError("id at masked position must be MASK")

    @classmethod
    def mask(cls, ids: Sequence, position: int, vocab: Vocabulary) -> "MaskedSequence":
        masked = tuple(ids[:position]) + (vocab.mask_id,) + tuple(ids[position + 1:])
        return cls(ids=masked, position=position, mask_id=vocab.mask_id)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple  # tuple of Sequence
    source: str = "<memory>"

    def __post_init__(self):
        if not self.sentences:
            raise LexiconError(f"corpus {self.source!r} is empty")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


def build_vocabulary(corpus_lines, min_count: int = 1, casing: str = "none") -> Vocabulary:
    """Frequency-then-lexicographic vocabulary over whitespace tokens."""
    if not corpus_lines:
        raise LexiconError("cannot build a vocabulary from no lines")
    if min_count < 1:
        raise LexiconError("min_count must be >= 1")
    counts = Counter()
    for line in corpus_lines:
        if casing == "lower":
            line = line.lower()
        counts.update(tok for tok in line.split() if tok not in RESERVED_TOKENS)
    kept = [t for t, c in counts.items() if c >= min_count]
    if not kept:
        raise LexiconError(
            f"no token reaches min_count={min_count}; refusing to build an empty vocabulary"
        )
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(tokens=tuple(kept), casing=casing)


def encode(text: str, vocab: Vocabulary, oov: str = "error") -> Sequence:
    """Whitespace-tokenize and map to ids.

    ``oov``: "error" raises naming the offending token; "mask" maps unknown
    tokens to MASK (opt-in, since silent OOV corrupts joint scores).
    """
    if vocab.casing == "lower":
        text = text.lower()
    parts = text.split()
    if not parts:
        raise LexiconError("cannot encode an empty sequence")
    if len(parts) > MAX_SEQUENCE_LENGTH:
        raise LexiconError(f"sequence length {len(parts)} exceeds {MAX_SEQUENCE_LENGTH}")
    ids = []
    for pos, tok in enumerate(parts, start=1):
        tid = vocab.id_of(tok)
        if tid is None:
            if oov == "mask":
                tid = vocab.mask_id
            else:
                raise OOVError(f"out-of-vocabulary token {tok!r} at position {pos}")
        ids.append(tid)
    return tuple(ids)


def decode(ids: Sequence, vocab: Vocabulary) -> str:
    return " ".join(vocab.token_of(int(i)) for i in ids)


def load_corpus(path, vocab: Vocabulary, oov: str = "error") -> Corpus:
    """One sentence per line, UTF-8, LF-terminated."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln for ln in f.read().split("\n") if ln.strip()]
    sentences = tuple(encode(ln, vocab, oov=oov) for ln in lines)
    return Corpus(sentences=sentences, source=str(path))


def corpus_from_texts(texts, vocab: Vocabulary, source: str = "<memory>") -> Corpus:
    return Corpus(tuple(encode(t, vocab) for t in texts), source=source)
