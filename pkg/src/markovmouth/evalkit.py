"""Quality and diversity metrics for generation corpora.

Conventions (fixed, flagged in report metadata so numbers are comparable
only within-toolkit):
  - corpus BLEU: modified n-gram precisions with uniform 1/max_n weights,
    counts clipped against the whole reference pool, brevity penalty from
    the closest reference length per candidate, epsilon floor 1e-16 inside
    the log for zero precisions;
  - self-BLEU: mean over sentences of sentence-level BLEU against the rest
    of the corpus, same conventions;
  - unique n-grams are counted over *types*: externally, the share of
    generated types absent from the reference; in self mode, the share of
    types occurring exactly once.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

BLEU_EPS = 1e-16

CONVENTIONS = {
    "weights": "uniform 1/max_n",
    "clipping": "reference pool",
    "brevity": "closest reference length",
    "zero_precision_floor": BLEU_EPS,
    "uniqueness": "types; self = frequency-1 types",
}


class EvalError(ValueError):
    pass


def ngrams(tokens, n: int):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def _reference_pool(references, max_n: int):
    """Per-order max count of each n-gram type over the reference sentences."""
    pool = [dict() for _ in range(max_n + 1)]
    lengths = []
    for ref in references:
        lengths.append(len(ref))
        for n in range(1, max_n + 1):
            for gram, c in Counter(ngrams(ref, n)).items():
                if c > pool[n].get(gram, 0):
                    pool[n][gram] = c
    return pool, lengths


def _closest_length(lengths, c: int) -> int:
    # ties go to the shorter reference
    return min(lengths, key=lambda r: (abs(r - c), r))


def _bleu_from_counts(clipped, totals, cand_len, ref_len, max_n) -> float:
    if cand_len == 0:
        raise EvalError("empty candidate")
    log_prec = 0.0
    for n in range(1, max_n + 1):
        p = clipped[n] / totals[n] if totals[n] > 0 else 0.0
        log_prec += math.log(max(p, BLEU_EPS)) / max_n
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / cand_len)
    return 100.0 * bp * math.exp(log_prec)


def _accumulate(candidate, pool, max_n, clipped, totals):
    for n in range(1, max_n + 1):
        counts = Counter(ngrams(candidate, n))
        for gram, c in counts.items():
            clipped[n] += min(c, pool[n].get(gram, 0))
            totals[n] += c


def corpus_bleu(candidates, references, max_n: int = 4) -> float:
    """Corpus-level BLEU of candidate sentences against a reference corpus."""
    candidates = [list(c) for c in candidates]
    references = [list(r) for r in references]
    if not candidates or not references:
        raise EvalError("corpus_bleu requires non-empty candidates and references")
    pool, ref_lengths = _reference_pool(references, max_n)
    clipped = [0] * (max_n + 1)
    totals = [0] * (max_n + 1)
    cand_len = 0
    ref_len = 0
    for cand in candidates:
        _accumulate(cand, pool, max_n, clipped, totals)
        cand_len += len(cand)
        ref_len += _closest_length(ref_lengths, len(cand))
    return _bleu_from_counts(clipped, totals, cand_len, ref_len, max_n)


def sentence_bleu(candidate, references, max_n: int = 4) -> float:
    """Single-sentence BLEU with the same conventions as corpus_bleu."""
    return corpus_bleu([candidate], references, max_n=max_n)


def self_bleu(corpus, max_n: int = 4) -> float:
    """Mean over sentences of BLEU against the remaining sentences."""
    sentences = [list(s) for s in corpus]
    if len(sentences) < 2:
        raise EvalError("self_bleu requires at least 2 sentences")
    scores = []
    for i, cand in enumerate(sentences):
        rest = sentences[:i] + sentences[i + 1:]
        scores.append(sentence_bleu(cand, rest, max_n=max_n))
    return sum(scores) / len(scores)


def unique_ngram_pct(generated, reference, n: int) -> float:
    """Percentage of distinct generated n-gram types that are unique.

    ``reference``: a corpus for external comparison, or the string "self"
    for within-corpus uniqueness (types occurring exactly once).
    """
    if n < 1:
        raise EvalError("n must be >= 1")
    gen_counts = Counter()
    for sent in generated:
        gen_counts.update(ngrams(list(sent), n))
    if not gen_counts:
        raise EvalError(f"no n-grams of order {n} in the generated corpus")
    if isinstance(reference, str) and reference == "self":
        unique = sum(1 for c in gen_counts.values() if c == 1)
        return 100.0 * unique / len(gen_counts)
    ref_types = set()
    for sent in reference:
        ref_types.update(ngrams(list(sent), n))
    novel = sum(1 for g in gen_counts if g not in ref_types)
    return 100.0 * novel / len(gen_counts)


@dataclass
class EvalReport:
    corpus_bleu: dict                 # reference name -> score
    self_bleu: float
    unique_ngrams: dict               # (reference name | "self", n) -> pct
    counts: dict
    perplexity: float | None = None
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))

    def to_json(self) -> str:
        return json.dumps({
            "corpus_bleu": self.corpus_bleu,
            "self_bleu": self.self_bleu,
            "unique_ngrams": {f"{name}:n={n}": v for (name, n), v in self.unique_ngrams.items()},
            "counts": self.counts,
            "perplexity": self.perplexity,
            "conventions": self.conventions,
        }, indent=2, sort_keys=True)

    def to_csv_row(self):
        header = ["self_bleu"]
        row = [f"{self.self_bleu:.4f}"]
        for name in sorted(self.corpus_bleu):
            header.append(f"bleu_{name}")
            row.append(f"{self.corpus_bleu[name]:.4f}")
        for (name, n) in sorted(self.unique_ngrams):
            header.append(f"unique_{name}_n{n}")
            row.append(f"{self.unique_ngrams[(name, n)]:.4f}")
        if self.perplexity is not None:
            header.append("ppl")
            row.append(f"{self.perplexity:.4f}")
        return header, row


def build_report(generations, references, ns=(2, 3, 4), max_n: int = 4,
                 perplexity: float | None = None) -> EvalReport:
    """Assemble the full quality/diversity report.

    ``generations``: list of token lists. ``references``: dict name -> list
    of token lists.
    """
    generations = [list(g) for g in generations]
    if not generations:
        raise EvalError("empty generations corpus")
    bleu = {name: corpus_bleu(generations, ref, max_n=max_n)
            for name, ref in references.items()}
    unique = {}
    for n in ns:
        unique[("self", n)] = unique_ngram_pct(generations, "self", n)
        for name, ref in references.items():
            unique[(name, n)] = unique_ngram_pct(generations, ref, n)
    counts = {
        "generations": len(generations),
        "generation_tokens": sum(len(g) for g in generations),
    }
    for name, ref in references.items():
        counts[f"reference_{name}"] = len(ref)
    return EvalReport(
        corpus_bleu=bleu,
        self_bleu=self_bleu(generations, max_n=max_n),
        unique_ngrams=unique,
        counts=counts,
        perplexity=perplexity,
    )


def passthrough_perplexity(per_token_logprobs) -> float:
    """Mean over generations of exp(-average per-token log-prob).

    The log-probs come from an external autoregressive scorer via the wire
    protocol's ar_logprob request; no language model lives in this toolkit.
    """
    values = []
    for lps in per_token_logprobs:
        if not lps:
            raise EvalError("empty log-prob row")
        values.append(math.exp(-sum(lps) / len(lps)))
    if not values:
        raise EvalError("no generations to score")
    return sum(values) / len(values)
