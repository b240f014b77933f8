#!/usr/bin/env python3
"""Large-scale generation study: Gibbs sampling through a pretrained masked LM.

Launches the bridge server around a pretrained model (default
bert-base-uncased, downloaded by transformers), runs the random-scan Gibbs
sampler over 40-token sequences with top-100 truncated conditionals until
1000 generations are collected, then reports the diversity metrics
(self-BLEU, unique n-gram percentages) and, if reference text is supplied,
corpus BLEU against it.

This needs pretrained weights on disk or network access, plus several hours
of CPU sampling; it is not part of the test suite.

Usage:
    python3 scripts/pretrained_generation_study.py --out generations.txt \
        [--model bert-base-uncased] [--count 1000] [--length 40] \
        [--reference wt=wikitext.txt --reference tbc=books.txt]
"""

import argparse
import json
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "bridge" / "src"))

import numpy as np

from markovmouth.evalkit import build_report
from markovmouth.lexicon import Vocabulary
from markovmouth.samplers import SamplerConfig, run_gibbs
from markovmouth.scorers import ExternalScorer
from markovmouth.wire import WireClient


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", default="bert-base-uncased")
    parser.add_argument("--count", type=int, default=1000)
    parser.add_argument("--length", type=int, default=40)
    parser.add_argument("--top-k", type=int, default=100)
    parser.add_argument("--burn-in", type=int, default=500)
    parser.add_argument("--thinning", type=int, default=10)
    parser.add_argument("--chains", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--reference", action="append", default=[],
                        metavar="NAME=FILE", help="reference corpus for BLEU")
    parser.add_argument("--out", required=True, help="generations, one per line")
    args = parser.parse_args()

    endpoint = f"cmd:{sys.executable} -m bertbridge.server --model {args.model}"
    probe = WireClient(endpoint)
    vocab = Vocabulary(tokens=tuple(probe.hello()["vocab"]), casing="none")
    probe.close()
    scorer = ExternalScorer(endpoint, vocab)
    print(f"bridge up: {vocab.size} content tokens", flush=True)

    per_chain = -(-args.count // args.chains)
    config = SamplerConfig(
        scheme="gibbs",
        iterations=args.burn_in + args.thinning * per_chain,
        burn_in=args.burn_in, thinning=args.thinning,
        top_k=args.top_k, chains=args.chains, init="all_mask", seed=args.seed,
    )
    t0 = time.time()
    samples, withheld = run_gibbs(scorer, config, args.length)
    samples = samples[:args.count]
    print(f"{len(samples)} generations in {time.time() - t0:.0f}s "
          f"({len(withheld)} withheld)", flush=True)

    generations = [[vocab.tokens[i] for i in s.ids] for s in samples]
    Path(args.out).write_text(
        "\n".join(" ".join(g) for g in generations) + "\n", encoding="utf-8")

    references = {}
    for spec in args.reference:
        name, _, path = spec.partition("=")
        references[name] = [line.split() for line
                            in Path(path).read_text(encoding="utf-8").splitlines()
                            if line.strip()]
    report = build_report(generations, references)
    print(json.dumps(json.loads(report.to_json()), indent=2))
    scorer.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
