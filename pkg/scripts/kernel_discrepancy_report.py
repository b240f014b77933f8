#!/usr/bin/env python3
"""For a set of seeded fixtures, report the total variation between the
stationary distribution of the conditional-softmax Gibbs kernel and the
exact normalized joint.

The two need not agree for a general scorer: the conditionals the sampler
uses are softmaxes of the masked-slot logits, while the joint's own
conditionals couple every position's potential. This script measures the
gap; nothing is asserted.
"""

import argparse

from markovmouth import oracle
from markovmouth.fixtures import load_fixture

DEFAULT_FIXTURES = ["f2", "loglinear-1", "loglinear-2", "loglinear-3", "loglinear-4"]


def discrepancy(name: str) -> float:
    kind, scorer, T = load_fixture(name)
    vocab = scorer.vocab
    kernel = oracle.gibbs_transition_matrix(
        oracle.scorer_conditional_fn(scorer), T, vocab)
    stationary = oracle.stationary_distribution(kernel)
    joint = oracle.enumerate_joint(scorer, T, vocab)
    return oracle.total_variation(stationary, joint)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--fixtures", nargs="*", default=DEFAULT_FIXTURES)
    args = parser.parse_args()
    for name in args.fixtures:
        print(f"{name}: TV(stationary, joint) = {discrepancy(name):.6f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
