#!/usr/bin/env python3
"""Reference wire-protocol server that answers every logits request with
zeros. Useful as a protocol conformance target: through the full client
path it must behave exactly like the built-in zero scorer.

Usage: zero_scorer_server.py --tokens a,b,c [--max-len 500]
       zero_scorer_server.py --vocab vocab.json
"""

import argparse
import sys

from markovmouth.lexicon import Vocabulary
from markovmouth.wire import serve_stdio


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--tokens", help="comma-separated output vocabulary")
    parser.add_argument("--vocab", help="vocabulary JSON file")
    parser.add_argument("--max-len", type=int, default=500)
    args = parser.parse_args()
    if args.vocab:
        vocab = Vocabulary.load(args.vocab)
        tokens = list(vocab.tokens)
    elif args.tokens:
        tokens = args.tokens.split(",")
    else:
        parser.error("need --tokens or --vocab")
    m = len(tokens)

    def handler(request):
        op = request.get("op")
        if op == "hello":
            return {"op": "hello", "vocab": tokens, "max_len": args.max_len}
        rid = request.get("id")
        if op == "logits":
            seq = request["tokens"]
            pos = request["position"]
            if not 1 <= pos <= len(seq):
                return {"op": "error", "id": rid, "message": f"position {pos} out of range"}
            return {"op": "logits", "id": rid, "values": [0.0] * m}
        if op == "logits_all":
            return {"op": "logits_all", "id": rid,
                    "values": [[0.0] * m for _ in request["tokens"]]}
        if op == "ar_logprob":
            import math
            return {"op": "ar_logprob", "id": rid,
                    "values": [-math.log(m)] * len(request["tokens"])}
        return {"op": "error", "id": rid, "message": f"unknown op {op!r}"}

    serve_stdio(handler)
    return 0


if __name__ == "__main__":
    sys.exit(main())
