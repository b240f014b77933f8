"""Wire-protocol server loop for the masked-LM bridge.

Speaks newline-delimited JSON on stdio (default) or a TCP port. Requests
carry an integer ``id`` echoed in the response; a malformed or failing
request produces ``{"op":"error","id":...,"message":...}`` and the
connection stays open.

    {"op":"hello"} -> {"op":"hello","vocab":[...],"max_len":N}
    {"op":"logits","id":i,"tokens":[...],"position":t}   (1-based)
        -> {"op":"logits","id":i,"values":[M floats]}
    {"op":"logits_all","id":i,"tokens":[...]}
        -> {"op":"logits_all","id":i,"values":[[M floats] x T]}
    {"op":"ar_logprob","id":i,"tokens":[...]}
        -> {"op":"ar_logprob","id":i,"values":[T floats]}
"""

from __future__ import annotations

import argparse
import json
import socketserver
import sys

from .model import BridgeConfig, BridgeError, MaskedLMWrapper


def make_handler(wrapper: MaskedLMWrapper):
    def handler(request: dict) -> dict:
        op = request.get("op")
        rid = request.get("id")
        if op == "hello":
            return {"op": "hello", "vocab": wrapper.content_tokens,
                    "max_len": wrapper.config.max_len}
        try:
            if op == "logits":
                values = wrapper.logits(request["tokens"], request["position"])
            elif op == "logits_all":
                values = wrapper.logits_all(request["tokens"])
            elif op == "ar_logprob":
                values = wrapper.ar_logprob(request["tokens"])
            else:
                return {"op": "error", "id": rid, "message": f"unknown op {op!r}"}
        except (BridgeError, KeyError, TypeError) as exc:
            return {"op": "error", "id": rid, "message": str(exc)}
        return {"op": op, "id": rid, "values": values}

    return handler


def serve_lines(handler, reader, writer) -> None:
    for line in reader:
        line = line.strip()
        if not line:
            continue
        rid = None
        try:
            request = json.loads(line)
            rid = request.get("id")
            response = handler(request)
        except Exception as exc:  # bad JSON must not kill the server
            response = {"op": "error", "id": rid, "message": str(exc)}
        writer.write(json.dumps(response) + "\n")
        writer.flush()


def serve_tcp(handler, port: int) -> None:
    class Connection(socketserver.StreamRequestHandler):
        def handle(self):
            reader = (raw.decode("utf-8") for raw in self.rfile)

            class W:
                def write(_, text):
                    self.wfile.write(text.encode("utf-8"))

                def flush(_):
                    self.wfile.flush()

            serve_lines(handler, reader, W())

    with socketserver.ThreadingTCPServer(("127.0.0.1", port), Connection) as srv:
        srv.serve_forever()


def _build_wrapper(args) -> MaskedLMWrapper:
    config = BridgeConfig(model=args.model, device=args.device,
                          max_len=args.max_len, framing=not args.no_framing)
    if args.toy:
        from .toy import build_toy_wrapper
        config.model = "toy"
        config.max_len = min(config.max_len, 32)
        return build_toy_wrapper(config)
    from .model import load_pretrained
    return load_pretrained(config)


def selftest() -> int:
    """Replay a scripted session against the toy model and check invariants."""
    from .toy import build_toy_wrapper

    wrapper = build_toy_wrapper()
    handler = make_handler(wrapper)
    failures = []

    def check(name, ok):
        print(f"{'ok' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    hello = handler({"op": "hello"})
    vocab = hello.get("vocab", [])
    check("hello advertises a non-empty vocabulary", len(vocab) > 0)
    check("vocabulary excludes control symbols",
          not any(t.startswith("[") for t in vocab))

    seq = ["a", "b", "c"]
    r1 = handler({"op": "logits", "id": 1, "tokens": seq, "position": 2})
    check("logits reply is M floats",
          r1["op"] == "logits" and len(r1["values"]) == len(vocab))

    r2 = handler({"op": "logits", "id": 2, "tokens": seq, "position": 2})
    check("repeated request is byte-identical",
          json.dumps(r1) == json.dumps(dict(r2, id=1)))

    # the addressed slot is re-masked server-side, so the token there is
    # invisible -- but neighbouring context must matter
    blind = handler({"op": "logits", "id": 3, "tokens": ["a", "e", "c"], "position": 2})
    context = handler({"op": "logits", "id": 4, "tokens": ["a", "b", "e"], "position": 2})
    check("masked slot is unobservable", blind["values"] == r1["values"])
    check("context tokens shift the logits", context["values"] != r1["values"])

    r5 = handler({"op": "logits_all", "id": 5, "tokens": seq})
    check("logits_all reply is T x M",
          len(r5["values"]) == 3 and all(len(row) == len(vocab) for row in r5["values"]))
    per_slot = [handler({"op": "logits", "id": 10 + t, "tokens": seq,
                         "position": t + 1})["values"] for t in range(3)]
    check("logits_all rows match per-position logits", r5["values"] == per_slot)

    r6 = handler({"op": "ar_logprob", "id": 6, "tokens": seq})
    check("ar_logprob gives T negative log-probs",
          len(r6["values"]) == 3 and all(v < 0 for v in r6["values"]))

    err = handler({"op": "logits", "id": 7, "tokens": seq, "position": 9})
    check("out-of-range position yields an error response with id",
          err["op"] == "error" and err["id"] == 7)
    err2 = handler({"op": "logits", "id": 8, "tokens": ["a", "zzz"], "position": 1})
    check("unknown token yields an error response", err2["op"] == "error")
    after = handler({"op": "logits", "id": 9, "tokens": seq, "position": 2})
    check("server keeps answering after errors", after["values"] == r1["values"])

    if failures:
        print(f"self-test failed: {len(failures)} check(s)")
        return 1
    print("self-test passed")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bert-bridge", description=__doc__)
    parser.add_argument("--model", default="bert-base-uncased",
                        help="HF model name or local path")
    parser.add_argument("--toy", action="store_true",
                        help="serve the deterministic miniature model")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-len", type=int, default=500)
    parser.add_argument("--no-framing", action="store_true",
                        help="do not wrap sequences in [CLS]/[SEP]")
    parser.add_argument("--port", type=int, help="serve TCP instead of stdio")
    parser.add_argument("--selftest", action="store_true",
                        help="run the scripted transcript check and exit")
    args = parser.parse_args(argv)

    if args.selftest:
        return selftest()

    handler = make_handler(_build_wrapper(args))
    if args.port:
        serve_tcp(handler, args.port)
    else:
        serve_lines(handler, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
