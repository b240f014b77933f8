"""Scorer wire protocol: newline-delimited JSON, one object per line, UTF-8.

Requests carry an integer ``id``; responses echo it and may arrive in any
order, so the client buffers out-of-order replies. Two transports: a child
process speaking the protocol on stdio, or a TCP address.

    {"op":"hello"} -> {"op":"hello","vocab":[...],"max_len":N}
    {"op":"logits","id":i,"tokens":[...],"position":t}  (1-based position)
        -> {"op":"logits","id":i,"values":[M floats]}
    {"op":"logits_all","id":i,"tokens":[...]}
        -> {"op":"logits_all","id":i,"values":[[M floats] x T]}
    {"op":"ar_logprob","id":i,"tokens":[...]}
        -> {"op":"ar_logprob","id":i,"values":[T floats]}
    errors: {"op":"error","id":i,"message":...}
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
import sys


class WireError(RuntimeError):
    pass


class WireTransport:
    """Line-oriented transport over a subprocess's stdio or a TCP socket."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self._proc = None
        self._sock = None
        if endpoint.startswith("tcp:"):
            _, host, port = endpoint.split(":", 2)
            self._sock = socket.create_connection((host, int(port)), timeout=timeout)
            self._reader = self._sock.makefile("r", encoding="utf-8", newline="\n")
            self._writer = self._sock.makefile("w", encoding="utf-8", newline="\n")
        elif endpoint.startswith("cmd:"):
            argv = shlex.split(endpoint[len("cmd:"):])
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, encoding="utf-8", bufsize=1,
            )
            self._reader = self._proc.stdout
            self._writer = self._proc.stdin
        else:
            raise WireError(f"endpoint must start with tcp: or cmd:, got {endpoint!r}")

    def send(self, obj: dict) -> None:
        self._writer.write(json.dumps(obj) + "\n")
        self._writer.flush()

    def recv(self) -> dict:
        line = self._reader.readline()
        if not line:
            raise WireError(f"connection to {self.endpoint} closed")
        return json.loads(line)

    def close(self) -> None:
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
        if self._sock is not None:
            self._sock.close()


class WireClient:
    """Request/response matching over a transport; supports pipelining."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.transport = WireTransport(endpoint, timeout=timeout)
        self._next_id = 0
        self._pending: dict = {}

    def hello(self) -> dict:
        self.transport.send({"op": "hello"})
        reply = self.transport.recv()
        if reply.get("op") != "hello":
            raise WireError(f"bad handshake reply: {reply}")
        return reply

    def _request(self, obj: dict) -> int:
        rid = self._next_id
        self._next_id += 1
        obj = dict(obj, id=rid)
        self.transport.send(obj)
        return rid

    def _collect(self, rid: int) -> dict:
        while rid not in self._pending:
            reply = self.transport.recv()
            self._pending[reply.get("id")] = reply
        reply = self._pending.pop(rid)
        if reply.get("op") == "error":
            raise WireError(f"remote error: {reply.get('message')}")
        return reply

    def call(self, op: str, **fields) -> dict:
        return self._collect(self._request({"op": op, **fields}))

    def logits(self, tokens, position_1based: int):
        return self.call("logits", tokens=list(tokens), position=position_1based)["values"]

    def logits_all(self, tokens):
        return self.call("logits_all", tokens=list(tokens))["values"]

    def ar_logprob(self, tokens):
        return self.call("ar_logprob", tokens=list(tokens))["values"]

    def close(self) -> None:
        self.transport.close()


def serve_stdio(handler, stdin=None, stdout=None) -> None:
    """Run a protocol server loop on stdio.

    ``handler(request dict) -> response dict``; exceptions become error
    responses and keep the connection alive.
    """
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        rid = None
        try:
            request = json.loads(line)
            rid = request.get("id")
            response = handler(request)
        except Exception as exc:  # malformed input must not kill the server
            response = {"op": "error", "id": rid, "message": str(exc)}
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()
