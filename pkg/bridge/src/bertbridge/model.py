"""Masked-LM wrapper: vocabulary projection, framing, and logit extraction."""

from __future__ import annotations

from dataclasses import dataclass

import torch

MASK = "[MASK]"


class BridgeError(ValueError):
    """Request-level failure; reported as an error response, never fatal."""


@dataclass
class BridgeConfig:
    model: str = ""                 # HF model name or local path; "" with toy wrapper
    device: str = "cpu"
    max_len: int = 500
    framing: bool = True            # add [CLS]/[SEP] internally
    uncased: bool = True
    port: int | None = None         # None = stdio


class MaskedLMWrapper:
    """Projects a HF masked LM onto the wire protocol's content vocabulary.

    The advertised vocabulary is the model's output vocabulary minus its
    special (control) tokens, in model-id order; every logits response is
    restricted to those coordinates.
    """

    def __init__(self, model, tokenizer, config: BridgeConfig):
        self.config = config
        self.tokenizer = tokenizer
        self.model = model.to(config.device).eval()
        specials = set(tokenizer.all_special_tokens)
        id_to_token = {i: t for t, i in tokenizer.get_vocab().items()}
        self.content_tokens = []
        keep = []
        for i in range(len(id_to_token)):
            token = id_to_token[i]
            if token not in specials:
                self.content_tokens.append(token)
                keep.append(i)
        self.keep_ids = torch.tensor(keep, dtype=torch.long)
        self.mask_id = tokenizer.mask_token_id
        self.cls_id = tokenizer.cls_token_id
        self.sep_id = tokenizer.sep_token_id

    @property
    def vocab_size(self) -> int:
        return len(self.content_tokens)

    def _encode(self, tokens) -> list:
        ids = []
        for pos, token in enumerate(tokens, start=1):
            if self.config.uncased and token != MASK:
                token = token.lower()
            tid = self.tokenizer.convert_tokens_to_ids(token)
            if tid is None or tid == self.tokenizer.unk_token_id and token != self.tokenizer.unk_token:
                raise BridgeError(f"token {token!r} at position {pos} not in model vocabulary")
            ids.append(tid)
        return ids

    def _frame(self, ids) -> tuple:
        """(framed id list, offset of content position 0)."""
        if self.config.framing:
            return [self.cls_id] + ids + [self.sep_id], 1
        return list(ids), 0

    def _check(self, tokens) -> None:
        if not tokens:
            raise BridgeError("empty token sequence")
        overhead = 2 if self.config.framing else 0
        if len(tokens) + overhead > self.config.max_len:
            raise BridgeError(
                f"sequence length {len(tokens)} exceeds max {self.config.max_len - overhead}"
            )

    def _forward(self, batch_ids) -> torch.Tensor:
        with torch.no_grad():
            out = self.model(torch.tensor(batch_ids, device=self.config.device)).logits
        return out

    def logits(self, tokens, position_1based: int) -> list:
        """Content-vocabulary logits for one masked slot (1-based position).

        The slot is masked server-side regardless of what the request put
        there, so the original token is unobservable by construction."""
        self._check(tokens)
        if not 1 <= position_1based <= len(tokens):
            raise BridgeError(f"position {position_1based} out of range 1..{len(tokens)}")
        ids = self._encode(tokens)
        ids[position_1based - 1] = self.mask_id
        framed, offset = self._frame(ids)
        row = self._forward([framed])[0, offset + position_1based - 1]
        return row[self.keep_ids].tolist()

    def logits_all(self, tokens) -> list:
        """T x M logits; row t computed with content slot t masked."""
        self._check(tokens)
        ids = self._encode(tokens)
        T = len(ids)
        batch = []
        for t in range(T):
            variant = list(ids)
            variant[t] = self.mask_id
            framed, offset = self._frame(variant)
            batch.append(framed)
        out = self._forward(batch)
        rows = out[torch.arange(T), offset + torch.arange(T)]
        return rows[:, self.keep_ids].tolist()

    def ar_logprob(self, tokens) -> list:
        """Per-token conditional log-probs over the content vocabulary.

        A masked LM has no autoregressive factorization; this scores each
        token given all the others (masked one at a time), softmaxed over
        the content vocabulary only."""
        rows = torch.tensor(self.logits_all(tokens))
        logp = torch.log_softmax(rows, dim=1)
        index = {t: i for i, t in enumerate(self.content_tokens)}
        out = []
        for t, token in enumerate(tokens):
            if self.config.uncased:
                token = token.lower()
            if token not in index:
                raise BridgeError(f"token {token!r} has no content-vocabulary coordinate")
            out.append(float(logp[t, index[token]]))
        return out


def load_pretrained(config: BridgeConfig) -> MaskedLMWrapper:
    from transformers import AutoModelForMaskedLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(config.model)
    model = AutoModelForMaskedLM.from_pretrained(config.model)
    return MaskedLMWrapper(model, tokenizer, config)
