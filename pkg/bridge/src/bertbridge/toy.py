"""Deterministic miniature masked LM for tests and the transcript self-test.

Builds a randomly initialised (fixed seed) one-layer BERT over a ten-entry
vocabulary: five control symbols plus content tokens a..e. No weights are
downloaded; everything is constructed locally.
"""

from __future__ import annotations

import os
import tempfile

import torch
from transformers import BertConfig, BertForMaskedLM, BertTokenizer

from .model import BridgeConfig, MaskedLMWrapper

TOY_VOCAB = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "a", "b", "c", "d", "e"]
TOY_SEED = 7


def build_toy_wrapper(config: BridgeConfig | None = None) -> MaskedLMWrapper:
    with tempfile.TemporaryDirectory() as tmp:
        vocab_file = os.path.join(tmp, "vocab.txt")
        with open(vocab_file, "w", encoding="utf-8") as fh:
            fh.write("\n".join(TOY_VOCAB) + "\n")
        tokenizer = BertTokenizer(vocab_file, do_lower_case=True)
    torch.manual_seed(TOY_SEED)
    model_config = BertConfig(
        vocab_size=len(TOY_VOCAB),
        hidden_size=16,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=32,
    )
    model = BertForMaskedLM(model_config)
    if config is None:
        config = BridgeConfig(model="toy", max_len=32)
    return MaskedLMWrapper(model, tokenizer, config)
