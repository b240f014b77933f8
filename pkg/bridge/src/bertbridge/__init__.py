"""Scorer wire-protocol server wrapping a pretrained masked language model.

The bridge returns raw logits over its content vocabulary (the model's
output vocabulary minus control symbols); softmax and top-k semantics stay
on the client side. Framing symbols are added internally and stripped from
returned arrays, so request positions always address the unframed sequence.
"""

from .model import BridgeConfig, MaskedLMWrapper

__all__ = ["BridgeConfig", "MaskedLMWrapper"]
__version__ = "0.1.0"
