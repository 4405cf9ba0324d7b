"""Language-gated multi-head attention with a micro reverse-mode tape."""

from .attention import (
    AttentionConfig,
    ForwardResult,
    GatedAttentionLayer,
    GatedAttentionParams,
    gate_forward,
    gated_cross_attention,
    gated_mha_method1,
    gated_mha_method2,
    mha_forward,
    param_count,
)
from .autodiff import Node, Tape, TapeError

__all__ = [
    "AttentionConfig",
    "ForwardResult",
    "GatedAttentionLayer",
    "GatedAttentionParams",
    "Node",
    "Tape",
    "TapeError",
    "gate_forward",
    "gated_cross_attention",
    "gated_mha_method1",
    "gated_mha_method2",
    "mha_forward",
    "param_count",
]
