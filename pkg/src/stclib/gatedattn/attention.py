"""Multi-head attention and its two language-gated variants.

Both variants keep one set of query/key/value parameters per language and
collapse them with per-frame gate probabilities: the pre-attention variant
(method 1) interpolates q/k/v before the attention product, the
post-attention variant (method 2) runs a full attention pass per language
and interpolates the resulting head encodings. No layer norm, residuals,
dropout, or positional encodings anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..numkit import Rng
from ..seqloss.types import GateMatrix
from .autodiff import Node, Tape


@dataclass(frozen=True)
class AttentionConfig:
    model_dim: int
    heads: int
    langs: int = 1
    gated: bool = False
    method: int = 1

    def __post_init__(self):
        if self.model_dim % self.heads != 0:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by heads {self.heads}"
            )
        if self.langs < 1:
            raise ValueError("langs must be >= 1")
        if self.method not in (1, 2):
            raise ValueError("method must be 1 or 2")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.heads

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.head_dim)


@dataclass
class GatedAttentionParams:
    """Per-language q/k/v maps of shape (L, h, d, d/h), output map (d, d),
    and the gating map: (d, L) for method 1 (scores from the layer input),
    (d, 1) for method 2 (a scoring vector applied to each language's
    encoding)."""

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    w: np.ndarray
    gate: np.ndarray | None = None

    @classmethod
    def init(cls, config: AttentionConfig, rng: Rng) -> "GatedAttentionParams":
        d, h, dh, L = config.model_dim, config.heads, config.head_dim, config.langs

        def xavier(shape, fan_in, fan_out):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-bound, bound, size=shape)

        q = xavier((L, h, d, dh), d, dh)
        k = xavier((L, h, d, dh), d, dh)
        v = xavier((L, h, d, dh), d, dh)
        w = xavier((d, d), d, d)
        gate = None
        if config.gated:
            # zero start => uniform gates, symmetric across languages
            gate = np.zeros((d, L) if config.method == 1 else (d, 1))
        return cls(q, k, v, w, gate)

    def named(self) -> dict[str, np.ndarray]:
        out = {"q": self.q, "k": self.k, "v": self.v, "w": self.w}
        if self.gate is not None:
            out["gate"] = self.gate
        return out


class _Bound:
    """Leaf nodes for one forward pass, keyed like the parameter arrays."""

    def __init__(self, tape: Tape, params: GatedAttentionParams, config: AttentionConfig):
        L, h = config.langs, config.heads
        self.qkv = {
            kind: [[tape.leaf(getattr(params, kind)[n, i], f"{kind}{n}{i}") for i in range(h)] for n in range(L)]
            for kind in ("q", "k", "v")
        }
        self.w = tape.leaf(params.w, "w")
        self.gate = tape.leaf(params.gate, "gate") if params.gate is not None else None

    def grads(self, config: AttentionConfig) -> dict[str, np.ndarray]:
        L, h = config.langs, config.heads
        out = {}
        for kind in ("q", "k", "v"):
            stack = np.zeros((L, h) + self.qkv[kind][0][0].value.shape)
            for n in range(L):
                for i in range(h):
                    node = self.qkv[kind][n][i]
                    if node.grad is not None:
                        stack[n, i] = node.grad
            out[kind] = stack
        out["w"] = self.w.grad if self.w.grad is not None else np.zeros_like(self.w.value)
        if self.gate is not None:
            out["gate"] = self.gate.grad if self.gate.grad is not None else np.zeros_like(self.gate.value)
        return out


def _attend(tape: Tape, q: Node, k: Node, v: Node, scale: float) -> Node:
    scores = tape.scale(tape.matmul(q, tape.transpose(k)), scale)
    return tape.matmul(tape.softmax_rows(scores), v)


def _interp(tape: Tape, gate_cols: list[Node], parts: list[Node]) -> Node:
    acc = tape.mul_col(gate_cols[0], parts[0])
    for col, part in zip(gate_cols[1:], parts[1:]):
        acc = tape.add(acc, tape.mul_col(col, part))
    return acc


@dataclass
class ForwardResult:
    output: Node
    gates: Node | None  # node to seed gate-loss gradients into (None when overridden)
    gate_values: np.ndarray | None
    bound: _Bound
    z: Node


class GatedAttentionLayer:
    """One attention layer with optional language gating and a reversible
    gate override for ablations."""

    def __init__(self, config: AttentionConfig, params: GatedAttentionParams):
        if config.gated and params.gate is None:
            raise ValueError("gated layer needs gate parameters")
        if not config.gated and config.langs != 1:
            raise ValueError("ungated layer must have langs == 1")
        self.config = config
        self.params = params
        self._override: np.ndarray | int | None = None

    # -- override -----------------------------------------------------------

    def override_gates(self, constants: GateMatrix | int) -> "GatedAttentionLayer":
        if not self.config.gated:
            raise ValueError("cannot override gates on an ungated layer")
        if isinstance(constants, GateMatrix):
            if constants.num_languages != self.config.langs:
                raise ValueError("override width does not match language count")
            self._override = constants.values.copy()  # row-sum validated by GateMatrix
        else:
            lang = int(constants)
            if not 0 <= lang < self.config.langs:
                raise ValueError(f"language index {lang} out of range")
            self._override = lang
        return self

    def clear_override(self) -> "GatedAttentionLayer":
        self._override = None
        return self

    def _override_values(self, frames: int) -> np.ndarray | None:
        if self._override is None:
            return None
        if isinstance(self._override, int):
            out = np.zeros((frames, self.config.langs))
            out[:, self._override] = 1.0
            return out
        if self._override.shape[0] != frames:
            raise ValueError(
                f"override has {self._override.shape[0]} rows, input has {frames} frames"
            )
        return self._override

    # -- forward ------------------------------------------------------------

    def forward(self, tape: Tape, z: Node, disconnect: bool = False) -> ForwardResult:
        cfg = self.config
        bound = _Bound(tape, self.params, cfg)
        if not cfg.gated:
            out = self._plain(tape, z, bound)
            return ForwardResult(out, None, None, bound, z)
        if cfg.method == 1:
            return self._method1(tape, z, bound, disconnect)
        return self._method2(tape, z, bound, disconnect)

    def _plain(self, tape: Tape, z: Node, bound: _Bound, lang: int = 0) -> Node:
        cfg = self.config
        heads = []
        for i in range(cfg.heads):
            q = tape.matmul(z, bound.qkv["q"][lang][i])
            k = tape.matmul(z, bound.qkv["k"][lang][i])
            v = tape.matmul(z, bound.qkv["v"][lang][i])
            heads.append(_attend(tape, q, k, v, cfg.scale))
        return tape.matmul(tape.concat_cols(heads), bound.w)

    def _gate_nodes(self, tape: Tape, z: Node, bound: _Bound, disconnect: bool):
        """Returns (gates node used by attention, gates node to seed gate-loss
        gradients into). Under disconnect the attention side is a constant and
        the loss side sees only the gate parameters."""
        cfg = self.config
        const = self._override_values(z.value.shape[0])
        if const is not None:
            node = tape.leaf(const, "gates_override")
            return node, None
        src = tape.detach(z) if disconnect else z
        gates = tape.softmax_rows(tape.matmul(src, bound.gate))
        attn_gates = tape.detach(gates) if disconnect else gates
        return attn_gates, gates

    def _method1(self, tape: Tape, z: Node, bound: _Bound, disconnect: bool) -> ForwardResult:
        cfg = self.config
        attn_gates, loss_gates = self._gate_nodes(tape, z, bound, disconnect)
        cols = [tape.col(attn_gates, n) for n in range(cfg.langs)]
        heads = []
        for i in range(cfg.heads):
            q = _interp(tape, cols, [tape.matmul(z, bound.qkv["q"][n][i]) for n in range(cfg.langs)])
            k = _interp(tape, cols, [tape.matmul(z, bound.qkv["k"][n][i]) for n in range(cfg.langs)])
            v = _interp(tape, cols, [tape.matmul(z, bound.qkv["v"][n][i]) for n in range(cfg.langs)])
            heads.append(_attend(tape, q, k, v, cfg.scale))
        out = tape.matmul(tape.concat_cols(heads), bound.w)
        return ForwardResult(out, loss_gates, attn_gates.value.copy(), bound, z)

    def _method2(self, tape: Tape, z: Node, bound: _Bound, disconnect: bool) -> ForwardResult:
        cfg = self.config
        lang_heads = []  # per language: list of head nodes
        lang_concat = []
        for n in range(cfg.langs):
            heads_n = []
            for i in range(cfg.heads):
                q = tape.matmul(z, bound.qkv["q"][n][i])
                k = tape.matmul(z, bound.qkv["k"][n][i])
                v = tape.matmul(z, bound.qkv["v"][n][i])
                heads_n.append(_attend(tape, q, k, v, cfg.scale))
            lang_heads.append(heads_n)
            lang_concat.append(tape.concat_cols(heads_n))

        const = self._override_values(z.value.shape[0])
        if const is not None:
            attn_gates, loss_gates = tape.leaf(const, "gates_override"), None
        else:
            scored = [tape.detach(lc) if disconnect else lc for lc in lang_concat]
            scores = tape.concat_cols([tape.matmul(sc, bound.gate) for sc in scored])
            gates = tape.softmax_rows(scores)
            attn_gates = tape.detach(gates) if disconnect else gates
            loss_gates = gates
        cols = [tape.col(attn_gates, n) for n in range(cfg.langs)]
        heads = []
        for i in range(cfg.heads):
            heads.append(_interp(tape, cols, [lang_heads[n][i] for n in range(cfg.langs)]))
        out = tape.matmul(tape.concat_cols(heads), bound.w)
        return ForwardResult(out, loss_gates, attn_gates.value.copy(), bound, z)

    def cross_forward(
        self, tape: Tape, q_input: Node, kv_input: Node, disconnect: bool = False
    ) -> tuple[Node, Node | None, np.ndarray, np.ndarray, _Bound]:
        """Cross attention (method 1 only): key/value gates come from the
        kv side, query gates from the query side, through the same gating
        map. Returns (output, query-gate loss node, q gates, kv gates, bound).
        """
        cfg = self.config
        if not cfg.gated or cfg.method != 1:
            raise ValueError("gated cross attention is defined for method 1")
        if self._override is not None:
            raise ValueError("gate override is not supported on the cross path")
        bound = _Bound(tape, self.params, cfg)
        q_src = tape.detach(q_input) if disconnect else q_input
        kv_src = tape.detach(kv_input) if disconnect else kv_input
        gates_q = tape.softmax_rows(tape.matmul(q_src, bound.gate))
        gates_kv = tape.softmax_rows(tape.matmul(kv_src, bound.gate))
        attn_gq = tape.detach(gates_q) if disconnect else gates_q
        attn_gkv = tape.detach(gates_kv) if disconnect else gates_kv
        qcols = [tape.col(attn_gq, n) for n in range(cfg.langs)]
        kvcols = [tape.col(attn_gkv, n) for n in range(cfg.langs)]
        heads = []
        for i in range(cfg.heads):
            q = _interp(tape, qcols, [tape.matmul(q_input, bound.qkv["q"][n][i]) for n in range(cfg.langs)])
            k = _interp(tape, kvcols, [tape.matmul(kv_input, bound.qkv["k"][n][i]) for n in range(cfg.langs)])
            v = _interp(tape, kvcols, [tape.matmul(kv_input, bound.qkv["v"][n][i]) for n in range(cfg.langs)])
            heads.append(_attend(tape, q, k, v, cfg.scale))
        out = tape.matmul(tape.concat_cols(heads), bound.w)
        return out, gates_q, attn_gq.value.copy(), attn_gkv.value.copy(), bound


# ---------------------------------------------------------------------------
# functional wrappers (values in, values out)
# ---------------------------------------------------------------------------


def mha_forward(z: np.ndarray, params: GatedAttentionParams, config: AttentionConfig) -> np.ndarray:
    if config.gated:
        raise ValueError("mha_forward expects an ungated config")
    tape = Tape()
    layer = GatedAttentionLayer(config, params)
    return layer.forward(tape, tape.leaf(z)).output.value


def gate_forward(z: np.ndarray, gate_weights: np.ndarray) -> GateMatrix:
    """Per-frame language scores z @ G through a row softmax."""
    from ..numkit import matmul, softmax_rows

    return GateMatrix(softmax_rows(matmul(z, gate_weights)))


def gated_mha_method1(
    z: np.ndarray, params: GatedAttentionParams, config: AttentionConfig
) -> tuple[np.ndarray, GateMatrix]:
    if config.method != 1:
        raise ValueError("config.method must be 1")
    tape = Tape()
    layer = GatedAttentionLayer(config, params)
    res = layer.forward(tape, tape.leaf(z))
    return res.output.value, GateMatrix(res.gate_values)


def gated_mha_method2(
    z: np.ndarray, params: GatedAttentionParams, config: AttentionConfig
) -> tuple[np.ndarray, GateMatrix]:
    if config.method != 2:
        raise ValueError("config.method must be 2")
    tape = Tape()
    layer = GatedAttentionLayer(config, params)
    res = layer.forward(tape, tape.leaf(z))
    return res.output.value, GateMatrix(res.gate_values)


def gated_cross_attention(
    q_input: np.ndarray,
    kv_input: np.ndarray,
    params: GatedAttentionParams,
    config: AttentionConfig,
) -> tuple[np.ndarray, GateMatrix, GateMatrix]:
    tape = Tape()
    layer = GatedAttentionLayer(config, params)
    out, _, gq, gkv, _ = layer.cross_forward(tape, tape.leaf(q_input), tape.leaf(kv_input))
    return out.value, GateMatrix(gq), GateMatrix(gkv)


def param_count(config: AttentionConfig) -> dict:
    """Parameter accounting for one layer: regular vs gated, the per-layer
    delta, and the gate-network size."""
    d, L = config.model_dim, config.langs
    base = 3 * d * d + d * d  # h heads of d x d/h q/k/v plus the output map
    if not config.gated:
        return {"base": base, "gated": base, "gate_network": 0, "delta": 0, "delta_fraction": 0.0}
    gate_network = d * L if config.method == 1 else d
    gated = 3 * d * d * L + d * d + gate_network
    return {
        "base": base,
        "gated": gated,
        "gate_network": gate_network,
        "delta": gated - base,
        "delta_fraction": (gated - base) / base,
    }
