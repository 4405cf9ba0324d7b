"""Frame-resolution gate losses (usable when gates and reference share one
temporal resolution) and the stage-weighted aggregation of per-layer
gating losses.
"""

from __future__ import annotations

import numpy as np

from .types import (
    EOSSOS,
    GateMatrix,
    LidSequence,
    LidVocab,
    LossResult,
    SPACE,
    UNK,
    WgSchedule,
)

IGNORED_TOKENS = (SPACE, UNK, EOSSOS)


def gate_ce_loss(
    gates: GateMatrix, target: LidSequence, vocab: LidVocab, smoothing: float = 0.1
) -> LossResult:
    """Mean KL(q_t || g_t) over frames whose reference token is a language;
    q_t puts 1-smoothing on the reference language and smoothing/(L-1) on
    the others. SPACE/UNK/EOS-SOS frames are excluded from the mean.
    """
    if target.level != "char":
        raise ValueError("per-frame KL loss needs a char-level reference")
    if gates.frames != len(target):
        raise ValueError(
            f"per-frame loss needs equal resolution: {gates.frames} frames vs "
            f"{len(target)} reference tokens"
        )
    L = gates.num_languages
    g = gates.values
    grad = np.zeros_like(g)
    total = 0.0
    active = 0
    for t, tok in enumerate(target.tokens):
        if tok in IGNORED_TOKENS:
            continue
        lang = vocab.index(tok)
        if not vocab.is_language_index(lang):
            raise ValueError(f"reference token {tok!r} is not a language")
        q = np.full(L, smoothing / (L - 1) if L > 1 else 0.0)
        q[lang] = 1.0 - smoothing
        with np.errstate(divide="ignore"):
            total += float(np.sum(q * (np.log(q) - np.log(g[t]))))
            grad[t] = -q / g[t]
        active += 1
    if active == 0:
        return LossResult(0.0, np.zeros_like(g))
    return LossResult(total / active, grad / active)


def smoothness_penalty(gates: GateMatrix) -> LossResult:
    """Mean L1 total variation of the gate rows over time, with its
    subgradient; zero for constant gates."""
    g = gates.values
    T = g.shape[0]
    if T < 2:
        raise ValueError("smoothness penalty needs at least 2 frames")
    diffs = g[1:] - g[:-1]
    loss = float(np.sum(np.abs(diffs))) / (T - 1)
    grad = np.zeros_like(g)
    signs = np.sign(diffs) / (T - 1)
    grad[1:] += signs
    grad[:-1] -= signs
    return LossResult(loss, grad)


def gating_loss_total(
    per_layer: list[LossResult], schedule: WgSchedule, epoch: int
) -> LossResult:
    """w_g(epoch) times the mean of the per-layer gating losses; the result
    carries one scaled gradient per layer."""
    if not per_layer:
        raise ValueError("no per-layer losses")
    w = schedule.weight(epoch)
    n = len(per_layer)
    loss = w * sum(r.loss for r in per_layer) / n
    grads = [None if r.grad is None else (w / n) * r.grad for r in per_layer]
    return LossResult(loss, grads)
