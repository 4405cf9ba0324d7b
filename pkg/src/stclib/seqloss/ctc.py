"""CTC loss over a blank-augmented lattice: log-space forward/backward DP,
the minimal-input-length rule for repeated targets, and random target
trimming that keeps the loss finite.
"""

from __future__ import annotations

import numpy as np

from ..numkit import LOG_ZERO, Rng, logsumexp_axis
from .types import LidSequence, LogProbLattice, LossResult, VocabError


def ctc_required_length(target) -> int:
    """Minimal number of input frames for a finite CTC loss: |y| plus one
    extra blank frame per adjacent equal-token pair (the 2N-1 rule for a
    fully repeated target).
    """
    tokens = target.tokens if isinstance(target, LidSequence) else tuple(target)
    if len(tokens) == 0:
        raise ValueError("empty target")
    repeats = sum(1 for a, b in zip(tokens, tokens[1:]) if a == b)
    return len(tokens) + repeats


def ctc_loss(lattice: LogProbLattice, target: LidSequence) -> LossResult:
    """-log P(target | lattice) summed over all blank-augmented alignments,
    with the gradient w.r.t. the lattice log-probabilities.

    Returns loss=+inf and a zero gradient when the input is too short to
    carry the target.
    """
    if len(target) == 0:
        raise ValueError("empty target")
    vocab = lattice.vocab
    tgt_idx = [vocab.index(tok) for tok in target.tokens]
    if vocab.blank_index in tgt_idx:
        raise VocabError("CTC target must not contain the blank token")
    loss, grad = ctc_loss_values(lattice.values, tgt_idx, vocab.blank_index)
    return LossResult(loss, grad)


def ctc_loss_values(values: np.ndarray, tgt_idx: list[int], blank: int) -> tuple[float, np.ndarray]:
    """Array-level CTC forward/backward; `values` is T x V of log-probs."""
    values = np.asarray(values, dtype=np.float64)
    T, V = values.shape
    if T < ctc_required_length(tgt_idx):
        return float("inf"), np.zeros_like(values)

    ext = np.empty(2 * len(tgt_idx) + 1, dtype=np.int64)
    ext[0::2] = blank
    ext[1::2] = tgt_idx
    S = len(ext)
    # skip transition s-2 -> s allowed when ext[s] is a label differing from ext[s-2]
    can_skip = np.zeros(S, dtype=bool)
    can_skip[3::2] = ext[3::2] != ext[1:-2:2]

    emit = values[:, ext]  # T x S

    alpha = np.full((T, S), LOG_ZERO)
    alpha[0, 0] = emit[0, 0]
    alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        stay = prev
        step = np.concatenate(([LOG_ZERO], prev[:-1]))
        skip = np.concatenate(([LOG_ZERO, LOG_ZERO], prev[:-2]))
        skip = np.where(can_skip, skip, LOG_ZERO)
        alpha[t] = logsumexp_axis(np.stack([stay, step, skip]), axis=0) + emit[t]

    log_p = float(logsumexp_axis(alpha[T - 1, S - 2 :], axis=0))
    if log_p == LOG_ZERO:
        return float("inf"), np.zeros_like(values)

    beta = np.full((T, S), LOG_ZERO)
    beta[T - 1, S - 1] = 0.0
    beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        stay = nxt
        step = np.concatenate((nxt[1:], [LOG_ZERO]))
        skip = np.concatenate((nxt[2:], [LOG_ZERO, LOG_ZERO]))
        skip = np.where(np.concatenate((can_skip[2:], [False, False])), skip, LOG_ZERO)
        beta[t] = logsumexp_axis(np.stack([stay, step, skip]), axis=0)

    grad = np.zeros_like(values)
    occupancy = alpha + beta  # log posterior mass per (frame, ext state)
    for v in set(int(i) for i in ext):
        cols = np.flatnonzero(ext == v)
        mass = logsumexp_axis(occupancy[:, cols], axis=1)
        grad[:, v] = -np.exp(mass - log_p)
    return -log_p + 0.0, grad


def trim_target(target: LidSequence, max_frames: int, rng: Rng) -> LidSequence:
    """Randomly drop tokens from repeat runs until the CTC required length
    fits `max_frames`; if no repeat run remains and it still does not fit,
    drop arbitrary tokens down to a single-token target.

    Repeat-run removals never change the collapsed (de-duplicated) target.
    """
    if max_frames < 1:
        raise ValueError("max_frames must be >= 1")
    toks = list(target.tokens)
    while toks and ctc_required_length(toks) > max_frames:
        in_run = [
            i
            for i in range(len(toks))
            if (i > 0 and toks[i - 1] == toks[i]) or (i + 1 < len(toks) and toks[i + 1] == toks[i])
        ]
        if in_run:
            toks.pop(in_run[rng.integers(len(in_run))])
        elif len(toks) > 1:
            toks.pop(rng.integers(len(toks)))
        else:
            break
    return LidSequence(target.level, tuple(toks))


def collapse(tokens) -> tuple:
    """Remove consecutive duplicate tokens."""
    out = []
    for tok in tokens:
        if not out or out[-1] != tok:
            out.append(tok)
    return tuple(out)
