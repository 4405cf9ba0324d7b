"""Blank-free temporal classification loss (STC).

An input alignment stretches each target token into a run of >= 1 frames;
every alignment's probability is divided by the product of its run lengths,
which makes the per-target quantities sum to one over all targets that fit
the input length. The dynamic program runs over (target run, frames
consumed) states in log space.

Three interchangeable engines back the same math:
  memo  - top-down recursion with a memo dict (reference implementation)
  table - bottom-up tabulation with explicit Python loops
  vec   - bottom-up tabulation, inner accumulation vectorized over numpy
          prefix sums (the canonical engine behind `stc_loss`)
"""

from __future__ import annotations

import math

import numpy as np

from ..numkit import LOG_ZERO, logsumexp_axis
from .types import BLANK, LidSequence, LogProbLattice, LossResult, VocabError


def _runs(tokens) -> tuple[list, list[int]]:
    """Collapse a token sequence into (run tokens, run lengths)."""
    toks, lens = [], []
    for t in tokens:
        if toks and toks[-1] == t:
            lens[-1] += 1
        else:
            toks.append(t)
            lens.append(1)
    return toks, lens


def _degenerate(values, tgt_idx):
    """Handle empty targets / too-long targets without running the DP."""
    T = values.shape[0]
    if len(tgt_idx) == 0:
        loss = 0.0 if T == 0 else float("inf")
        return LossResult(loss, np.zeros_like(values))
    if len(tgt_idx) > T:
        return LossResult(float("inf"), np.zeros_like(values))
    return None


def _token_prefixes(values, tok):
    """Per-frame prefix sums for one token column, splitting out -inf
    entries so segment sums stay exact: (finite-part prefix, -inf count
    prefix)."""
    col = values[:, tok]
    neg = np.isneginf(col)
    fin = np.where(neg, 0.0, col)
    csum = np.concatenate(([0.0], np.cumsum(fin)))
    ccnt = np.concatenate(([0], np.cumsum(neg)))
    return csum, ccnt


# ---------------------------------------------------------------------------
# vectorized engine (canonical)
# ---------------------------------------------------------------------------


def stc_loss_values(values: np.ndarray, tgt_idx: list[int]) -> tuple[float, np.ndarray]:
    """Array-level STC loss and gradient; `values` is T x V of log-probs."""
    values = np.asarray(values, dtype=np.float64)
    deg = _degenerate(values, tgt_idx)
    if deg is not None:
        return deg.loss, deg.grad
    run_toks, run_lens = _runs(tgt_idx)
    T = values.shape[0]
    k = len(run_toks)

    idx = np.arange(T + 1)
    n_mat = idx[:, None] - idx[None, :]  # frames assigned when run spans (s, t]
    log_n = np.where(n_mat > 0, np.log(np.maximum(n_mat, 1)), 0.0)

    A = [np.full(T + 1, LOG_ZERO)]
    A[0][0] = 0.0
    tabs = []
    for i in range(k):
        csum, ccnt = _token_prefixes(values, run_toks[i])
        seg = csum[:, None] - csum[None, :]
        ok = (n_mat >= run_lens[i]) & (ccnt[:, None] == ccnt[None, :])
        M = np.where(ok, A[i][None, :] + seg - log_n, LOG_ZERO)
        tabs.append(M)
        A.append(logsumexp_axis(M, axis=1))

    log_z = A[k][T]
    if log_z == LOG_ZERO:
        return float("inf"), np.zeros_like(values)

    grad = np.zeros_like(values)
    bar = np.zeros(T + 1)
    bar[T] = -1.0
    for i in range(k - 1, -1, -1):
        M, total = tabs[i], A[i + 1]
        live = np.isfinite(total) & (bar != 0.0)
        W = np.zeros_like(M)
        if np.any(live):
            W[live] = np.exp(M[live] - total[live, None])
        D = bar[:, None] * W
        col = np.sum(D, axis=0)
        row = np.sum(D, axis=1)
        grad[:, run_toks[i]] += np.cumsum(col - row)[:T]
        bar = col
    return float(-log_z) + 0.0, grad


# ---------------------------------------------------------------------------
# tabulated engine (plain loops)
# ---------------------------------------------------------------------------


def _lse_pair(a: float, b: float) -> float:
    if a == LOG_ZERO:
        return b
    if b == LOG_ZERO:
        return a
    m = a if a > b else b
    return m + math.log(math.exp(a - m) + math.exp(b - m))


def stc_loss_values_table(values: np.ndarray, tgt_idx: list[int]) -> tuple[float, np.ndarray]:
    values = np.asarray(values, dtype=np.float64)
    deg = _degenerate(values, tgt_idx)
    if deg is not None:
        return deg.loss, deg.grad
    run_toks, run_lens = _runs(tgt_idx)
    T = values.shape[0]
    k = len(run_toks)
    prefixes = [_token_prefixes(values, tok) for tok in run_toks]

    A = [[LOG_ZERO] * (T + 1) for _ in range(k + 1)]
    A[0][0] = 0.0
    for i in range(k):
        csum, ccnt = prefixes[i]
        for t in range(run_lens[i], T + 1):
            acc = LOG_ZERO
            for s in range(0, t - run_lens[i] + 1):
                if A[i][s] == LOG_ZERO or ccnt[t] != ccnt[s]:
                    continue
                acc = _lse_pair(acc, A[i][s] + (csum[t] - csum[s]) - math.log(t - s))
            A[i + 1][t] = acc

    log_z = A[k][T]
    if log_z == LOG_ZERO:
        return float("inf"), np.zeros_like(values)

    grad = np.zeros_like(values)
    bar = [0.0] * (T + 1)
    bar[T] = -1.0
    for i in range(k - 1, -1, -1):
        csum, ccnt = prefixes[i]
        nxt = [0.0] * (T + 1)
        diff = [0.0] * (T + 1)
        for t in range(run_lens[i], T + 1):
            if bar[t] == 0.0 or A[i + 1][t] == LOG_ZERO:
                continue
            for s in range(0, t - run_lens[i] + 1):
                if A[i][s] == LOG_ZERO or ccnt[t] != ccnt[s]:
                    continue
                m = A[i][s] + (csum[t] - csum[s]) - math.log(t - s)
                d = bar[t] * math.exp(m - A[i + 1][t])
                nxt[s] += d
                diff[s] += d
                diff[t] -= d
        running = 0.0
        for u in range(T):
            running += diff[u]
            grad[u, run_toks[i]] += running
        bar = nxt
    return float(-log_z) + 0.0, grad


# ---------------------------------------------------------------------------
# memoized engine (top-down)
# ---------------------------------------------------------------------------


def stc_loss_values_memo(
    values: np.ndarray, tgt_idx: list[int], normalization: str = "formula"
) -> tuple[float, np.ndarray]:
    """Top-down recursion with a memo dict keyed on (frame offset, run
    index); segment scores are recomputed per call exactly like the naive
    recursion, which is what makes this the slow rung of the ladder.

    `normalization="formula"` divides each alignment by its input run
    lengths and matches the other engines; `normalization="listing"`
    divides by the target run lengths instead (kept for documentation of
    the naive recursion; it does not normalize to a distribution).
    """
    if normalization not in ("formula", "listing"):
        raise ValueError(f"unknown normalization {normalization!r}")
    values = np.asarray(values, dtype=np.float64)
    deg = _degenerate(values, tgt_idx)
    if deg is not None:
        return deg.loss, deg.grad
    run_toks, run_lens = _runs(tgt_idx)
    T = values.shape[0]
    k = len(run_toks)
    cols = [values[:, tok].tolist() for tok in run_toks]
    suffix_min = [0] * (k + 1)
    for i in range(k - 1, -1, -1):
        suffix_min[i] = suffix_min[i + 1] + run_lens[i]

    memo: dict[tuple[int, int], float] = {}

    def seg_score(i: int, t: int, n: int) -> float:
        return sum(cols[i][t : t + n])

    def log_sub(t: int, i: int) -> float:
        """log prob of aligning frames t..T-1 with runs i..k-1."""
        if i == k:
            return 0.0 if t == T else LOG_ZERO
        key = (t, i)
        if key in memo:
            return memo[key]
        acc = LOG_ZERO
        slack = (T - t) - suffix_min[i]
        for extra in range(slack + 1):
            n = run_lens[i] + extra
            rest = log_sub(t + n, i + 1)
            if rest == LOG_ZERO:
                continue
            seg = seg_score(i, t, n)
            if seg == LOG_ZERO:
                continue
            norm = n if normalization == "formula" else run_lens[i]
            acc = _lse_pair(acc, seg - math.log(norm) + rest)
        memo[key] = acc
        return acc

    log_z = log_sub(0, 0)
    if log_z == LOG_ZERO:
        return float("inf"), np.zeros_like(values)

    # adjoint sweep over the memo graph, nodes in (run, frame) order
    grad = np.zeros_like(values)
    log_r: dict[tuple[int, int], float] = {(0, 0): 0.0}
    diffs = [np.zeros(T + 1) for _ in range(k)]
    for (t, i) in sorted(memo.keys(), key=lambda key: (key[1], key[0])):
        node_r = log_r.get((t, i), LOG_ZERO)
        if node_r == LOG_ZERO or memo[(t, i)] == LOG_ZERO:
            continue
        slack = (T - t) - suffix_min[i]
        for extra in range(slack + 1):
            n = run_lens[i] + extra
            if i + 1 == k:
                rest = 0.0 if t + n == T else LOG_ZERO
            else:
                rest = memo.get((t + n, i + 1), LOG_ZERO)
            if rest == LOG_ZERO:
                continue
            seg = seg_score(i, t, n)
            if seg == LOG_ZERO:
                continue
            norm = n if normalization == "formula" else run_lens[i]
            log_f = seg - math.log(norm)
            if i + 1 < k:
                child = (t + n, i + 1)
                log_r[child] = _lse_pair(log_r.get(child, LOG_ZERO), node_r + log_f)
            mass = math.exp(node_r + log_f + rest - log_z)
            diffs[i][t] += mass
            diffs[i][t + n] -= mass
    for i in range(k):
        grad[:, run_toks[i]] -= np.cumsum(diffs[i])[:T]
    return float(-log_z) + 0.0, grad


STC_IMPLEMENTATIONS = {
    "memo": stc_loss_values_memo,
    "table": stc_loss_values_table,
    "vec": stc_loss_values,
}


def _check_target(lattice: LogProbLattice, target: LidSequence) -> list[int]:
    if BLANK in target.tokens:
        raise VocabError("STC has no blank")
    return [lattice.vocab.index(tok) for tok in target.tokens]


def stc_loss(lattice: LogProbLattice, target: LidSequence) -> LossResult:
    """-log P(target | lattice) under run-stretch alignments, normalized by
    input run lengths; gradient w.r.t. the lattice log-probabilities."""
    tgt_idx = _check_target(lattice, target)
    loss, grad = stc_loss_values(lattice.values, tgt_idx)
    return LossResult(loss, grad)


def stc_loss_naive(
    lattice: LogProbLattice, target: LidSequence, normalization: str = "formula"
) -> LossResult:
    """Memoized top-down recursion; see `stc_loss_values_memo` for modes."""
    tgt_idx = _check_target(lattice, target)
    loss, grad = stc_loss_values_memo(lattice.values, tgt_idx, normalization)
    return LossResult(loss, grad)
