"""Exponential brute-force oracles for the temporal losses: enumerate every
alignment string and apply the projection definitions literally. Test-only
workhorses; guarded against workloads beyond desk scale.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .ctc import collapse
from .stc import _runs
from .types import LidSequence, LogProbLattice

MAX_FRAMES = 12
MAX_ALPHABET = 4


def _live_columns(values: np.ndarray) -> list[int]:
    return [int(c) for c in np.flatnonzero(np.any(np.isfinite(values), axis=0))]


def _guard(frames: int, alphabet) -> None:
    if frames > MAX_FRAMES or len(alphabet) > MAX_ALPHABET:
        raise ValueError(
            f"enumeration guard exceeded: frames={frames}, alphabet={len(alphabet)} "
            f"(limits {MAX_FRAMES}, {MAX_ALPHABET})"
        )


def enumerate_ctc_values(
    values: np.ndarray, tgt_idx: list[int], blank: int, alphabet: list[int] | None = None
) -> float:
    """Exact P(target | lattice) by summing over every length-T string whose
    collapse (drop duplicate runs, then blanks) equals the target."""
    values = np.asarray(values, dtype=np.float64)
    if alphabet is None:
        alphabet = _live_columns(values)
    _guard(values.shape[0], alphabet)
    target = tuple(tgt_idx)
    total = 0.0
    for string in itertools.product(alphabet, repeat=values.shape[0]):
        projected = tuple(t for t in collapse(string) if t != blank)
        if projected != target:
            continue
        ll = sum(values[t, s] for t, s in enumerate(string))
        if ll > -math.inf:
            total += math.exp(ll)
    return total


def enumerate_stc_values(
    values: np.ndarray, tgt_idx: list[int], alphabet: list[int] | None = None
) -> float:
    """Exact P(target | lattice) under run-stretch alignments: every string
    whose run tokens match the target's and whose run lengths dominate them
    contributes P(string) / prod(run lengths)."""
    values = np.asarray(values, dtype=np.float64)
    if alphabet is None:
        alphabet = _live_columns(values)
    _guard(values.shape[0], alphabet)
    want_toks, want_lens = _runs(tuple(tgt_idx))
    total = 0.0
    for string in itertools.product(alphabet, repeat=values.shape[0]):
        toks, lens = _runs(string)
        if toks != want_toks or any(w > n for w, n in zip(want_lens, lens)):
            continue
        ll = sum(values[t, s] for t, s in enumerate(string))
        if ll > -math.inf:
            total += math.exp(ll) / math.prod(lens)
    return total


def enumerate_ctc(lattice: LogProbLattice, target: LidSequence) -> float:
    vocab = lattice.vocab
    tgt = [vocab.index(t) for t in target.tokens]
    return enumerate_ctc_values(lattice.values, tgt, vocab.blank_index)


def enumerate_stc(lattice: LogProbLattice, target: LidSequence) -> float:
    vocab = lattice.vocab
    tgt = [vocab.index(t) for t in target.tokens]
    return enumerate_stc_values(lattice.values, tgt)
