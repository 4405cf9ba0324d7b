"""Maps from per-frame gate distributions to token lattices: fixed
alpha-smoothing over the language columns, and a trainable windowed linear
projection. Both come with vector-Jacobian products so gate-side losses can
chain gradients back to the gates (and projection weights).
"""

from __future__ import annotations

import numpy as np

from ..numkit import LOG_ZERO, log_softmax_rows, softmax_rows
from .types import GateMatrix, LidVocab, LogProbLattice


def alpha_project(gates: GateMatrix, alpha: float, vocab: LidVocab) -> LogProbLattice:
    """Spread mass alpha over the language columns proportionally to the
    gates and (1-alpha)/4 over each of the four specials. Rows stay
    normalized because alpha*sum(g) + 4*(1-alpha)/4 = 1.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if gates.num_languages != vocab.num_languages:
        raise ValueError(
            f"gates have {gates.num_languages} languages, vocab has {vocab.num_languages}"
        )
    g = gates.values
    out = np.empty((gates.frames, vocab.size))
    with np.errstate(divide="ignore"):
        out[:, : vocab.num_languages] = np.where(g > 0.0, np.log(alpha) + np.log(g), LOG_ZERO)
    out[:, vocab.num_languages :] = np.log((1.0 - alpha) / 4.0)
    # unvalidated gates (finite-difference probes) yield unvalidated lattices
    return LogProbLattice(vocab, out, validate=gates.validate)


def alpha_project_vjp(gates: GateMatrix, alpha: float, lattice_grad: np.ndarray) -> np.ndarray:
    """Pull a lattice gradient back to the gates: d log(alpha*g)/dg = 1/g on
    the language columns; special columns do not depend on the gates."""
    g = gates.values
    up = lattice_grad[:, : g.shape[1]]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(up != 0.0, up / g, 0.0)
    return out


def _window(gates_values: np.ndarray, context_k: int) -> np.ndarray:
    """Stack frames t-k..t+k (zero-padded at the edges) into rows of width
    (2k+1)*L, frame-major."""
    T, L = gates_values.shape
    padded = np.zeros((T + 2 * context_k, L))
    padded[context_k : context_k + T] = gates_values
    cols = [padded[off : off + T] for off in range(2 * context_k + 1)]
    return np.concatenate(cols, axis=1)


def linear_project(
    gates: GateMatrix, weights: np.ndarray, context_k: int, vocab: LidVocab
) -> LogProbLattice:
    """Trainable projection: affine map over a fixed window of gate frames
    followed by a per-frame softmax, returned in the log domain. k=0 is the
    plain per-frame projection."""
    weights = np.asarray(weights, dtype=np.float64)
    want_rows = (2 * context_k + 1) * gates.num_languages
    if weights.shape != (want_rows, vocab.size):
        raise ValueError(
            f"projection weights shape {weights.shape} does not match "
            f"(({2 * context_k + 1}*{gates.num_languages}), {vocab.size})"
        )
    logits = _window(gates.values, context_k) @ weights
    return LogProbLattice(vocab, log_softmax_rows(logits))


def linear_project_vjp(
    gates: GateMatrix,
    weights: np.ndarray,
    context_k: int,
    lattice_grad: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of a loss on the projected lattice w.r.t. (gates, weights)."""
    T, L = gates.values.shape
    windowed = _window(gates.values, context_k)
    logits = windowed @ weights
    probs = softmax_rows(logits)
    glogits = lattice_grad - probs * np.sum(lattice_grad, axis=1, keepdims=True)
    gweights = windowed.T @ glogits
    gwindow = glogits @ weights.T
    ggates = np.zeros((T, L))
    for off in range(2 * context_k + 1):
        block = gwindow[:, off * L : (off + 1) * L]
        shift = off - context_k  # window slot `off` holds frame t+shift
        src = slice(max(0, -shift), T - max(0, shift))
        dst = slice(max(0, shift), T - max(0, -shift))
        ggates[dst] += block[src]
    return ggates, gweights
