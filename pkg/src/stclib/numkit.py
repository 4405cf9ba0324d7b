"""Numerically stable log-domain primitives, small dense matrix helpers,
and a seeded, splittable random number generator.

Matrices are plain 2-D float64 numpy arrays (row-major). -inf is the
canonical log-zero; NaN must never appear in stored values.
"""

from __future__ import annotations

import numpy as np

LOG_ZERO = float("-inf")


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible; carries both shapes."""

    def __init__(self, op: str, a_shape, b_shape):
        self.a_shape = tuple(a_shape)
        self.b_shape = tuple(b_shape)
        super().__init__(f"{op}: incompatible shapes {self.a_shape} and {self.b_shape}")


def log_sum_exp(values) -> float:
    """log(sum(exp(v))) over a non-empty list of log-domain reals.

    Max-shifted so inputs up to +-1e6 cannot overflow. All-(-inf) input
    yields -inf (the empty-sum neutral element in log space).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty reduction")
    m = float(np.max(v))
    if m == LOG_ZERO:
        return LOG_ZERO
    if np.isposinf(m):
        return float("inf")
    return m + float(np.log(np.sum(np.exp(v - m))))


def logsumexp_axis(a: np.ndarray, axis: int) -> np.ndarray:
    """Max-shifted log-sum-exp along one axis; -inf rows stay -inf."""
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isneginf(m), 0.0, m)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = safe.squeeze(axis) + np.log(np.sum(np.exp(a - safe), axis=axis))
    return np.where(np.isneginf(m.squeeze(axis)), LOG_ZERO, out)


def softmax(values) -> np.ndarray:
    """Probability vector exp(v)/sum(exp(v)); shift-invariant by max-shift."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("empty reduction")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax requires finite input")
    e = np.exp(v - np.max(v))
    return e / np.sum(e)


def softmax_rows(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    e = np.exp(a - np.max(a, axis=1, keepdims=True))
    return e / np.sum(e, axis=1, keepdims=True)


def log_softmax_rows(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a - logsumexp_axis(a, axis=1)[:, None]


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    return a @ b


def transpose(a: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=np.float64).T.copy()


def scale(a: np.ndarray, c: float) -> np.ndarray:
    return np.asarray(a, dtype=np.float64) * float(c)


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError("add", a.shape, b.shape)
    return a + b


class Rng:
    """Deterministic PCG64 generator addressed by (seed, stream key path).

    `stream(*key)` derives an independent child generator from the same
    seed via numpy SeedSequence spawn keys, so per-utterance randomness is
    reproducible regardless of evaluation order. Identical (seed, key)
    always replays the identical draw sequence.
    """

    def __init__(self, seed: int, _key: tuple = ()):
        self.seed = int(seed)
        self.key = tuple(int(k) for k in _key)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def stream(self, *key: int) -> "Rng":
        return Rng(self.seed, self.key + key)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None) -> int | np.ndarray:
        out = self._gen.integers(low, high, size)
        return int(out) if size is None else out

    def choice(self, options, p=None):
        idx = self._gen.choice(len(options), p=p)
        return options[int(idx)]

    def __repr__(self):
        return f"Rng(seed={self.seed}, key={self.key})"
