"""Core value types shared by the loss family: vocabularies, lattices,
LID sequences, gate matrices, loss results, and gating-weight schedules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numkit import LOG_ZERO, logsumexp_axis

SPACE = "<SPACE>"
BLANK = "<BLANK>"
UNK = "<UNK>"
EOSSOS = "<EOS/SOS>"
SPECIALS = (SPACE, BLANK, UNK, EOSSOS)


class VocabError(ValueError):
    pass


@dataclass(frozen=True)
class LidVocab:
    """Token vocabulary: L leading payload tokens (language IDs, or toy text
    tokens) followed by the four fixed specials SPACE, BLANK, UNK, EOS/SOS.
    """

    languages: tuple[str, ...]

    def __post_init__(self):
        if len(self.languages) < 1:
            raise VocabError("vocabulary needs at least one language token")
        if len(set(self.languages)) != len(self.languages):
            raise VocabError("duplicate language tokens")
        for tok in self.languages:
            if tok in SPECIALS:
                raise VocabError(f"language token collides with special: {tok}")

    @property
    def num_languages(self) -> int:
        return len(self.languages)

    @property
    def size(self) -> int:
        return len(self.languages) + 4

    @property
    def tokens(self) -> tuple[str, ...]:
        return self.languages + SPECIALS

    @property
    def space_index(self) -> int:
        return len(self.languages)

    @property
    def blank_index(self) -> int:
        return len(self.languages) + 1

    def index(self, token: str) -> int:
        try:
            return self.tokens.index(token)
        except ValueError:
            raise VocabError(f"token not in vocabulary: {token!r}") from None

    def token(self, index: int) -> str:
        return self.tokens[index]

    def is_language_index(self, index: int) -> bool:
        return 0 <= index < len(self.languages)


@dataclass(frozen=True)
class LidSequence:
    """Reference token sequence, word-level (one language token per word,
    no SPACE) or char-level (SPACE delimiters between words, no BLANK).
    """

    level: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        if self.level not in ("word", "char"):
            raise ValueError(f"level must be 'word' or 'char', got {self.level!r}")
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if BLANK in self.tokens:
            raise ValueError("LID sequences never contain the blank token")
        if self.level == "word" and SPACE in self.tokens:
            raise ValueError("word-level LID sequences carry no SPACE delimiters")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class LogProbLattice:
    """T x V per-frame log-probabilities over a vocabulary.

    Rows log-sum-exp to 0 (within 1e-9) and entries are <= 0; -inf marks
    log-zero. `validate=False` skips the checks (used by finite-difference
    probes that perturb entries).
    """

    vocab: LidVocab
    values: np.ndarray
    validate: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != self.vocab.size:
            raise ValueError(
                f"lattice shape {self.values.shape} does not match vocab size {self.vocab.size}"
            )
        if np.isnan(self.values).any():
            raise ValueError("lattice contains NaN")
        if self.validate:
            if np.any(self.values > 1e-12):
                raise ValueError("lattice entries must be <= 0 (log domain)")
            row_mass = logsumexp_axis(self.values, axis=1)
            if np.max(np.abs(row_mass)) > 1e-9:
                raise ValueError("lattice rows must log-sum-exp to 0")

    @property
    def frames(self) -> int:
        return self.values.shape[0]


@dataclass
class GateMatrix:
    """T x L per-frame probability distribution over languages."""

    values: np.ndarray
    validate: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"gate matrix must be 2-D, got shape {self.values.shape}")
        if np.isnan(self.values).any():
            raise ValueError("gate matrix contains NaN")
        if self.validate:
            row_sums = np.sum(self.values, axis=1)
            if self.values.shape[0] and np.max(np.abs(row_sums - 1.0)) > 1e-9:
                raise ValueError("gate rows must sum to 1")

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_languages(self) -> int:
        return self.values.shape[1]


@dataclass
class LossResult:
    """Loss value (+inf allowed) and gradient w.r.t. the differentiated
    input; aggregated results carry one gradient per layer. The gradient is
    finite (zero for impossible targets) whenever it is present.
    """

    loss: float
    grad: np.ndarray | list[np.ndarray] | None = None

    @property
    def finite(self) -> bool:
        return np.isfinite(self.loss)


STAGE_EPOCHS = 10


@dataclass(frozen=True)
class WgSchedule:
    """Stage-wise gating-loss weight: `x::y::z` means weight x for the
    first 10 epochs, y for the next 10, then z for the remaining time.
    The last stage is open-ended.
    """

    weights: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if len(self.weights) == 0:
            raise ValueError("schedule needs at least one stage")
        if any(w < 0 for w in self.weights):
            raise ValueError("stage weights must be >= 0")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @classmethod
    def parse(cls, text: str) -> "WgSchedule":
        try:
            return cls(tuple(float(part) for part in text.split("::")))
        except ValueError as exc:
            raise ValueError(f"bad schedule string {text!r}: {exc}") from None

    def to_text(self) -> str:
        return "::".join(repr(w) for w in self.weights)

    def weight(self, epoch: int) -> float:
        if epoch < 0:
            raise ValueError("epoch must be >= 0")
        return self.weights[min(epoch // STAGE_EPOCHS, len(self.weights) - 1)]


def uniform_lattice(vocab: LidVocab, frames: int, support: list[str] | None = None) -> LogProbLattice:
    """Uniform rows over `support` tokens (all tokens if None); the rest -inf."""
    cols = [vocab.index(t) for t in support] if support is not None else list(range(vocab.size))
    row = np.full(vocab.size, LOG_ZERO)
    row[cols] = -np.log(len(cols))
    return LogProbLattice(vocab, np.tile(row, (frames, 1)))
