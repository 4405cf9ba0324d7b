import itertools
import math

import numpy as np
import pytest

from stclib.seqloss import (
    BLANK,
    LidSequence,
    LidVocab,
    ctc_loss,
    enumerate_ctc,
    enumerate_ctc_values,
    enumerate_stc,
    enumerate_stc_values,
    stc_loss,
    uniform_lattice,
)

from conftest import random_lattice


def word(*toks):
    return LidSequence("word", toks)


class TestGuards:
    def test_size_guard(self):
        with pytest.raises(ValueError, match="guard"):
            enumerate_stc_values(np.zeros((13, 2)), [0], alphabet=[0, 1])
        with pytest.raises(ValueError, match="guard"):
            enumerate_ctc_values(np.zeros((3, 6)), [0], 5, alphabet=[0, 1, 2, 3, 4])


class TestAgainstDp:
    def test_ctc_dp_equals_enumeration(self, ab_vocab):
        rng = np.random.default_rng(0)
        for _ in range(60):
            frames = int(rng.integers(1, 7))
            n = int(rng.integers(1, frames + 1))
            toks = [("a", "b")[i] for i in rng.integers(0, 2, size=n)]
            lat = random_lattice(ab_vocab, frames, rng, support=["a", "b", BLANK])
            prob = enumerate_ctc(lat, word(*toks))
            loss = ctc_loss(lat, word(*toks)).loss
            if prob == 0.0:
                assert loss == math.inf
            else:
                assert -math.log(prob) == pytest.approx(loss, abs=1e-8)

    def test_stc_dp_equals_enumeration(self, ab_vocab):
        rng = np.random.default_rng(1)
        for _ in range(60):
            frames = int(rng.integers(1, 7))
            n = int(rng.integers(1, frames + 2))  # occasionally too long
            toks = [("a", "b")[i] for i in rng.integers(0, 2, size=n)]
            lat = random_lattice(ab_vocab, frames, rng, support=["a", "b"])
            prob = enumerate_stc(lat, word(*toks))
            loss = stc_loss(lat, word(*toks)).loss
            if prob == 0.0:
                assert loss == math.inf
            else:
                assert -math.log(prob) == pytest.approx(loss, abs=1e-8)


class TestNormalization:
    def test_uniform_lattice_sums_to_one(self, ab_vocab):
        lat = uniform_lattice(ab_vocab, 3, support=["a", "b"])
        total = 0.0
        for n in range(1, 4):
            for toks in itertools.product("ab", repeat=n):
                total += enumerate_stc(lat, word(*toks))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_too_long_target_has_zero_mass(self, ab_vocab):
        lat = uniform_lattice(ab_vocab, 2, support=["a", "b"])
        assert enumerate_stc(lat, word("a", "b", "a")) == 0.0

    def test_three_language_vocab(self):
        vocab = LidVocab(("a", "b", "c"))
        rng = np.random.default_rng(2)
        lat = random_lattice(vocab, 4, rng, support=["a", "b", "c"])
        loss = stc_loss(lat, word("a", "c")).loss
        prob = enumerate_stc(lat, word("a", "c"))
        assert -math.log(prob) == pytest.approx(loss, abs=1e-8)
