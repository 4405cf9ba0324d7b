import itertools
import math

import numpy as np
import pytest

from stclib.seqloss import (
    BLANK,
    LidSequence,
    LogProbLattice,
    VocabError,
    stc_loss,
    stc_loss_naive,
    stc_loss_values,
    stc_loss_values_memo,
    stc_loss_values_table,
    uniform_lattice,
)

from conftest import assert_grad_close, central_difference, random_lattice


def word(*toks):
    return LidSequence("word", toks)


class TestStcLoss:
    def test_equal_lengths_force_alignment(self, ab_vocab):
        vals = np.full((2, ab_vocab.size), -np.inf)
        vals[0, ab_vocab.index("a")] = 0.0
        vals[1, ab_vocab.index("b")] = 0.0
        res = stc_loss(LogProbLattice(ab_vocab, vals), word("a", "b"))
        assert res.loss == pytest.approx(0.0, abs=1e-12)

    def test_uniform_two_runs(self, ab_vocab):
        # alignments aab and abb, each probability 1/8 and 2 reachable outputs
        lat = uniform_lattice(ab_vocab, 3, support=["a", "b"])
        assert stc_loss(lat, word("a", "b")).loss == pytest.approx(math.log(8), abs=1e-12)

    def test_uniform_repeated_target(self, ab_vocab):
        # single alignment aaa with run length 3
        lat = uniform_lattice(ab_vocab, 3, support=["a", "b"])
        assert stc_loss(lat, word("a", "a")).loss == pytest.approx(math.log(24), abs=1e-12)

    def test_target_longer_than_input_infinite(self, ab_vocab):
        lat = uniform_lattice(ab_vocab, 2, support=["a", "b"])
        res = stc_loss(lat, word("a", "b", "a"))
        assert res.loss == math.inf
        assert np.all(res.grad == 0.0)

    def test_blank_rejected(self, ab_vocab):
        # the sequence type blocks blanks up front; the loss itself guards
        # the raw-array path with its own message
        with pytest.raises(ValueError, match="blank"):
            word("a", BLANK)
        from stclib.seqloss.stc import _check_target

        hacked = word("a")
        object.__setattr__(hacked, "tokens", ("a", BLANK))
        with pytest.raises(VocabError, match="STC has no blank"):
            _check_target(uniform_lattice(ab_vocab, 3), hacked)

    def test_is_a_distribution_over_targets(self, ab_vocab):
        rng = np.random.default_rng(0)
        for frames in (2, 3, 4, 5):
            for lat in (
                uniform_lattice(ab_vocab, frames, support=["a", "b"]),
                random_lattice(ab_vocab, frames, rng, support=["a", "b"]),
            ):
                total = 0.0
                for n in range(1, frames + 1):
                    for toks in itertools.product("ab", repeat=n):
                        total += math.exp(-stc_loss(lat, word(*toks)).loss)
                assert total == pytest.approx(1.0, abs=1e-9)

    def test_gradient_matches_central_differences(self, ab_vocab):
        rng = np.random.default_rng(1)
        for _ in range(12):
            frames = int(rng.integers(1, 6))
            n = int(rng.integers(1, frames + 1))
            toks = [("a", "b")[i] for i in rng.integers(0, 2, size=n)]
            lat = random_lattice(ab_vocab, frames, rng, support=["a", "b"])
            res = stc_loss(lat, word(*toks))
            idx = [ab_vocab.index(t) for t in toks]
            fd = central_difference(lambda v: stc_loss_values(v, idx)[0], lat.values)
            assert_grad_close(res.grad, fd)


class TestEngineAgreement:
    def test_three_engines_match(self, ab_vocab):
        rng = np.random.default_rng(2)
        for _ in range(60):
            frames = int(rng.integers(1, 8))
            n = int(rng.integers(1, frames + 1))
            idx = [int(i) for i in rng.integers(0, 2, size=n)]
            vals = random_lattice(ab_vocab, frames, rng).values
            l_vec, g_vec = stc_loss_values(vals, idx)
            l_tab, g_tab = stc_loss_values_table(vals, idx)
            l_memo, g_memo = stc_loss_values_memo(vals, idx)
            assert l_vec == pytest.approx(l_tab, abs=1e-9)
            assert l_vec == pytest.approx(l_memo, abs=1e-9)
            np.testing.assert_allclose(g_vec, g_tab, atol=1e-9)
            np.testing.assert_allclose(g_vec, g_memo, atol=1e-9)


class TestNaiveRecursion:
    def test_formula_mode_equals_canonical(self, ab_vocab):
        rng = np.random.default_rng(3)
        for _ in range(100):
            frames = int(rng.integers(1, 7))
            n = int(rng.integers(1, frames + 1))
            toks = [("a", "b")[i] for i in rng.integers(0, 2, size=n)]
            lat = random_lattice(ab_vocab, frames, rng)
            a = stc_loss(lat, word(*toks)).loss
            b = stc_loss_naive(lat, word(*toks), "formula").loss
            assert a == pytest.approx(b, abs=1e-9)

    def test_listing_mode_hand_trace(self, ab_vocab):
        # target-run normalization divides the single aaa alignment by 2, not 3
        lat = uniform_lattice(ab_vocab, 3, support=["a", "b"])
        res = stc_loss_naive(lat, word("a", "a"), "listing")
        assert res.loss == pytest.approx(math.log(16), abs=1e-12)

    def test_listing_mode_does_not_normalize(self, ab_vocab):
        lat = uniform_lattice(ab_vocab, 3, support=["a", "b"])
        total = 0.0
        for n in range(1, 4):
            for toks in itertools.product("ab", repeat=n):
                total += math.exp(-stc_loss_naive(lat, word(*toks), "listing").loss)
        assert abs(total - 1.0) > 1e-3

    def test_unknown_mode_rejected(self, ab_vocab):
        lat = uniform_lattice(ab_vocab, 2)
        with pytest.raises(ValueError):
            stc_loss_naive(lat, word("a"), "banana")
