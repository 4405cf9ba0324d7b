import math

import numpy as np
import pytest

from stclib.seqloss import (
    GateMatrix,
    LidSequence,
    LidVocab,
    LossResult,
    SPACE,
    WgSchedule,
    gate_ce_loss,
    gating_loss_total,
    smoothness_penalty,
)

from conftest import assert_grad_close, central_difference


@pytest.fixture
def vocab():
    return LidVocab(("GUJ", "ENG"))


class TestGateCeLoss:
    def test_matching_distribution_zero(self, vocab):
        q = np.array([[0.9, 0.1], [0.1, 0.9]])
        target = LidSequence("char", ("GUJ", "ENG"))
        res = gate_ce_loss(GateMatrix(q), target, vocab, smoothing=0.1)
        assert res.loss == pytest.approx(0.0, abs=1e-12)

    def test_all_space_frames_fully_masked(self, vocab):
        gates = GateMatrix(np.array([[0.5, 0.5]] * 3))
        target = LidSequence("char", (SPACE, SPACE, SPACE))
        res = gate_ce_loss(gates, target, vocab)
        assert res.loss == 0.0
        assert np.all(res.grad == 0.0)

    def test_hand_value(self, vocab):
        gates = GateMatrix(np.array([[0.5, 0.5]]))
        target = LidSequence("char", ("GUJ",))
        res = gate_ce_loss(gates, target, vocab, smoothing=0.1)
        want = 0.9 * math.log(1.8) + 0.1 * math.log(0.2)
        assert res.loss == pytest.approx(want, abs=1e-12)
        assert res.loss == pytest.approx(0.3681, abs=5e-5)

    def test_resolution_mismatch_rejected(self, vocab):
        gates = GateMatrix(np.array([[0.5, 0.5]] * 3))
        with pytest.raises(ValueError, match="resolution"):
            gate_ce_loss(gates, LidSequence("char", ("GUJ",)), vocab)
        with pytest.raises(ValueError):
            gate_ce_loss(gates, LidSequence("word", ("GUJ", "ENG", "GUJ")), vocab)

    def test_gradient(self, vocab):
        rng = np.random.default_rng(0)
        for _ in range(10):
            g = rng.dirichlet(np.ones(2), size=5)
            toks = tuple(("GUJ", "ENG", SPACE)[i] for i in rng.integers(0, 3, size=5))
            target = LidSequence("char", toks)

            def f(vals):
                return gate_ce_loss(GateMatrix(vals, validate=False), target, vocab).loss

            res = gate_ce_loss(GateMatrix(g), target, vocab)
            assert_grad_close(res.grad, central_difference(f, g))


class TestSmoothnessPenalty:
    def test_constant_gates_zero(self):
        res = smoothness_penalty(GateMatrix(np.array([[0.3, 0.7]] * 5)))
        assert res.loss == 0.0

    def test_alternating_gates(self):
        g = GateMatrix(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]))
        assert smoothness_penalty(g).loss == pytest.approx(2.0, abs=1e-12)

    def test_time_reversal_invariant(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            g = rng.dirichlet(np.ones(3), size=6)
            a = smoothness_penalty(GateMatrix(g)).loss
            b = smoothness_penalty(GateMatrix(g[::-1].copy())).loss
            assert a == pytest.approx(b, abs=1e-12)

    def test_subgradient_at_generic_points(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            g = rng.dirichlet(np.ones(2), size=4)

            def f(vals):
                return smoothness_penalty(GateMatrix(vals, validate=False)).loss

            res = smoothness_penalty(GateMatrix(g))
            assert_grad_close(res.grad, central_difference(f, g))

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            smoothness_penalty(GateMatrix(np.array([[1.0, 0.0]])))


class TestGatingLossTotal:
    def test_plain_mean_at_default_weight(self):
        layers = [LossResult(1.0), LossResult(3.0)]
        res = gating_loss_total(layers, WgSchedule.parse("1.0"), epoch=12)
        assert res.loss == pytest.approx(2.0)

    def test_staged_weight_hits_zero(self):
        layers = [LossResult(5.0)]
        res = gating_loss_total(layers, WgSchedule.parse("1.::0.1::0."), epoch=25)
        assert res.loss == 0.0

    def test_open_ended_stage(self):
        layers = [LossResult(4.0)]
        res = gating_loss_total(layers, WgSchedule.parse("1.::0.1"), epoch=10)
        assert res.loss == pytest.approx(0.4)

    def test_linear_in_weight(self):
        rng = np.random.default_rng(3)
        losses = [LossResult(float(l), rng.normal(size=(3, 2))) for l in rng.uniform(0, 5, 4)]
        single = gating_loss_total(losses, WgSchedule((0.35,)), 0)
        double = gating_loss_total(losses, WgSchedule((0.7,)), 0)
        assert double.loss == pytest.approx(2 * single.loss, abs=1e-12)
        for g1, g2 in zip(single.grad, double.grad):
            np.testing.assert_allclose(2 * g1, g2, atol=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            gating_loss_total([], WgSchedule((1.0,)), 0)
