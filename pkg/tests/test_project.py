import math

import numpy as np
import pytest

from stclib.seqloss import (
    GateMatrix,
    LidVocab,
    alpha_project,
    alpha_project_vjp,
    ctc_loss_values,
    linear_project,
    linear_project_vjp,
    stc_loss_values,
)

from conftest import assert_grad_close, central_difference


@pytest.fixture
def vocab():
    return LidVocab(("GUJ", "ENG"))


def random_gates(frames, langs, rng):
    return GateMatrix(rng.dirichlet(np.ones(langs), size=frames))


class TestAlphaProject:
    def test_one_hot_row(self, vocab):
        gates = GateMatrix(np.array([[1.0, 0.0]]))
        lat = alpha_project(gates, 0.8, vocab)
        probs = np.exp(lat.values[0])
        np.testing.assert_allclose(probs, [0.8, 0.0, 0.05, 0.05, 0.05, 0.05], atol=1e-12)

    def test_rows_stay_normalized(self, vocab):
        rng = np.random.default_rng(0)
        for alpha in (0.34, 0.5, 0.8, 0.99):
            lat = alpha_project(random_gates(6, 2, rng), alpha, vocab)
            np.testing.assert_allclose(np.exp(lat.values).sum(axis=1), 1.0, atol=1e-12)

    def test_confident_gate_argmax_is_language_above_one_third(self, vocab):
        # for alpha > 1/3 a gate above 0.5 beats every special's (1-alpha)/4
        rng = np.random.default_rng(1)
        for _ in range(100):
            gates = random_gates(5, 2, rng)
            lat = alpha_project(gates, 0.34, vocab)
            for t in range(5):
                if gates.values[t].max() > 0.5:
                    assert vocab.is_language_index(int(np.argmax(lat.values[t])))

    def test_alpha_range_enforced(self, vocab):
        g = GateMatrix(np.array([[0.5, 0.5]]))
        for alpha in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError):
                alpha_project(g, alpha, vocab)

    def test_vjp_through_stc(self, vocab):
        rng = np.random.default_rng(2)
        target = [vocab.index("GUJ"), vocab.index("ENG")]
        for _ in range(10):
            gates = random_gates(4, 2, rng)

            def f(gvals):
                lat = alpha_project(GateMatrix(gvals, validate=False), 0.8, vocab)
                return stc_loss_values(lat.values, target)[0]

            lat = alpha_project(gates, 0.8, vocab)
            _, grad_lat = stc_loss_values(lat.values, target)
            grad_gates = alpha_project_vjp(gates, 0.8, grad_lat)
            fd = central_difference(f, gates.values)
            assert_grad_close(grad_gates, fd)


class TestLinearProject:
    def test_identity_like_map_preserves_argmax(self, vocab):
        rng = np.random.default_rng(3)
        weights = np.zeros((2, vocab.size))
        weights[0, 0] = weights[1, 1] = 50.0
        gates = random_gates(8, 2, rng)
        lat = linear_project(gates, weights, 0, vocab)
        np.testing.assert_array_equal(
            np.argmax(lat.values, axis=1), np.argmax(gates.values, axis=1)
        )

    def test_zero_weights_give_uniform_rows(self, vocab):
        gates = GateMatrix(np.array([[0.3, 0.7], [0.9, 0.1]]))
        lat = linear_project(gates, np.zeros((2, vocab.size)), 0, vocab)
        np.testing.assert_allclose(lat.values, -math.log(vocab.size), atol=1e-12)

    def test_window_padding_arithmetic(self, vocab):
        # k=2, T=4: row 0 sees two zero-pad frames then frames 0..2
        gates = GateMatrix(np.arange(8).reshape(4, 2) / np.arange(8).reshape(4, 2).sum(1, keepdims=True))
        from stclib.seqloss.project import _window

        win = _window(gates.values, 2)
        assert win.shape == (4, 10)
        np.testing.assert_array_equal(win[0, :4], 0.0)
        np.testing.assert_array_equal(win[0, 4:6], gates.values[0])
        np.testing.assert_array_equal(win[0, 6:8], gates.values[1])
        np.testing.assert_array_equal(win[3, 8:10], 0.0)

    def test_shape_mismatch_rejected(self, vocab):
        gates = GateMatrix(np.array([[0.5, 0.5]]))
        with pytest.raises(ValueError, match="shape"):
            linear_project(gates, np.zeros((3, vocab.size)), 0, vocab)

    def test_vjp_through_ctc(self, vocab):
        rng = np.random.default_rng(4)
        target = [vocab.index("GUJ"), vocab.index("ENG")]
        for k in (0, 1, 2):
            gates = random_gates(6, 2, rng)
            weights = rng.normal(size=((2 * k + 1) * 2, vocab.size))

            def f_gates(gvals):
                lat = linear_project(GateMatrix(gvals, validate=False), weights, k, vocab)
                return ctc_loss_values(lat.values, target, vocab.blank_index)[0]

            def f_weights(w):
                lat = linear_project(gates, w, k, vocab)
                return ctc_loss_values(lat.values, target, vocab.blank_index)[0]

            lat = linear_project(gates, weights, k, vocab)
            _, grad_lat = ctc_loss_values(lat.values, target, vocab.blank_index)
            g_gates, g_weights = linear_project_vjp(gates, weights, k, grad_lat)
            assert_grad_close(g_gates, central_difference(f_gates, gates.values))
            assert_grad_close(g_weights, central_difference(f_weights, weights))
