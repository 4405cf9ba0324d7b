import numpy as np
import pytest

from stclib.seqloss import LidVocab, LogProbLattice


@pytest.fixture
def ab_vocab():
    return LidVocab(("a", "b"))


def random_lattice(vocab, frames, rng, support=None):
    """Random normalized lattice with mass restricted to `support` tokens."""
    cols = [vocab.index(t) for t in support] if support else list(range(vocab.size))
    vals = np.full((frames, vocab.size), -np.inf)
    probs = rng.dirichlet(np.ones(len(cols)), size=frames)
    vals[:, cols] = np.log(probs)
    return LogProbLattice(vocab, vals)


def central_difference(fn, values, h=1e-6):
    """Dense central-difference gradient of scalar fn over an array."""
    grad = np.zeros_like(values)
    for ix in np.ndindex(values.shape):
        p = values.copy()
        p[ix] += h
        m = values.copy()
        m[ix] -= h
        grad[ix] = (fn(p) - fn(m)) / (2 * h)
    return grad


def assert_grad_close(analytic, numeric, rel=1e-4, floor=1e-5):
    # the floor sits above the h=1e-6 central-difference noise scale
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    worst = np.max(np.abs(analytic - numeric) / denom)
    assert worst <= rel, f"worst relative gradient error {worst}"
