"""Micro reverse-mode differentiation over dense float64 matrices: a tape
records primitive ops (matmul, transpose, add, scale, elementwise products,
column ops, concat, row softmax / log-softmax) and replays vector-Jacobian
products in reverse recording order. Just enough machinery to train the toy
gated-attention models.
"""

from __future__ import annotations

import numpy as np

from ..numkit import log_softmax_rows, softmax_rows


class Node:
    __slots__ = ("value", "grad", "parents", "tape", "name")

    def __init__(self, value, tape, parents=(), name=""):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = tuple(parents)  # (Node, vjp callable) pairs
        self.tape = tape
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node({self.name or 'anon'}, shape={self.value.shape})"


class TapeError(RuntimeError):
    pass


class Tape:
    """Records nodes in creation order; backward visits each node exactly
    once in reverse topological (= reverse recording) order."""

    def __init__(self):
        self.nodes: list[Node] = []

    def _record(self, value, parents=(), name="") -> Node:
        node = Node(value, self, parents, name)
        self.nodes.append(node)
        return node

    def leaf(self, value, name="") -> Node:
        return self._record(value, (), name)

    def detach(self, a: Node) -> Node:
        """Constant copy: gradient flow stops here."""
        return self._record(a.value.copy(), (), name=f"detach({a.name})")

    def matmul(self, a: Node, b: Node) -> Node:
        return self._record(
            a.value @ b.value,
            (
                (a, lambda g, bv=b.value: g @ bv.T),
                (b, lambda g, av=a.value: av.T @ g),
            ),
            name="matmul",
        )

    def transpose(self, a: Node) -> Node:
        return self._record(a.value.T, ((a, lambda g: g.T),), name="transpose")

    def add(self, a: Node, b: Node) -> Node:
        return self._record(a.value + b.value, ((a, lambda g: g), (b, lambda g: g)), name="add")

    def scale(self, a: Node, c: float) -> Node:
        return self._record(a.value * c, ((a, lambda g: g * c),), name="scale")

    def mul_col(self, col: Node, mat: Node) -> Node:
        """Broadcast a T x 1 column against a T x m matrix."""
        return self._record(
            col.value * mat.value,
            (
                (col, lambda g, mv=mat.value: np.sum(g * mv, axis=1, keepdims=True)),
                (mat, lambda g, cv=col.value: g * cv),
            ),
            name="mul_col",
        )

    def col(self, a: Node, j: int) -> Node:
        def vjp(g, shape=a.value.shape, j=j):
            out = np.zeros(shape)
            out[:, j : j + 1] = g
            return out

        return self._record(a.value[:, j : j + 1], ((a, vjp),), name=f"col{j}")

    def concat_cols(self, parts: list[Node]) -> Node:
        widths = [p.value.shape[1] for p in parts]
        offsets = np.cumsum([0] + widths)
        parents = []
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            parents.append((p, lambda g, lo=lo, hi=hi: g[:, lo:hi]))
        return self._record(np.concatenate([p.value for p in parts], axis=1), parents, "concat")

    def softmax_rows(self, a: Node) -> Node:
        s = softmax_rows(a.value)

        def vjp(g, s=s):
            return s * (g - np.sum(g * s, axis=1, keepdims=True))

        return self._record(s, ((a, vjp),), name="softmax")

    def log_softmax_rows(self, a: Node) -> Node:
        out = log_softmax_rows(a.value)
        s = np.exp(out)

        def vjp(g, s=s):
            return g - s * np.sum(g, axis=1, keepdims=True)

        return self._record(out, ((a, vjp),), name="log_softmax")

    def backward(self, seeds: dict[Node, np.ndarray]) -> None:
        """Accumulate gradients into node.grad from one or more seed
        gradients; read results off the leaf nodes afterwards."""
        if not self.nodes:
            raise TapeError("backward before any forward computation")
        for node in self.nodes:
            node.grad = None
        for node, g in seeds.items():
            if node.tape is not self:
                raise TapeError("seed node does not belong to this tape")
            g = np.asarray(g, dtype=np.float64)
            if g.shape != node.value.shape:
                raise TapeError(f"seed gradient shape {g.shape} != value shape {node.value.shape}")
            node.grad = g.copy() if node.grad is None else node.grad + g
        for node in reversed(self.nodes):
            if node.grad is None:
                continue
            for parent, vjp in node.parents:
                contrib = vjp(node.grad)
                parent.grad = contrib if parent.grad is None else parent.grad + contrib
