"""Reverse-mode gradient tape over dense float64 numpy arrays.

The operator set is exactly what the scoring models and losses need: leaves,
concat, affine, ReLU, inverted dropout, sigmoid, masked softmax, products
with frozen matrices, elementwise add/mul/div, clip, log, reductions,
gather, and the two cross-entropy losses.  Every node is a 2-D array; a
forward pass appends nodes in topological order, so one reversed sweep
accumulates all gradients.  A tape is consumed by a single backward call.
"""

from __future__ import annotations

import numpy as np

from ..errors import EngineError, TapeReuseError

__all__ = ["Param", "Tape", "Node", "backward"]


class Param:
    """A named trainable array.  Identity-hashed: two params are the same
    parameter only if they are the same object."""

    __slots__ = ("name", "value")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.value.shape})"


class Node:
    __slots__ = ("data", "grad", "track", "_vjp", "param")

    def __init__(self, data, track, vjp=None, param=None):
        self.data = data
        self.grad = None
        self.track = track
        self._vjp = vjp
        self.param = param


def _accum(node: Node, grad: np.ndarray) -> None:
    if not node.track:
        return
    if node.grad is None:
        node.grad = np.zeros_like(node.data)
    node.grad += grad


def _as_2d(array) -> np.ndarray:
    array = np.asarray(array, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.ndim != 2:
        raise EngineError(f"engine values are 2-D matrices, got shape {array.shape}")
    return array


class Tape:
    """Records one forward computation for a single backward sweep.

    ``rng`` supplies dropout masks when ``train_mode`` is set; eval-mode
    tapes never draw randomness.
    """

    def __init__(self, rng=None, train_mode: bool = False):
        self.nodes: list[Node] = []
        self.rng = rng
        self.train_mode = train_mode
        self.consumed = False
        self._param_nodes: dict[Param, Node] = {}

    # -- leaves ---------------------------------------------------------

    def constant(self, array) -> Node:
        node = Node(_as_2d(array), track=False)
        self.nodes.append(node)
        return node

    def input(self, array) -> Node:
        """A leaf whose gradient is wanted (read node.grad after backward)."""
        node = Node(_as_2d(array), track=True)
        self.nodes.append(node)
        return node

    def param(self, param: Param) -> Node:
        """Leaf for a trainable parameter; reusing it accumulates into one node."""
        if param in self._param_nodes:
            return self._param_nodes[param]
        node = Node(_as_2d(param.value), track=True, param=param)
        self.nodes.append(node)
        self._param_nodes[param] = node
        return node

    # -- internals ------------------------------------------------------

    def _emit(self, data: np.ndarray, parents: tuple[Node, ...], vjp) -> Node:
        if not np.isfinite(data).all():
            raise EngineError("non-finite value produced by an engine operation")
        track = any(p.track for p in parents)
        node = Node(data, track=track, vjp=vjp if track else None)
        self.nodes.append(node)
        return node

    # -- operators ------------------------------------------------------

    def concat(self, a: Node, b: Node) -> Node:
        data = np.concatenate([a.data, b.data], axis=1)
        n_left = a.data.shape[1]

        def vjp(g):
            _accum(a, g[:, :n_left])
            _accum(b, g[:, n_left:])

        return self._emit(data, (a, b), vjp)

    def affine(self, x: Node, weight: Node, bias: Node) -> Node:
        if x.data.shape[1] != weight.data.shape[0]:
            raise EngineError(
                f"affine shape mismatch: input {x.data.shape} vs weight {weight.data.shape}"
            )
        data = x.data @ weight.data + bias.data

        def vjp(g):
            _accum(x, g @ weight.data.T)
            _accum(weight, x.data.T @ g)
            _accum(bias, g.sum(axis=0, keepdims=True))

        return self._emit(data, (x, weight, bias), vjp)

    def relu(self, x: Node) -> Node:
        data = np.maximum(x.data, 0.0)

        def vjp(g):
            _accum(x, g * (x.data > 0.0))

        return self._emit(data, (x,), vjp)

    def sigmoid(self, x: Node) -> Node:
        # Stable logistic: exp of a negative number only.
        data = np.where(
            x.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(x.data))),
            np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))),
        )

        def vjp(g):
            _accum(x, g * data * (1.0 - data))

        return self._emit(data, (x,), vjp)

    def log(self, x: Node) -> Node:
        # out-of-domain values surface as EngineError in _emit, not warnings
        with np.errstate(divide="ignore", invalid="ignore"):
            data = np.log(x.data)

        def vjp(g):
            _accum(x, g / x.data)

        return self._emit(data, (x,), vjp)

    def clip(self, x: Node, low: float, high: float) -> Node:
        data = np.clip(x.data, low, high)
        passthrough = (x.data >= low) & (x.data <= high)

        def vjp(g):
            _accum(x, g * passthrough)

        return self._emit(data, (x,), vjp)

    def dropout(self, x: Node, rate: float) -> Node:
        """Inverted dropout: identity in eval mode or at rate 0."""
        if not 0.0 <= rate < 1.0:
            raise EngineError(f"dropout rate {rate} outside [0, 1)")
        if not self.train_mode or rate == 0.0:
            return x
        if self.rng is None:
            raise EngineError("train-mode dropout requires a tape rng")
        keep = (self.rng.random(x.data.shape) >= rate) / (1.0 - rate)
        data = x.data * keep

        def vjp(g):
            _accum(x, g * keep)

        return self._emit(data, (x,), vjp)

    def matmul_frozen(self, x: Node, matrix: np.ndarray) -> Node:
        """x @ M for a constant matrix M (never receives gradients)."""
        data = x.data @ matrix

        def vjp(g):
            _accum(x, g @ matrix.T)

        return self._emit(data, (x,), vjp)

    def frozen_matmul(self, matrix: np.ndarray, x: Node) -> Node:
        """M @ x for a constant matrix M."""
        data = matrix @ x.data

        def vjp(g):
            _accum(x, matrix.T @ g)

        return self._emit(data, (x,), vjp)

    def add(self, a: Node, b: Node) -> Node:
        if a.data.shape != b.data.shape:
            raise EngineError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
        data = a.data + b.data

        def vjp(g):
            _accum(a, g)
            _accum(b, g)

        return self._emit(data, (a, b), vjp)

    def mul(self, a: Node, b: Node) -> Node:
        if a.data.shape != b.data.shape:
            raise EngineError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
        data = a.data * b.data

        def vjp(g):
            _accum(a, g * b.data)
            _accum(b, g * a.data)

        return self._emit(data, (a, b), vjp)

    def div(self, a: Node, b: Node) -> Node:
        if a.data.shape != b.data.shape:
            raise EngineError(f"div shape mismatch: {a.data.shape} vs {b.data.shape}")
        with np.errstate(divide="ignore", invalid="ignore"):
            data = a.data / b.data

        def vjp(g):
            _accum(a, g / b.data)
            _accum(b, -g * data / b.data)

        return self._emit(data, (a, b), vjp)

    def scale(self, x: Node, factor: float) -> Node:
        data = x.data * factor

        def vjp(g):
            _accum(x, g * factor)

        return self._emit(data, (x,), vjp)

    def sum_all(self, x: Node) -> Node:
        data = np.array([[x.data.sum()]])

        def vjp(g):
            _accum(x, np.full_like(x.data, g[0, 0]))

        return self._emit(data, (x,), vjp)

    def mean_all(self, x: Node) -> Node:
        size = x.data.size
        data = np.array([[x.data.sum() / size]])

        def vjp(g):
            _accum(x, np.full_like(x.data, g[0, 0] / size))

        return self._emit(data, (x,), vjp)

    def gather(self, x: Node, rows, cols) -> Node:
        """Pick entries (rows[i], cols[i]) into a column vector."""
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        data = x.data[rows, cols].reshape(-1, 1)

        def vjp(g):
            if not x.track:
                return
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            np.add.at(x.grad, (rows, cols), g[:, 0])

        return self._emit(data, (x,), vjp)

    def masked_softmax(self, logits: Node, mask: np.ndarray) -> Node:
        """Row-wise softmax over the unmasked entries; masked entries are 0.

        Identical to a full softmax renormalised to the unmasked subset.
        """
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != logits.data.shape:
            raise EngineError(
                f"mask shape {mask.shape} does not match logits {logits.data.shape}"
            )
        if not mask.any(axis=1).all():
            raise EngineError("masked_softmax row with no unmasked entries")
        neg_inf = np.where(mask, logits.data, -np.inf)
        shifted = neg_inf - neg_inf.max(axis=1, keepdims=True)
        weights = np.where(mask, np.exp(shifted), 0.0)
        data = weights / weights.sum(axis=1, keepdims=True)

        def vjp(g):
            inner = (g * data).sum(axis=1, keepdims=True)
            _accum(logits, data * (g - inner))

        return self._emit(data, (logits,), vjp)

    def bce_mean(self, probs: Node, labels, reduction: str = "mean") -> Node:
        """Bernoulli cross-entropy of probabilities against 0/1 labels.

        Probabilities are clamped to [1e-12, 1 - 1e-12] before the log.
        """
        eps = 1e-12
        labels = np.asarray(labels, dtype=np.float64).reshape(probs.data.shape)
        clamped = np.clip(probs.data, eps, 1.0 - eps)
        losses = -(labels * np.log(clamped) + (1.0 - labels) * np.log(1.0 - clamped))
        denom = losses.size if reduction == "mean" else 1.0
        data = np.array([[losses.sum() / denom]])
        passthrough = (probs.data >= eps) & (probs.data <= 1.0 - eps)

        def vjp(g):
            d = (clamped - labels) / (clamped * (1.0 - clamped)) / denom
            _accum(probs, g[0, 0] * d * passthrough)

        return self._emit(data, (probs,), vjp)

    def cce_mean(self, dist: Node, gold, reduction: str = "mean") -> Node:
        """Mean negative log probability of the gold class per row."""
        eps = 1e-12
        gold = np.asarray(gold, dtype=np.intp)
        rows = np.arange(dist.data.shape[0])
        picked = dist.data[rows, gold]
        clamped = np.maximum(picked, eps)
        denom = len(rows) if reduction == "mean" else 1.0
        data = np.array([[-np.log(clamped).sum() / denom]])
        passthrough = picked >= eps

        def vjp(g):
            if not dist.track:
                return
            if dist.grad is None:
                dist.grad = np.zeros_like(dist.data)
            dist.grad[rows, gold] += g[0, 0] * (-1.0 / clamped) * passthrough / denom

        return self._emit(data, (dist,), vjp)


def backward(tape: Tape, output_grad=None) -> dict[Param, np.ndarray]:
    """Accumulate gradients from the tape's final node back to its leaves.

    Returns gradients keyed by Param; input-leaf gradients are left on the
    nodes themselves.  A tape can be walked once.
    """
    if tape.consumed:
        raise TapeReuseError("this tape has already been consumed by backward()")
    tape.consumed = True
    if not tape.nodes:
        raise EngineError("backward on an empty tape")
    output = tape.nodes[-1]
    if output_grad is None:
        output_grad = np.ones_like(output.data)
    else:
        output_grad = np.asarray(output_grad, dtype=np.float64).reshape(output.data.shape)
    output.grad = output_grad.copy()
    for node in reversed(tape.nodes):
        if node.grad is not None and node._vjp is not None:
            node._vjp(node.grad)
    return {
        node.param: node.grad
        for node in tape.nodes
        if node.param is not None and node.grad is not None
    }
