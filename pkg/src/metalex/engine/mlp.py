"""Multilayer perceptron: configuration, initialisation, forward graph.

Every layer applies dropout, then an affine map; ReLU follows every layer
except the last.  A one-layer network is therefore dropout then a single
affine map.  Weights start Glorot-uniform, biases at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..rng import RngStream
from .autodiff import Node, Param, Tape

__all__ = ["MlpConfig", "MlpParams", "init_params", "mlp_apply", "mlp_forward"]


@dataclass(frozen=True)
class MlpConfig:
    in_size: int
    out_size: int
    layers: int
    hidden: int
    dropout: float

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError(f"mlp needs at least one layer, got {self.layers}")
        if self.in_size < 1 or self.out_size < 1:
            raise ConfigError("mlp sizes must be positive")
        if self.layers > 1 and self.hidden < 1:
            raise ConfigError("multi-layer mlp needs a positive hidden size")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout rate {self.dropout} outside [0, 1)")

    def layer_sizes(self) -> list[tuple[int, int]]:
        if self.layers == 1:
            return [(self.in_size, self.out_size)]
        sizes = [(self.in_size, self.hidden)]
        sizes += [(self.hidden, self.hidden)] * (self.layers - 2)
        sizes.append((self.hidden, self.out_size))
        return sizes


@dataclass(eq=False)
class MlpParams:
    config: MlpConfig
    weights: list[Param]
    biases: list[Param]

    def parameters(self) -> list[Param]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_params(config: MlpConfig, stream: RngStream | None, name: str) -> MlpParams:
    """Fresh parameters; each weight uses its own named substream so the
    draw for layer i does not depend on the sizes of other layers.  With no
    stream, weights start at zero (placeholder values for checkpoint loads)."""
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(config.layer_sizes()):
        if stream is None:
            w = np.zeros((fan_in, fan_out))
        else:
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            gen = stream.split(f"{name}.layer{i}").gen
            w = gen.uniform(-bound, bound, size=(fan_in, fan_out))
        weights.append(Param(f"{name}.layer{i}.weight", w))
        biases.append(Param(f"{name}.layer{i}.bias", np.zeros((1, fan_out))))
    return MlpParams(config, weights, biases)


def mlp_apply(tape: Tape, params: MlpParams, x: Node) -> Node:
    """Run the network on an existing tape (for composite graphs)."""
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = tape.dropout(h, params.config.dropout)
        h = tape.affine(h, tape.param(w), tape.param(b))
        if i != last:
            h = tape.relu(h)
    return h


def mlp_forward(params: MlpParams, x: np.ndarray, train_mode: bool = False, rng=None):
    """Run on a fresh tape; returns (output node, tape)."""
    tape = Tape(rng=rng, train_mode=train_mode)
    out = mlp_apply(tape, params, tape.input(x))
    return out, tape
