"""Fully connected networks on top of :mod:`rumigan.tensor`."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor

HIDDEN = {"relu": T.relu, "tanh": T.tanh}
OUTPUT = {"identity": lambda x: x, "sigmoid": T.sigmoid, "tanh": T.tanh}


class Mlp:
    """Affine layers with a shared hidden activation and an output head.

    Weights use Glorot-uniform initialization from ``rng``; biases start at 0.
    """

    def __init__(self, widths: Sequence[int], rng: np.random.Generator,
                 hidden: str = "tanh", output: str = "identity") -> None:
        widths = [int(w) for w in widths]
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ValueError(f"layer widths must be >= 2 positive integers, got {widths}")
        if hidden not in HIDDEN:
            raise ValueError(f"hidden activation must be one of {sorted(HIDDEN)}")
        if output not in OUTPUT:
            raise ValueError(f"output activation must be one of {sorted(OUTPUT)}")
        self.widths = widths
        self.hidden = hidden
        self.output = output
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out))))
            self.biases.append(Tensor(np.zeros((1, fan_out))))

    @property
    def params(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, values: Sequence[np.ndarray]) -> None:
        values = list(values)
        if len(values) != 2 * len(self.weights):
            raise ValueError("parameter count mismatch")
        for i in range(len(self.weights)):
            w, b = values[2 * i], values[2 * i + 1]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ValueError("parameter shape mismatch")
            self.weights[i] = Tensor(w)
            self.biases[i] = Tensor(b)

    def logits(self, x) -> Tensor:
        """Network output before the output head."""
        h = T.as_tensor(x)
        if h.data.ndim != 2 or h.shape[1] != self.widths[0]:
            raise ValueError(f"expected input of shape (n, {self.widths[0]}), got {h.shape}")
        act = HIDDEN[self.hidden]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = T.add(T.matmul(h, w), b)
            if i < last:
                h = act(h)
        return h

    def __call__(self, x) -> Tensor:
        return OUTPUT[self.output](self.logits(x))
