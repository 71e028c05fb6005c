"""Plain feed-forward networks evaluated either as numpy or on the tape."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ConfigError, ShapeError
from . import tape
from .tape import Tensor

HIDDEN_ACTIVATIONS = ("tanh",)
OUTPUT_ACTIVATIONS = ("identity", "tanh", "sigmoid")


def _apply_np(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "tanh":
        return np.tanh(x)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-x))
    return x


def _apply_tape(kind: str, x: Tensor) -> Tensor:
    if kind == "tanh":
        return tape.tanh(x)
    if kind == "sigmoid":
        return tape.sigmoid(x)
    return x


class FeedForwardNet:
    """Fully connected net with a smooth hidden activation.

    Weights are (fan_in, fan_out) float64 so a row batch maps as `x @ W + b`.
    Output activation is chosen per use: tanh for retargeting heads (bounded,
    rescaled to joint limits by the caller), sigmoid for the collision
    classifier, identity for regression heads.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        weights: list[np.ndarray],
        biases: list[np.ndarray],
        hidden_activation: str = "tanh",
        output_activation: str = "identity",
    ):
        if len(sizes) < 2:
            raise ConfigError("a net needs at least input and output layers")
        if hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ConfigError(f"unsupported hidden activation {hidden_activation!r}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigError(f"unsupported output activation {output_activation!r}")
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ShapeError("layer count does not match sizes")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ShapeError(
                    f"layer {i}: expected {(sizes[i], sizes[i+1])}, got {w.shape} / {b.shape}"
                )
        self.sizes = list(sizes)
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in biases]
        self.hidden_activation = hidden_activation
        self.output_activation = output_activation

    @classmethod
    def initialized(
        cls,
        sizes: Sequence[int],
        rng: np.random.Generator,
        hidden_activation: str = "tanh",
        output_activation: str = "identity",
    ) -> "FeedForwardNet":
        """Uniform fan-in scaled weights, zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(sizes, weights, biases, hidden_activation, output_activation)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Numpy inference. Accepts (n_in,) or (batch, n_in)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise ShapeError(f"input width {x.shape[1]} != first layer {self.sizes[0]}")
        h = x
        for i in range(self.n_layers):
            h = h @ self.weights[i] + self.biases[i]
            kind = self.output_activation if i == self.n_layers - 1 else self.hidden_activation
            h = _apply_np(kind, h)
        return h[0] if single else h

    def tape_forward(self, x: Tensor, params: list[Tensor] | None = None) -> Tensor:
        """Forward on the tape. `params` are the trainable leaves from
        `parameter_tensors()`; pass None to treat the net as frozen."""
        if x.data.ndim != 2 or x.data.shape[1] != self.sizes[0]:
            raise ShapeError(f"input shape {x.data.shape} != (batch, {self.sizes[0]})")
        if params is None:
            params = [tape.constant(a) for a in self._flat_arrays()]
        h = x
        for i in range(self.n_layers):
            h = tape.matmul(h, params[2 * i]) + params[2 * i + 1]
            kind = self.output_activation if i == self.n_layers - 1 else self.hidden_activation
            h = _apply_tape(kind, h)
        return h

    def _flat_arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def parameter_tensors(self) -> list[Tensor]:
        """Trainable leaves sharing storage with the net: in-place updates to
        `.data` are immediately visible to `forward()`."""
        return [tape.parameter(a) for a in self._flat_arrays()]

    def parameter_arrays(self) -> list[np.ndarray]:
        return self._flat_arrays()

    def copy(self) -> "FeedForwardNet":
        return FeedForwardNet(
            self.sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )
