"""Dense layers with hand-written backward passes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def swish(x):
    return x * sigmoid(x)


def swish_grad(x):
    s = sigmoid(x)
    return s + x * s * (1.0 - s)


def dense_forward(x, w, b):
    return x @ w + b


def dense_backward(x, w, gy):
    """Gradients of a dense layer: ``(gx, gw, gb)``."""
    return gy @ w.T, x.T @ gy, gy.sum(axis=0)


@dataclass(frozen=True)
class MLP:
    """Dense stack; every layer but the last is followed by Swish."""
    name: str
    sizes: tuple

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def keys(self):
        for i in range(self.n_layers):
            yield f"{self.name}.W{i}"
            yield f"{self.name}.b{i}"

    def init(self, rng: np.random.Generator) -> dict:
        """Uniform fan-in init with variance ``1 / fan_in``; zero biases."""
        params = {}
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            limit = np.sqrt(3.0 / fan_in)
            params[f"{self.name}.W{i}"] = rng.uniform(-limit, limit, (fan_in, fan_out))
            params[f"{self.name}.b{i}"] = np.zeros(fan_out)
        return params

    def forward(self, params: dict, x: np.ndarray):
        cache = []
        h = x
        for i in range(self.n_layers):
            a = dense_forward(h, params[f"{self.name}.W{i}"], params[f"{self.name}.b{i}"])
            cache.append((h, a))
            h = swish(a) if i < self.n_layers - 1 else a
        return h, cache

    def backward(self, params: dict, cache, gy: np.ndarray, grads: dict) -> np.ndarray:
        """Accumulate parameter gradients into ``grads``; return the input gradient."""
        g = gy
        for i in reversed(range(self.n_layers)):
            h, a = cache[i]
            if i < self.n_layers - 1:
                g = g * swish_grad(a)
            w = params[f"{self.name}.W{i}"]
            g, gw, gb = dense_backward(h, w, g)
            grads[f"{self.name}.W{i}"] += gw
            grads[f"{self.name}.b{i}"] += gb
        return g
