"""Small fully-connected networks with hand-rolled backprop.

ReLU hidden layers; the output layer is sigmoid (actor) or identity
(critic and the two predictor networks). Weights initialize uniformly in
+-1/sqrt(fan_in). backward() computes both parameter gradients and the
gradient with respect to the input, which the actor update needs to pull
gradients through the critic.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    # keep outputs strictly inside (0, 1) even when z saturates in float64
    return np.clip(out, 1e-12, 1.0 - 1e-12)


class Mlp:
    def __init__(self, layer_sizes: list[int], output_activation: str = "identity", rng=None):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if output_activation not in ("identity", "sigmoid"):
            raise ValueError(f"unknown output activation {output_activation!r}")
        rng = rng if rng is not None else np.random.default_rng()
        self.layer_sizes = list(layer_sizes)
        self.output_activation = output_activation
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))
        self.grad_w: list[np.ndarray] = [np.zeros_like(w) for w in self.weights]
        self.grad_b: list[np.ndarray] = [np.zeros_like(b) for b in self.biases]
        self._cache_inputs: list[np.ndarray] = []
        self._cache_out: np.ndarray | None = None

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        a = np.atleast_2d(x)
        if a.shape[1] != self.in_dim:
            raise DimensionMismatch(f"input has {a.shape[1]} features, expected {self.in_dim}")
        self._cache_inputs = [a]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            if i < last:
                a = np.maximum(z, 0.0)
            elif self.output_activation == "sigmoid":
                a = _sigmoid(z)
            else:
                a = z
            self._cache_inputs.append(a)
        self._cache_out = a
        return a[0] if single else a

    def backward(self, dout: np.ndarray, dout_pre: np.ndarray | None = None) -> np.ndarray:
        """Backpropagate dLoss/dOutput; fills grad_w/grad_b, returns dLoss/dInput.

        dout_pre, when given, is an extra gradient applied directly to the
        output layer's pre-activation (bypassing the output nonlinearity).
        """
        if self._cache_out is None:
            raise RuntimeError("backward called before forward")
        d = np.atleast_2d(np.asarray(dout, dtype=float))
        single = np.asarray(dout).ndim == 1
        if self.output_activation == "sigmoid":
            out = self._cache_out
            d = d * out * (1.0 - out)
        if dout_pre is not None:
            d = d + np.atleast_2d(np.asarray(dout_pre, dtype=float))
        for i in range(len(self.weights) - 1, -1, -1):
            a_prev = self._cache_inputs[i]
            if i < len(self.weights) - 1:
                d = d * (self._cache_inputs[i + 1] > 0.0)
            self.grad_w[i] = a_prev.T @ d
            self.grad_b[i] = d.sum(axis=0)
            d = d @ self.weights[i].T
        return d[0] if single else d

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.layer_sizes = list(self.layer_sizes)
        clone.output_activation = self.output_activation
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        clone.grad_w = [np.zeros_like(w) for w in self.weights]
        clone.grad_b = [np.zeros_like(b) for b in self.biases]
        clone._cache_inputs = []
        clone._cache_out = None
        return clone

    def blend_from(self, online: "Mlp", tau: float) -> None:
        """Soft update: param <- tau * online + (1 - tau) * param."""
        for mine, theirs in zip(self.weights, online.weights):
            mine *= 1.0 - tau
            mine += tau * theirs
        for mine, theirs in zip(self.biases, online.biases):
            mine *= 1.0 - tau
            mine += tau * theirs

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def gradients(self) -> list[np.ndarray]:
        return self.grad_w + self.grad_b


class Adam:
    """Per-parameter adaptive gradient steps (beta1=0.9, beta2=0.999)."""

    def __init__(self, net: Mlp, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.net.parameters(), self.net.gradients(), self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
