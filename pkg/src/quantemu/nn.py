"""Dense-network substrate: layers, initialization, Adam, cosine schedule.

Everything operates on plain numpy arrays with hand-written, fixed-graph
backward passes; there is no general autodiff. Each network in the package
wires its own gradient flow out of these pieces, and gradient fidelity is
gated by finite-difference checks in the test suite.

Training runs in float32 by default; construct layers with float64 when
running gradient diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import OptimizerError

__all__ = [
    "glorot_uniform",
    "DenseLayer",
    "AdamState",
    "adam_step",
    "cosine_lr",
]


def glorot_uniform(rng, fan_in, fan_out, dtype=np.float32):
    """Uniform init on +-sqrt(6 / (fan_in + fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError("fan_in and fan_out must be positive")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


class DenseLayer:
    """Fully connected layer, activation in {relu, identity}.

    Weights have shape (fan_in, fan_out); forward maps row-batches
    (n, fan_in) -> (n, fan_out).
    """

    __slots__ = ("weight", "bias", "activation", "name")

    def __init__(self, weight, bias, activation="relu", name="dense"):
        if activation not in ("relu", "identity"):
            raise ValueError(f"unknown activation {activation!r}")
        weight = np.asarray(weight)
        bias = np.asarray(bias)
        if weight.ndim != 2 or bias.ndim != 1 or bias.shape[0] != weight.shape[1]:
            raise ValueError("weight must be (fan_in, fan_out), bias (fan_out,)")
        self.weight = weight
        self.bias = bias
        self.activation = activation
        self.name = name

    @classmethod
    def create(cls, rng, fan_in, fan_out, activation="relu", name="dense",
               dtype=np.float32):
        weight = glorot_uniform(rng, fan_in, fan_out, dtype=dtype)
        bias = np.zeros(fan_out, dtype=dtype)
        return cls(weight, bias, activation=activation, name=name)

    def forward(self, x):
        """Return (activations, pre_activations).

        Pre-activations must be kept by the caller and handed back to
        backward(); relu masks are recovered from them.
        """
        z = x @ self.weight + self.bias
        if self.activation == "relu":
            return np.maximum(z, 0.0), z
        return z, z

    def backward(self, d_out, z, x):
        """Backprop one layer; relu subgradient at exactly 0 is 0.

        Args:
            d_out: gradient wrt this layer's activations, shape (n, fan_out).
            z: pre-activations cached from forward.
            x: the forward input batch.

        Returns:
            (d_x, d_weight, d_bias)
        """
        if z is None or x is None:
            raise RuntimeError(f"backward on layer {self.name!r} before forward")
        if self.activation == "relu":
            dz = d_out * (z > 0)
        else:
            dz = d_out
        return dz @ self.weight.T, x.T @ dz, dz.sum(axis=0)

    def params(self):
        """Named parameter blocks, in serialization order."""
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter block."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def for_param(cls, param):
        return cls(np.zeros_like(param), np.zeros_like(param), 0)


def adam_step(param, grad, state, lr, beta1=0.9, beta2=0.999, eps=1e-8,
              name="param"):
    """One in-place Adam update with bias correction.

    Raises OptimizerError naming the block if the gradient is non-finite.
    """
    if not np.all(np.isfinite(grad)):
        raise OptimizerError(
            f"non-finite gradient in parameter block {name!r} at step {state.step + 1}"
        )
    state.step += 1
    state.m *= beta1
    state.m += (1.0 - beta1) * grad
    state.v *= beta2
    state.v += (1.0 - beta2) * np.square(grad)
    m_hat = state.m / (1.0 - beta1 ** state.step)
    v_hat = state.v / (1.0 - beta2 ** state.step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param


def cosine_lr(epoch, total_epochs, lr0, lr_min=0.0):
    """Cosine-annealed learning rate.

    lr(epoch) = lr_min + 0.5 (lr0 - lr_min) (1 + cos(pi epoch / total)).
    At epoch == total_epochs this returns lr_min exactly.
    """
    if total_epochs < 1:
        raise ValueError(f"total_epochs must be >= 1, got {total_epochs}")
    if not 0 <= epoch <= total_epochs:
        raise ValueError(
            f"epoch {epoch} outside schedule range [0, {total_epochs}]"
        )
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * epoch / total_epochs))
