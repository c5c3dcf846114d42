"""Dense kernels with explicit backward passes, cross-entropy and Adam."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ContractError(ValueError):
    """Inputs violate a shape or value contract."""


def check_finite(x: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {what}")
    return x


def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    # einsum keeps each output row independent of the row count; BLAS tail kernels do not
    return np.einsum("ik,kj->ij", a, b)


def matmul_backward(a, b, grad):
    """Gradients of ``a @ b`` w.r.t. ``a`` and ``b``."""
    return grad @ b.T, a.T @ grad


def add_bias(x, b):
    if b.shape != (x.shape[1],):
        raise ContractError(f"bias shape {b.shape} does not match width {x.shape[1]}")
    return x + b


def add_bias_backward(grad):
    return grad, grad.sum(axis=0)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad):
    return grad * (x > 0)


def dropout_forward(x, rate: float, rng: np.random.Generator | None):
    """Inverted dropout. Returns output and the scaling mask (None when inactive)."""
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0 or rng is None:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(grad, mask):
    return grad if mask is None else grad * mask


def log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


def one_hot(y, num_classes: int):
    y = np.asarray(y, dtype=np.int64)
    out = np.zeros((len(y), num_classes))
    out[np.arange(len(y)), y] = 1.0
    return out


def softmax_cross_entropy(logits, targets):
    """Per-row cross-entropy against soft targets, and its gradient w.r.t. logits.

    ``targets`` may be an (n, C) matrix of rows summing to one or an integer
    class vector.
    """
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    targets = np.asarray(targets)
    if targets.ndim == 1 and np.issubdtype(targets.dtype, np.integer):
        targets = one_hot(targets, logits.shape[1])
    targets = np.atleast_2d(targets.astype(np.float64))
    if targets.shape != logits.shape:
        raise ContractError(f"targets {targets.shape} do not match logits {logits.shape}")
    if np.any(np.abs(targets.sum(axis=1) - 1.0) > 1e-9) or np.any(targets < 0):
        raise ContractError("each target row must be a probability vector")
    logp = log_softmax(logits)
    loss = -(targets * logp).sum(axis=1)
    grad = np.exp(logp) - targets
    return loss, grad


def glorot(fan_in: int, fan_out: int, rng: np.random.Generator):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class ModelState:
    """Named parameters plus Adam moments."""

    params: dict
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        for k, p in self.params.items():
            self.m.setdefault(k, np.zeros_like(p))
            self.v.setdefault(k, np.zeros_like(p))

    def copy(self) -> "ModelState":
        return ModelState({k: p.copy() for k, p in self.params.items()},
                          {k: p.copy() for k, p in self.m.items()},
                          {k: p.copy() for k, p in self.v.items()}, self.step)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())


def adam_step(state: ModelState, grads: dict, lr=1e-3, beta1=0.9, beta2=0.999,
              eps=1e-8, weight_decay=0.0) -> ModelState:
    """One Adam update with bias correction; L2 weight decay is added to the gradient."""
    state.step += 1
    t = state.step
    c1, c2 = 1.0 - beta1 ** t, 1.0 - beta2 ** t
    for k, p in state.params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ContractError(f"gradient for {k} has shape {g.shape}, expected {p.shape}")
        if weight_decay:
            g = g + weight_decay * p
        m, v = state.m[k], state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state
