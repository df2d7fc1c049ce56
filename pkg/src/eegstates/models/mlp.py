"""Multilayer perceptron with hand-rolled forward/backward passes.

Architectures map 252 inputs through fully connected ReLU hidden layers to a
3-way softmax. The six-hidden-layer variant applies inverted dropout (rate
0.5) after its 2048-unit layer during training only. A gradient-check mode
swaps ReLU for tanh so finite differences are not confounded by the kink.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatchError

N_CLASSES = 3


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"  # "relu" or "tanh" (gradient-check mode)
    dropout_rate: float = 0.0
    dropout_hidden: int | None = None  # hidden-layer index the mask follows

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy_params(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]

    def set_params(self, weights: list[np.ndarray], biases: list[np.ndarray]) -> None:
        self.weights = [w.copy() for w in weights]
        self.biases = [b.copy() for b in biases]


def init_mlp(
    layer_sizes: list[int],
    seed: int,
    activation: str = "relu",
    dropout_rate: float = 0.0,
    dropout_hidden: int | None = None,
) -> MlpModel:
    """Initialize weights uniformly in +-1/sqrt(fan_in); biases at zero."""
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases, activation, dropout_rate, dropout_hidden)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    raise ShapeMismatchError(f"unknown activation {kind!r}")


def _activation_deriv(a_raw: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (a_raw > 0.0).astype(float)
    return 1.0 - a_raw * a_raw  # tanh


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ShapeMismatchError(f"expected a vector or matrix, got shape {arr.shape}")


def _forward_cached(
    model: MlpModel, x: np.ndarray, dropout_mask: np.ndarray | None
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray, np.ndarray]:
    """Returns (raw activations, forwarded activations, logits, probabilities).

    ``raw`` holds pre-dropout activations (needed for activation derivatives);
    ``fwd`` holds what actually feeds the next layer.
    """
    n_layers = len(model.weights)
    raw: list[np.ndarray] = [x]
    fwd: list[np.ndarray] = [x]
    a = x
    logits = None
    for layer in range(n_layers):
        z = a @ model.weights[layer] + model.biases[layer]
        if layer == n_layers - 1:
            logits = z
            probs = _softmax(z)
            raw.append(probs)
            fwd.append(probs)
            break
        h = _activate(z, model.activation)
        raw.append(h)
        if dropout_mask is not None and layer == model.dropout_hidden:
            h = h * dropout_mask
        fwd.append(h)
        a = h
    return raw, fwd, logits, fwd[-1]


def mlp_forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Inference-mode class probabilities; dropout is inactive."""
    batch, single = _as_batch(x)
    if batch.shape[1] != model.weights[0].shape[0]:
        raise ShapeMismatchError(
            f"input dimension {batch.shape[1]} != model input"
            f" {model.weights[0].shape[0]}"
        )
    _, _, _, probs = _forward_cached(model, batch, None)
    return probs[0] if single else probs


def _sample_dropout_mask(
    model: MlpModel, n: int, rng: np.random.Generator | None
) -> np.ndarray | None:
    if model.dropout_rate <= 0.0 or model.dropout_hidden is None or rng is None:
        return None
    keep = 1.0 - model.dropout_rate
    width = model.weights[model.dropout_hidden].shape[1]
    return (rng.random((n, width)) < keep).astype(float) / keep


def loss_and_grads(
    model: MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator | None = None,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy loss and its gradients for one step.

    When dropout is configured and an RNG is supplied (training mode), one
    mask is sampled and used identically in the forward and backward pass.
    """
    batch, _ = _as_batch(x)
    labels = np.asarray(y, dtype=np.int64)
    if labels.shape != (batch.shape[0],):
        raise ShapeMismatchError(
            f"labels shape {labels.shape} does not match batch {batch.shape[0]}"
        )
    n = batch.shape[0]
    mask = _sample_dropout_mask(model, n, rng)
    raw, fwd, logits, probs = _forward_cached(model, batch, mask)

    # numerically stable mean cross-entropy from logits
    lse = np.log(np.exp(logits - logits.max(axis=1, keepdims=True)).sum(axis=1))
    lse += logits.max(axis=1)
    loss = float(np.mean(lse - logits[np.arange(n), labels]))

    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    n_layers = len(model.weights)
    grads_w = [np.empty(0)] * n_layers
    grads_b = [np.empty(0)] * n_layers
    for layer in range(n_layers - 1, -1, -1):
        grads_w[layer] = fwd[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer == 0:
            break
        da = delta @ model.weights[layer].T
        if mask is not None and layer - 1 == model.dropout_hidden:
            da = da * mask
        delta = da * _activation_deriv(raw[layer], model.activation)
    return loss, grads_w, grads_b


def mlp_backward(
    model: MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator | None = None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradients of the mean cross-entropy loss for every weight and bias."""
    _, grads_w, grads_b = loss_and_grads(model, x, y, rng)
    return grads_w, grads_b


def evaluate(model: MlpModel, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Inference-mode (loss, accuracy) on a labeled set."""
    batch, _ = _as_batch(x)
    labels = np.asarray(y, dtype=np.int64)
    _, _, logits, probs = _forward_cached(model, batch, None)
    n = batch.shape[0]
    lse = np.log(np.exp(logits - logits.max(axis=1, keepdims=True)).sum(axis=1))
    lse += logits.max(axis=1)
    loss = float(np.mean(lse - logits[np.arange(n), labels]))
    acc = float(np.mean(np.argmax(probs, axis=1) == labels))
    return loss, acc
