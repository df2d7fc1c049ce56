"""One-vs-rest linear SVM trained by full-batch subgradient descent.

Each class gets a binary hinge-loss problem: minimize
0.5 ||w||^2 + C * mean(max(0, 1 - y (w.x + b))). Initialization at zero and
a 1/sqrt(t) step schedule make the fit deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyTrainError


@dataclass
class LinearSvmModel:
    weights: np.ndarray  # (n_classes, n_features)
    biases: np.ndarray   # (n_classes,)

    def decision_scores(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.biases

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        # softmax over margins: a ranking-preserving pseudo-probability
        scores = self.decision_scores(x)
        shifted = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)


def fit_linear_svm(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    c: float = 1.0,
    epochs: int = 300,
    learning_rate: float = 0.1,
) -> LinearSvmModel:
    n, n_features = x.shape
    if n == 0:
        raise EmptyTrainError("cannot fit an SVM on zero samples")
    labels = np.asarray(y, dtype=np.int64)
    weights = np.zeros((n_classes, n_features))
    biases = np.zeros(n_classes)
    for cls in range(n_classes):
        sign = np.where(labels == cls, 1.0, -1.0)
        w = np.zeros(n_features)
        b = 0.0
        for t in range(epochs):
            margins = sign * (x @ w + b)
            violating = margins < 1.0
            grad_w = w - (c / n) * (sign[violating] @ x[violating])
            grad_b = -(c / n) * sign[violating].sum()
            step = learning_rate / np.sqrt(t + 1.0)
            w -= step * grad_w
            b -= step * grad_b
        weights[cls] = w
        biases[cls] = b
    return LinearSvmModel(weights, biases)
