"""Decision-tree ensembles: a bagged random forest and multiclass gradient
boosting, built on one shared binary-split tree grower.

Split search is vectorized: candidate features are argsorted column-wise and
scored through cumulative sums, so both the Gini criterion (via one-hot
targets) and variance reduction (via residual targets) reduce to maximizing
sum(S_left^2)/n_left + sum(S_right^2)/n_right. Scores depend only on sample
order and target sums, which is what makes tree predictions invariant under
strictly monotone per-feature transforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyTrainError

_MIN_GAIN = 1e-12


@dataclass
class Tree:
    """Flat array representation; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, d): class distribution or regression mean

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf node id for every row of x."""
        node = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            go_left = x[np.arange(x.shape[0]), np.where(internal, feat, 0)] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(internal, nxt, node)

    def predict_value(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]


def _best_split(
    x_sub: np.ndarray, y_sub: np.ndarray, feats: np.ndarray
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, gain) over candidate features, or None."""
    m = x_sub.shape[0]
    cols = x_sub[:, feats]
    order = np.argsort(cols, axis=0, kind="stable")
    sx = np.take_along_axis(cols, order, axis=0)
    sy = y_sub[order]  # (m, n_feats, d)
    cum = np.cumsum(sy, axis=0)
    total = y_sub.sum(axis=0)  # (d,)

    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    s_left = cum[:-1]
    s_right = total[None, None, :] - s_left
    score = (s_left**2).sum(axis=2) / n_left + (s_right**2).sum(axis=2) / n_right
    score[sx[1:] == sx[:-1]] = -np.inf

    flat = int(np.argmax(score))
    best = score.flat[flat]
    if not np.isfinite(best):
        return None
    gain = float(best - (total**2).sum() / m)
    if gain <= _MIN_GAIN:
        return None
    pos, fi = divmod(flat, len(feats))
    threshold = 0.5 * (sx[pos, fi] + sx[pos + 1, fi])
    return int(feats[fi]), float(threshold), gain


def _is_pure(y_sub: np.ndarray) -> bool:
    if y_sub.shape[1] == 1:  # regression targets
        return bool(np.ptp(y_sub) == 0.0)
    counts = y_sub.sum(axis=0)
    return bool(counts.max() == y_sub.shape[0])


def _leaf_value(y_sub: np.ndarray) -> np.ndarray:
    if y_sub.shape[1] == 1:
        return np.array([y_sub.mean()])
    counts = y_sub.sum(axis=0)
    return counts / counts.sum()


def build_tree(
    x: np.ndarray,
    y_mat: np.ndarray,
    max_depth: int | None,
    max_features: int | None,
    rng: np.random.Generator | None,
) -> Tree:
    """Grow a binary tree on (x, y_mat).

    y_mat is one-hot for classification (Gini splits) or a single residual
    column for regression (variance splits). max_features, when set, samples
    that many candidate features per split from `rng`.
    """
    n, n_features = x.shape
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[np.ndarray] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(np.zeros(y_mat.shape[1]))
        return len(feature) - 1

    root = new_node()
    stack: list[tuple[np.ndarray, int, int]] = [(np.arange(n), root, 0)]
    while stack:
        idx, node, depth = stack.pop()
        y_sub = y_mat[idx]
        value[node] = _leaf_value(y_sub)
        if (
            len(idx) < 2
            or (max_depth is not None and depth >= max_depth)
            or _is_pure(y_sub)
        ):
            continue
        if max_features is not None and max_features < n_features:
            feats = np.sort(rng.choice(n_features, size=max_features, replace=False))
        else:
            feats = np.arange(n_features)
        found = _best_split(x[idx], y_sub, feats)
        if found is None:
            continue
        feat, thr, _ = found
        go_left = x[idx, feat] <= thr
        left_idx, right_idx = idx[go_left], idx[~go_left]
        if len(left_idx) == 0 or len(right_idx) == 0:
            continue
        feature[node] = feat
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((left_idx, left[node], depth + 1))
        stack.append((right_idx, right[node], depth + 1))

    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.stack(value),
    )


@dataclass
class RandomForestModel:
    trees: list[Tree]
    n_classes: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        probs = np.zeros((x.shape[0], self.n_classes))
        for tree in self.trees:
            probs += tree.predict_value(x)
        return probs / len(self.trees)


def fit_random_forest(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_trees: int,
    max_depth: int | None,
    max_features: int,
    bootstrap: bool,
    seed: int,
) -> RandomForestModel:
    """Bagged Gini trees; each tree gets its own seed-derived RNG."""
    n = x.shape[0]
    if n == 0:
        raise EmptyTrainError("cannot fit a forest on zero samples")
    onehot = np.eye(n_classes)[np.asarray(y, dtype=np.int64)]
    trees = []
    root_ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)
    for child in root_ss.spawn(n_trees):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(build_tree(x[idx], onehot[idx], max_depth, max_features, rng))
    return RandomForestModel(trees, n_classes)


@dataclass
class GradientBoostModel:
    trees: list[list[Tree]]  # [round][class]
    learning_rate: float
    n_classes: int

    def decision_scores(self, x: np.ndarray) -> np.ndarray:
        scores = np.zeros((x.shape[0], self.n_classes))
        for round_trees in self.trees:
            for c, tree in enumerate(round_trees):
                scores[:, c] += self.learning_rate * tree.predict_value(x)[:, 0]
        return scores

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        scores = self.decision_scores(x)
        shifted = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)


def fit_gradient_boost(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_rounds: int,
    max_depth: int,
    learning_rate: float,
    seed: int,
) -> GradientBoostModel:
    """Multiclass boosting on the softmax logistic loss.

    Each round fits one regression tree per class to the residual
    (one-hot minus probability); leaf values take the usual Newton step
    (K-1)/K * sum(r) / sum(|r| (1-|r|)).
    """
    n = x.shape[0]
    if n == 0:
        raise EmptyTrainError("cannot fit boosting on zero samples")
    labels = np.asarray(y, dtype=np.int64)
    onehot = np.eye(n_classes)[labels]
    scores = np.zeros((n, n_classes))
    ratio = (n_classes - 1) / n_classes
    all_trees: list[list[Tree]] = []
    for _ in range(n_rounds):
        shifted = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
        round_trees = []
        for c in range(n_classes):
            residual = onehot[:, c] - probs[:, c]
            tree = build_tree(x, residual[:, None], max_depth, None, None)
            leaves = tree.apply(x)
            gamma = np.zeros(len(tree.value))
            for leaf in np.unique(leaves):
                r = residual[leaves == leaf]
                denom = np.sum(np.abs(r) * (1.0 - np.abs(r)))
                gamma[leaf] = ratio * r.sum() / max(denom, 1e-12)
            tree.value = gamma[:, None]
            scores[:, c] += learning_rate * gamma[leaves]
            round_trees.append(tree)
        all_trees.append(round_trees)
    return GradientBoostModel(all_trees, learning_rate, n_classes)
