"""CART regression trees and bagged forests."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["ForestConfig", "RegressionTree", "RandomForest"]


@dataclass
class ForestConfig:
    n_trees: int = 5
    max_depth: int | None = None
    min_samples_split: int = 2
    anchor_replication: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.anchor_replication < 1:
            raise ValueError("anchor_replication must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")

    def to_dict(self):
        return asdict(self)


def _best_split(X, Y):
    """Best (feature, threshold) by squared-error reduction, or None.

    Minimizing the children's summed squared error is the same as
    maximizing ``|S_l|^2 / n_l + |S_r|^2 / n_r`` where ``S`` are target sums.
    """
    n = X.shape[0]
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = Y[order]  # (n, F, k)
    left = np.cumsum(ys, axis=0)[:-1]
    total = ys.sum(axis=0)
    n_left = np.arange(1, n)[:, None]
    n_right = n - n_left
    gain = (left**2).sum(axis=2) / n_left + ((total - left) ** 2).sum(axis=2) / n_right
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)
    pos, feat = np.unravel_index(np.argmax(gain), gain.shape)
    lo, hi = xs[pos, feat], xs[pos + 1, feat]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return int(feat), float(thr)


class RegressionTree:
    """Array-backed CART tree; leaves store the mean target vector."""

    def __init__(self, max_depth=None, min_samples_split=2):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.feature = self.threshold = self.left = self.right = self.value = None

    def fit(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(idx):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(Y[idx].mean(axis=0))
            return len(feature) - 1

        stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]), 0)]
        while stack:
            node, idx, depth = stack.pop()
            if idx.size < self.min_samples_split:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            y_node = Y[idx]
            if np.all(y_node == y_node[0]):
                continue
            found = _best_split(X[idx], y_node)
            if found is None:
                continue
            f, thr = found
            mask = X[idx, f] <= thr
            li, ri = idx[mask], idx[~mask]
            feature[node], threshold[node] = f, thr
            left[node] = new_node(li)
            right[node] = new_node(ri)
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))

        self.feature = np.asarray(feature, dtype=int)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.value = np.vstack(value)
        return self

    @property
    def n_nodes(self):
        return self.feature.size

    def apply(self, X):
        """Leaf index reached by every row."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=int)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        tree = cls()
        tree.feature = np.asarray(d["feature"], dtype=int)
        tree.threshold = np.asarray(d["threshold"], dtype=float)
        tree.left = np.asarray(d["left"], dtype=int)
        tree.right = np.asarray(d["right"], dtype=int)
        tree.value = np.asarray(d["value"], dtype=float).reshape(tree.feature.size, -1)
        return tree


class RandomForest:
    """Bagged regression trees; prediction is the mean over trees."""

    def __init__(self, n_trees=5, max_depth=None, min_samples_split=2, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.seed = seed
        self.trees = []

    def fit(self, X, Y):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float).reshape(X.shape[0], -1)
        n = X.shape[0]
        if n < 2:
            raise ValueError("a forest needs at least 2 training rows")
        rng = np.random.default_rng(self.seed)
        self.trees = []
        for _ in range(self.n_trees):
            boot = rng.integers(0, n, size=n)
            tree = RegressionTree(self.max_depth, self.min_samples_split)
            self.trees.append(tree.fit(X[boot], Y[boot]))
        return self

    def predict(self, X, output="raw"):
        preds = [t.predict(X) for t in self.trees]
        return np.mean(preds, axis=0)

    def to_dict(self):
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        forest = cls(d["n_trees"], d["max_depth"], d["min_samples_split"], d["seed"])
        forest.trees = [RegressionTree.from_dict(t) for t in d["trees"]]
        return forest
