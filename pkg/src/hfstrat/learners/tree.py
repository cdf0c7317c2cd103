"""CART classification trees (Gini impurity) and bagged random forests."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..numerics import RngHandle, as_matrix

TIE_EPS = 1e-12


def gini(labels) -> float:
    """Gini impurity ``1 - p0^2 - p1^2`` of a 0/1 label multiset."""
    y = np.asarray(labels)
    if y.size == 0:
        raise ValueError("gini of an empty label set")
    p1 = float(np.count_nonzero(y == 1)) / y.size
    return 1.0 - p1 * p1 - (1.0 - p1) ** 2


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.min_samples_split < 2 or self.min_samples_leaf < 1:
            raise ValueError("min_samples_split >= 2 and min_samples_leaf >= 1 required")


@dataclass(frozen=True)
class DecisionTreeModel:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf.

    ``value[i]`` is the class-1 probability of the node's training samples.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    params: TreeParams = field(default_factory=TreeParams)
    n_features: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        def rec(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(rec(self.left[i]), rec(self.right[i]))

        return rec(0)

    def leaf_index(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            a = rows[active]
            na = node[active]
            go_left = X[a, self.feature[na]] <= self.threshold[na]
            node[active] = np.where(go_left, self.left[na], self.right[na])

    def predict_confidence(self, X) -> np.ndarray:
        return self.value[self.leaf_index(X)]

    def predict_label(self, X) -> np.ndarray:
        return (self.predict_confidence(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "kind": "tree",
            "params": {
                "max_depth": self.params.max_depth,
                "min_samples_split": self.params.min_samples_split,
                "min_samples_leaf": self.params.min_samples_leaf,
            },
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTreeModel":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=np.float64),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=np.float64),
            np.array(d["n_samples"], dtype=np.int64),
            TreeParams(**d["params"]),
            int(d.get("n_features", 0)),
        )

    def structurally_equal(self, other: "DecisionTreeModel") -> bool:
        return all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("feature", "threshold", "left", "right", "value", "n_samples")
        )


def best_split(X, y, cols, min_samples_leaf=1):
    """Best ``(column, threshold)`` over ``cols`` or ``None`` if no split reduces impurity.

    Candidate thresholds are midpoints of consecutive distinct sorted values.
    Splits are scored by ``S = (a^2 + b^2)/n_left + (c^2 + d^2)/n_right``
    (class counts per side); maximizing S minimizes the weighted child Gini.
    Near-ties resolve to the lowest column, then the lowest threshold.
    """
    n = y.size
    cols = np.sort(np.asarray(cols, dtype=np.int64))
    if n < 2 or cols.size == 0:
        return None
    sub = X[:, cols]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[order].astype(np.float64)
    ones_left = np.cumsum(ys, axis=0)[:-1]
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    total_ones = ones_left[-1] + ys[-1]
    zeros_left = n_left - ones_left
    ones_right = total_ones - ones_left
    zeros_right = n_right - ones_right
    score = (ones_left**2 + zeros_left**2) / n_left + (ones_right**2 + zeros_right**2) / n_right
    valid = xs[1:] > xs[:-1]
    if min_samples_leaf > 1:
        ok = (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        valid &= ok
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    best = score.max()
    n1 = float(total_ones[0])
    parent = (n1 * n1 + (n - n1) ** 2) / n
    if not best > parent + TIE_EPS * max(1.0, parent):
        return None
    near = valid & (score >= best - TIE_EPS * max(1.0, abs(best)))
    # column-major scan: first column with a near-best split, then first position
    c_idx, pos = np.argwhere(near.T)[0]
    lo, hi = xs[pos, c_idx], xs[pos + 1, c_idx]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(cols[c_idx]), float(thr)


def train_tree(X, y, params: TreeParams | None = None, rng=None, feature_subset_size: int | None = None):
    """Greedy CART. With ``feature_subset_size`` each node considers a random
    subset of columns drawn from ``rng`` (an :class:`RngStream`)."""
    params = params or TreeParams()
    X = as_matrix(X)
    y = np.asarray(y).astype(np.int64)
    if y.shape != (X.shape[0],):
        raise ValueError("X and y are misaligned")
    if y.size == 0:
        raise ValueError("cannot train a tree on zero samples")
    d = X.shape[1]
    if feature_subset_size is not None:
        if rng is None:
            raise ValueError("feature subsampling requires an rng stream")
        feature_subset_size = max(1, min(int(feature_subset_size), d))
    feature, threshold, left, right, value, counts = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(np.count_nonzero(y[idx] == 1)) / idx.size)
        counts.append(int(idx.size))
        return len(feature) - 1

    root = new_node(np.arange(y.size))
    stack = [(root, np.arange(y.size), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        if (
            (params.max_depth is not None and depth >= params.max_depth)
            or idx.size < params.min_samples_split
            or ys.min() == ys.max()
        ):
            continue
        if feature_subset_size is not None and feature_subset_size < d:
            cols = rng.choice(d, feature_subset_size)
        else:
            cols = np.arange(d)
        split = best_split(X[idx], ys, cols, params.min_samples_leaf)
        if split is None:
            continue
        col, thr = split
        mask = X[idx, col] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = col, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is expanded first (stable numbering)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return DecisionTreeModel(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(counts, dtype=np.int64),
        params,
        d,
    )


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    features_per_split: int | None = None  # None: ceil(sqrt(columns))
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")

    @property
    def tree_params(self) -> TreeParams:
        return TreeParams(self.max_depth, self.min_samples_split, self.min_samples_leaf)

    def resolved_features(self, d: int) -> int:
        if self.features_per_split is None:
            return max(1, math.ceil(math.sqrt(d)))
        return max(1, min(int(self.features_per_split), d))


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple
    params: ForestParams
    seed: int

    def votes(self, X) -> np.ndarray:
        """(n_samples, n_trees) hard votes."""
        return np.stack([t.predict_label(X) for t in self.trees], axis=1)

    def predict_confidence(self, X) -> np.ndarray:
        """Fraction of trees voting for class 1."""
        return self.votes(X).mean(axis=1)

    def predict_label(self, X) -> np.ndarray:
        return (self.predict_confidence(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "kind": "forest",
            "seed": self.seed,
            "params": {
                "n_trees": p.n_trees,
                "max_depth": p.max_depth,
                "min_samples_split": p.min_samples_split,
                "min_samples_leaf": p.min_samples_leaf,
                "features_per_split": p.features_per_split,
                "bootstrap": p.bootstrap,
            },
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForestModel":
        return cls(
            tuple(DecisionTreeModel.from_dict(t) for t in d["trees"]),
            ForestParams(**d["params"]),
            int(d["seed"]),
        )


def _forest_tree(X, y, params: ForestParams, seed: int, t: int):
    rng = RngHandle(seed, t).stream()
    n, d = X.shape
    idx = rng.bootstrap_indices(n) if params.bootstrap else np.arange(n)
    return train_tree(X[idx], y[idx], params.tree_params, rng, params.resolved_features(d))


def train_forest(X, y, params: ForestParams | None = None, seed: int = 0) -> RandomForestModel:
    """Tree ``t`` uses random stream ``(seed, t)`` for its bootstrap sample and
    per-split feature subsets, so trees can be built in any order."""
    params = params or ForestParams()
    X = as_matrix(X)
    y = np.asarray(y).astype(np.int64)
    trees = tuple(_forest_tree(X, y, params, seed, t) for t in range(params.n_trees))
    return RandomForestModel(trees, params, int(seed))
