"""Regression trees (variance reduction) and random forests of them.

Trees work on raw option values; a row goes left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

import math

import numpy as np

from .. import backend
from .base import LearnerError


def n_candidate_features(max_features, d: int) -> int:
    if max_features is None or max_features == "all":
        return d
    if max_features == "sqrt":
        return max(1, int(math.sqrt(d)))
    if max_features == "log2":
        return max(1, int(math.log2(d))) if d > 1 else 1
    if isinstance(max_features, bool):
        raise LearnerError(f"invalid max_features {max_features!r}")
    if isinstance(max_features, float):
        if not 0 < max_features <= 1:
            raise LearnerError("float max_features must lie in (0, 1]")
        return max(1, int(max_features * d))
    if isinstance(max_features, int):
        if max_features < 1:
            raise LearnerError("max_features must be >= 1")
        return min(d, max_features)
    raise LearnerError(f"invalid max_features {max_features!r}")


class RegressionTree:
    """Flat-array binary tree; leaves have ``feature == -1``."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            idx = np.flatnonzero(inner)
            go_left = X[idx, f[idx]] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])

    def state(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(), "value": self.value.tolist()}

    @classmethod
    def from_state(cls, s) -> "RegressionTree":
        return cls(s["feature"], s["threshold"], s["left"], s["right"], s["value"])


def grow_tree(X, y, splitter="best", max_features="all", min_samples_leaf=1, random_state=0,
              rows=None) -> RegressionTree:
    """Grow a full tree; ``rows`` (repeats allowed) selects the training rows, default all."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if len(y) < 1:
        raise LearnerError("CART needs at least 1 row")
    if splitter not in ("best", "random"):
        raise LearnerError(f"splitter must be 'best' or 'random', got {splitter!r}")
    min_leaf = int(min_samples_leaf)
    if min_leaf < 1:
        raise LearnerError("min_samples_leaf must be >= 1")
    m = n_candidate_features(max_features, X.shape[1])
    rows = np.arange(len(y), dtype=np.int64) if rows is None else np.asarray(rows, dtype=np.int64)
    arrays = backend.build_tree(X, y, rows, m, min_leaf, splitter == "random", int(random_state))
    return RegressionTree(*arrays)


class CartModel:
    def __init__(self, tree: RegressionTree):
        self.tree = tree

    def predict(self, X):
        return self.tree.predict(X)

    def state(self):
        return {"tree": self.tree.state()}

    @classmethod
    def from_state(cls, s):
        return cls(RegressionTree.from_state(s["tree"]))


def exact_mean(P: np.ndarray) -> np.ndarray:
    """Column means of P rounded once from the exact rational mean.

    A plain float mean can drift an ulp outside the column's range; this cannot.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    out = P[0].copy()
    for j in np.flatnonzero((P != P[0]).any(axis=0)):
        ratios = [v.as_integer_ratio() for v in P[:, j].tolist()]
        den = max(b for _, b in ratios)
        # int / int is correctly rounded
        out[j] = sum(a * (den // b) for a, b in ratios) / (den * n)
    return out


class ForestModel:
    def __init__(self, trees):
        self.trees = list(trees)

    def tree_predictions(self, X) -> np.ndarray:
        return np.vstack([t.predict(X) for t in self.trees])

    def predict(self, X):
        return exact_mean(self.tree_predictions(X))

    def state(self):
        return {"trees": [t.state() for t in self.trees]}

    @classmethod
    def from_state(cls, s):
        return cls(RegressionTree.from_state(t) for t in s["trees"])


def fit_cart(space, X, y, hp) -> CartModel:
    return CartModel(grow_tree(X, y, hp["splitter"], hp["max_features"], hp["min_samples_leaf"],
                               hp["random_state"]))


def fit_rf(space, X, y, hp, bootstrap: bool = True) -> ForestModel:
    """Forest of best-split trees; tree ``t`` draws its bootstrap and its own seed from (random_state, t).

    ``bootstrap=False`` trains every tree on the full set (used to check the degenerate forest).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n_estimators = int(hp["n_estimators"])
    if n_estimators < 1:
        raise LearnerError("n_estimators must be >= 1")
    state = int(hp["random_state"])
    trees = []
    for t in range(n_estimators):
        if bootstrap:
            rng = np.random.default_rng([state, t])
            idx = rng.integers(0, len(y), len(y))
            seed = int(rng.integers(0, 2**31 - 1))
        else:
            idx, seed = np.arange(len(y)), state
        trees.append(grow_tree(X, y, "best", hp["max_features"], 1, seed, rows=idx))
    return ForestModel(trees)
