"""Random forest of Gini-grown decision trees.

Trees are grown on bootstrap samples with a fresh feature subsample at every
split. Leaves keep their training class counts so the forest can emit
calibratable class frequencies, not just votes. Ties (equal impurity) break
toward the lowest feature index and lowest threshold, and every tree draws
from its own spawned RNG stream, so training is reproducible and
schedule-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateTrainingError, InvalidArgumentError, SchemaMismatchError


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    max_features: str | int = "sqrt"  # features per split: "sqrt", "all", or a count

    def features_per_split(self, n_features: int) -> int:
        if self.max_features == "all":
            return n_features
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        m = int(self.max_features)
        if not 1 <= m <= n_features:
            raise InvalidArgumentError(f"max_features {m} outside 1..{n_features}")
        return m


# Trees are nested dicts so they serialize as-is:
#   split: {"f": feature, "t": threshold, "l": node, "r": node}
#   leaf:  {"n": [class counts]}


def _gini_from_counts(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    frac = counts / n
    return 1.0 - float((frac * frac).sum())


def _best_split(X, y, indices, features, n_classes, min_leaf):
    """Lowest weighted-Gini (feature, threshold) over the candidate features."""
    best = None
    best_gini = math.inf
    n = len(indices)
    for f in features:
        order = np.argsort(X[indices, f], kind="stable")
        sorted_idx = indices[order]
        values = X[sorted_idx, f]
        labels = y[sorted_idx]

        left = np.zeros(n_classes, dtype=np.int64)
        right = np.bincount(labels, minlength=n_classes).astype(np.int64)
        for pos in range(n - 1):
            left[labels[pos]] += 1
            right[labels[pos]] -= 1
            if values[pos] == values[pos + 1]:
                continue
            nl = pos + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            gini = (nl * _gini_from_counts(left) + nr * _gini_from_counts(right)) / n
            if gini < best_gini:
                best_gini = gini
                best = (int(f), float((values[pos] + values[pos + 1]) / 2.0))
    return best


def _grow(X, y, indices, depth, params, n_classes, rng):
    counts = np.bincount(y[indices], minlength=n_classes)
    if (
        (params.max_depth is not None and depth >= params.max_depth)
        or len(indices) < 2 * params.min_leaf
        or np.count_nonzero(counts) <= 1
    ):
        return {"n": counts.tolist()}

    m = params.features_per_split(X.shape[1])
    if m < X.shape[1]:
        features = np.sort(rng.permutation(X.shape[1])[:m])
    else:
        features = np.arange(X.shape[1])

    split = _best_split(X, y, indices, features, n_classes, params.min_leaf)
    if split is None:
        return {"n": counts.tolist()}
    f, t = split
    go_left = X[indices, f] <= t
    left = _grow(X, y, indices[go_left], depth + 1, params, n_classes, rng)
    right = _grow(X, y, indices[~go_left], depth + 1, params, n_classes, rng)
    return {"f": f, "t": t, "l": left, "r": right}


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple[dict, ...]
    n_classes: int
    n_features: int
    params: ForestParams

    def to_dict(self) -> dict:
        return {
            "trees": list(self.trees),
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "params": {
                "n_trees": self.params.n_trees,
                "max_depth": self.params.max_depth,
                "min_leaf": self.params.min_leaf,
                "max_features": self.params.max_features,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForestModel":
        return cls(
            trees=tuple(d["trees"]),
            n_classes=int(d["n_classes"]),
            n_features=int(d["n_features"]),
            params=ForestParams(**d["params"]),
        )


def train_random_forest(X, y, params: ForestParams, seed) -> RandomForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise InvalidArgumentError(f"bad training shapes {X.shape} / {y.shape}")
    if not np.isfinite(X).all():
        raise InvalidArgumentError("features contain non-finite values")
    classes = np.unique(y)
    if len(classes) < 2:
        raise DegenerateTrainingError(f"need >= 2 classes, got {classes}")
    n_classes = int(y.max()) + 1

    trees = []
    for child in np.random.SeedSequence(seed).spawn(params.n_trees):
        rng = np.random.default_rng(child)
        bootstrap = rng.integers(0, len(X), size=len(X))
        trees.append(_grow(X, y, bootstrap, 0, params, n_classes, rng))
    return RandomForestModel(
        trees=tuple(trees), n_classes=n_classes, n_features=X.shape[1], params=params
    )


def _leaf_distribution(tree: dict, x: np.ndarray) -> np.ndarray:
    node = tree
    while "f" in node:
        node = node["l"] if x[node["f"]] <= node["t"] else node["r"]
    counts = np.asarray(node["n"], dtype=np.float64)
    return counts / counts.sum()


def rf_predict_proba(model: RandomForestModel, X) -> np.ndarray:
    """Per sample, the mean of the trees' leaf class frequencies."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise SchemaMismatchError(
            f"expected {model.n_features} features, got shape {X.shape}"
        )
    out = np.zeros((len(X), model.n_classes))
    for i, x in enumerate(X):
        for tree in model.trees:
            out[i] += _leaf_distribution(tree, x)
    return out / len(model.trees)
