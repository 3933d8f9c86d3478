"""Gradient boosting of regression trees, squared or quantile loss.

One booster per target (local mode).  Squared loss initializes at the target
mean and fits residuals; quantile loss initializes at the empirical
alpha-quantile, fits trees to the gradient sign pattern (alpha - 1{y < F})
and sets each leaf to the alpha-quantile of the residuals it contains.
"""

from __future__ import annotations

import numpy as np

from .tree import Tree, fit_tree


def quantile_loss(y, pred, alpha):
    diff = y - pred
    return float(np.mean(np.where(diff >= 0, alpha * diff, (alpha - 1) * diff)))


class Booster:
    """Single-target boosted tree ensemble."""

    def __init__(self, loss="squared", alpha=0.5, n_rounds=100,
                 learning_rate=0.1, max_depth=3, min_leaf=1, seed=0):
        if n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if loss == "quantile" and not 0 < alpha < 1:
            raise ValueError("quantile alpha must be in (0, 1)")
        if loss not in ("squared", "quantile"):
            raise ValueError(f"unknown loss {loss!r}")
        self.loss = loss
        self.alpha = float(alpha)
        self.n_rounds = int(n_rounds)
        self.learning_rate = float(learning_rate)
        self.max_depth = max_depth
        self.min_leaf = int(min_leaf)
        self.seed = int(seed)
        self.init_value = 0.0
        self.trees = []
        self.train_loss = []

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if self.loss == "squared":
            self.init_value = float(y.mean())
        else:
            self.init_value = float(np.quantile(y, self.alpha))
        F = np.full(y.shape, self.init_value)
        self.trees = []
        self.train_loss = []
        for _ in range(self.n_rounds):
            if self.loss == "squared":
                grad = y - F
                tree, _ = fit_tree(X, grad, max_depth=self.max_depth,
                                   min_leaf=self.min_leaf)
            else:
                grad = np.where(y < F, self.alpha - 1.0, self.alpha)
                tree, leaf_rows = fit_tree(X, grad, max_depth=self.max_depth,
                                           min_leaf=self.min_leaf)
                residual = y - F
                tree.apply_leaf_values(
                    {node: [np.quantile(residual[idx], self.alpha)]
                     for node, idx in leaf_rows.items()})
            F = F + self.learning_rate * tree.predict(X)[:, 0]
            self.trees.append(tree)
            if self.loss == "squared":
                self.train_loss.append(float(np.mean((y - F) ** 2)))
            else:
                self.train_loss.append(quantile_loss(y, F, self.alpha))
        return self

    def predict(self, X):
        out = np.full(np.asarray(X).shape[0], self.init_value)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)[:, 0]
        return out

    def to_dict(self):
        return {"loss": self.loss, "alpha": self.alpha,
                "n_rounds": self.n_rounds,
                "learning_rate": self.learning_rate,
                "max_depth": self.max_depth, "min_leaf": self.min_leaf,
                "seed": self.seed, "init_value": self.init_value,
                "train_loss": self.train_loss,
                "trees": [t.to_dict() for t in self.trees]}

    @staticmethod
    def from_dict(d):
        b = Booster(d["loss"], d["alpha"], d["n_rounds"], d["learning_rate"],
                    d["max_depth"], d["min_leaf"], d["seed"])
        b.init_value = d["init_value"]
        b.train_loss = d["train_loss"]
        b.trees = [Tree.from_dict(t) for t in d["trees"]]
        return b


class GBoostModel:
    """Per-target boosters behind the multi-target learner interface."""

    kind = "gboost"

    def __init__(self, **params):
        self.params = params
        self.boosters = []

    def fit(self, X, Y, row_sets=None):
        Y = np.asarray(Y, dtype=np.float64)
        self.boosters = []
        for j in range(Y.shape[1]):
            rows = (row_sets[j] if row_sets is not None
                    else np.arange(Y.shape[0]))
            if len(rows) == 0:
                raise ValueError(f"target {j}: no observed training rows")
            b = Booster(**self.params)
            b.fit(np.asarray(X)[rows], Y[rows, j])
            self.boosters.append(b)
        return self

    def predict(self, X):
        return np.column_stack([b.predict(X) for b in self.boosters])

    def to_dict(self):
        return {"params": self.params,
                "boosters": [b.to_dict() for b in self.boosters]}

    @staticmethod
    def from_dict(d):
        m = GBoostModel(**d["params"])
        m.boosters = [Booster.from_dict(b) for b in d["boosters"]]
        return m
