"""Random forest of multi-target regression trees.

Each tree sees a bootstrap sample (seeded, per-tree seed = root seed + tree
index) and mtry features per split; the forest predicts the mean over trees.
"""

from __future__ import annotations

import numpy as np

from .tree import Tree, fit_tree


class ForestModel:
    kind = "forest"

    def __init__(self, n_trees=100, mtry=None, min_leaf=1, max_depth=None,
                 bootstrap=True, seed=0):
        if n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        self.n_trees = int(n_trees)
        self.mtry = mtry
        self.min_leaf = int(min_leaf)
        self.max_depth = max_depth
        self.bootstrap = bool(bootstrap)
        self.seed = int(seed)
        self.trees = []
        self.n_targets = None

    def fit(self, X, Y):
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        n, d = X.shape
        self.n_targets = Y.shape[1]
        mtry = d if self.mtry is None else max(1, min(int(self.mtry), d))
        if mtry < 1 or mtry > d:
            raise ValueError("mtry must be within [1, n_features]")
        self.trees = []
        for i in range(self.n_trees):
            rng = np.random.default_rng(self.seed + i)
            if self.bootstrap:
                idx = np.sort(rng.integers(0, n, size=n))
            else:
                idx = np.arange(n)
            tree, _ = fit_tree(X, Y, max_depth=self.max_depth,
                               min_leaf=self.min_leaf, mtry=mtry,
                               rng=rng, row_idx=idx)
            self.trees.append(tree)
        return self

    def predict(self, X):
        out = self.trees[0].predict(X).copy()
        for tree in self.trees[1:]:
            out += tree.predict(X)
        return out / len(self.trees)

    def to_dict(self):
        return {"n_trees": self.n_trees, "mtry": self.mtry,
                "min_leaf": self.min_leaf, "max_depth": self.max_depth,
                "bootstrap": self.bootstrap, "seed": self.seed,
                "n_targets": self.n_targets,
                "trees": [t.to_dict() for t in self.trees]}

    @staticmethod
    def from_dict(d):
        m = ForestModel(d["n_trees"], d["mtry"], d["min_leaf"],
                        d["max_depth"], d["bootstrap"], d["seed"])
        m.n_targets = d["n_targets"]
        m.trees = [Tree.from_dict(t) for t in d["trees"]]
        return m
