"""k-nearest-neighbor multi-target regressor on standardized features.

Distances are Euclidean; ties on distance are broken by lower training-row
index.  inverse_distance weighting falls back to the exact matches when any
neighbor distance is zero.
"""

from __future__ import annotations

import numpy as np


class KNNModel:
    kind = "knn"

    def __init__(self, k=5, weighting="uniform", seed=0):
        if k <= 0:
            raise ValueError("k must be positive")
        if weighting not in ("uniform", "inverse_distance"):
            raise ValueError(f"unknown weighting {weighting!r}")
        self.k = int(k)
        self.weighting = weighting
        self.seed = int(seed)
        self.X = None
        self.Y = None

    def fit(self, X, Y):
        X = np.asarray(X, dtype=np.float64)
        if self.k > X.shape[0]:
            raise ValueError("k exceeds the number of training rows")
        self.X = X
        self.Y = np.asarray(Y, dtype=np.float64)
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        n_train = self.X.shape[0]
        out = np.empty((X.shape[0], self.Y.shape[1]))
        for i, q in enumerate(X):
            d = np.sqrt(((self.X - q) ** 2).sum(axis=1))
            order = np.lexsort((np.arange(n_train), d))[: self.k]
            dk = d[order]
            yk = self.Y[order]
            if self.weighting == "uniform":
                out[i] = yk.mean(axis=0)
            else:
                zero = dk == 0
                if zero.any():
                    out[i] = yk[zero].mean(axis=0)
                else:
                    w = 1.0 / dk
                    out[i] = (w[:, None] * yk).sum(axis=0) / w.sum()
        return out

    def to_dict(self):
        return {"k": self.k, "weighting": self.weighting, "seed": self.seed,
                "X": [r.tolist() for r in self.X],
                "Y": [r.tolist() for r in self.Y]}

    @staticmethod
    def from_dict(d):
        m = KNNModel(d["k"], d["weighting"], d["seed"])
        m.X = np.asarray(d["X"], dtype=np.float64)
        m.Y = np.asarray(d["Y"], dtype=np.float64)
        return m
