"""Multi-target regression tree grown by exhaustive split search.

The best split maximizes the total sum-of-squares reduction summed over all
targets (equivalently the weighted variance reduction).  Candidate
thresholds are the midpoints of consecutive distinct sorted values; ties are
broken toward the lower feature index and lower threshold so the structure
is fully reproducible.
"""

from __future__ import annotations

import numpy as np

from .. import kernels

MIN_GAIN = 1e-12


class Tree:
    """Flat array tree: feature[i] < 0 marks a leaf."""

    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def _seal(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=np.float64)
        return self

    @property
    def n_nodes(self):
        return len(self.feature)

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            act = np.flatnonzero(self.feature[node] >= 0)
            if act.size == 0:
                break
            cur = node[act]
            f = self.feature[cur]
            go_left = X[act, f] <= self.threshold[cur]
            node[act] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def apply_leaf_values(self, leaf_values):
        """Overwrite leaf predictions (node index -> value row)."""
        for idx, v in leaf_values.items():
            self.value[idx] = v

    def leaf_index(self, X):
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            act = np.flatnonzero(self.feature[node] >= 0)
            if act.size == 0:
                return node
            cur = node[act]
            go_left = X[act, self.feature[cur]] <= self.threshold[cur]
            node[act] = np.where(go_left, self.left[cur], self.right[cur])

    def to_dict(self):
        return {"feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": [row.tolist() for row in self.value]}

    @staticmethod
    def from_dict(d):
        t = Tree()
        t.feature = d["feature"]
        t.threshold = d["threshold"]
        t.left = d["left"]
        t.right = d["right"]
        t.value = d["value"]
        return t._seal()


def fit_tree(X, Y, max_depth=None, min_leaf=1, mtry=None, rng=None,
             leaf_fn=None, row_idx=None):
    """Grow a tree on rows `row_idx` of (X, Y).

    mtry < d samples features per node from `rng`; recursion is preorder
    (left first) so the draw sequence, and hence the tree, is deterministic.
    leaf_fn(idx) may override the per-target-mean leaf values (used by the
    quantile booster).  Returns (tree, leaf row-index map).
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d = X.shape
    if row_idx is None:
        row_idx = np.arange(n)
    mtry = d if mtry is None else max(1, min(int(mtry), d))
    min_leaf = max(1, int(min_leaf))
    tree = Tree()
    leaf_rows = {}

    def new_node():
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.value.append(np.zeros(Y.shape[1]))
        return len(tree.feature) - 1

    def grow(idx, depth):
        node = new_node()
        value = (leaf_fn(idx) if leaf_fn is not None
                 else Y[idx].mean(axis=0))
        tree.value[node] = np.asarray(value, dtype=np.float64)
        if (len(idx) < 2 * min_leaf
                or (max_depth is not None and depth >= max_depth)):
            leaf_rows[node] = idx
            return node
        if mtry < d:
            feats = np.sort(rng.choice(d, size=mtry, replace=False))
        else:
            feats = np.arange(d)
        best = (kernels.NO_SPLIT, 0.0, MIN_GAIN, -1)
        for j in feats:
            order = np.argsort(X[idx, j], kind="stable")
            pos, thr, gain = kernels.best_split_feature(
                X[idx[order], j], Y[idx[order]], min_leaf)
            if pos != kernels.NO_SPLIT and gain > best[2]:
                best = (pos, thr, gain, int(j))
        pos, thr, gain, j = best
        if j < 0:
            leaf_rows[node] = idx
            return node
        go_left = X[idx, j] <= thr
        left_idx = idx[go_left]
        right_idx = idx[~go_left]
        if len(left_idx) == 0 or len(right_idx) == 0:
            leaf_rows[node] = idx
            return node
        tree.feature[node] = j
        tree.threshold[node] = thr
        tree.left[node] = grow(left_idx, depth + 1)
        tree.right[node] = grow(right_idx, depth + 1)
        return node

    import sys

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10000))
    try:
        grow(row_idx, 0)
    finally:
        sys.setrecursionlimit(old_limit)
    return tree._seal(), leaf_rows
