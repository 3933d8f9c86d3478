"""Feature-ranking scores: permutation (any model), plus the two
tree-ensemble scores.

All three can be restricted to a user-selected subset of examples and depend
only on rows inside that subset.  Permutation scores are relative error
increases and may be negative (noise); the tree scores are non-negative by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .learners import TrainedModel, predict

SCORE_KINDS = ("permutation", "genie3", "symbolic")


@dataclass
class ImportanceReport:
    score_kind: str
    per_target: dict  # target -> {feature -> score}
    aggregate: dict  # feature -> score (mean over targets)
    subset: dict = field(default_factory=dict)  # descriptor of the row filter
    categories: dict = field(default_factory=dict)

    def to_dict(self):
        return {"score_kind": self.score_kind, "subset": self.subset,
                "per_target": self.per_target, "aggregate": self.aggregate,
                "categories": self.categories}

    @staticmethod
    def from_dict(d):
        return ImportanceReport(d["score_kind"], d["per_target"],
                                d["aggregate"], d.get("subset", {}),
                                d.get("categories", {}))


def _resolve_subset(dataset: Dataset, subset):
    if subset is None:
        return np.arange(dataset.n_rows), {"kind": "all"}
    idx = np.asarray(subset)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    if idx.size == 0:
        raise ValueError("subset is empty")
    return idx.astype(np.int64), {"kind": "rows", "count": int(idx.size)}


def _finish(score_kind, model, per_target_scores, subset_desc):
    feats = model.feature_names
    per_target = {
        t: {f: float(per_target_scores[j][i]) for i, f in enumerate(feats)}
        for j, t in enumerate(model.target_names)
    }
    agg_vec = np.mean(np.stack([per_target_scores[j]
                                for j in range(len(model.target_names))]),
                      axis=0)
    aggregate = {f: float(agg_vec[i]) for i, f in enumerate(feats)}
    return ImportanceReport(score_kind, per_target, aggregate, subset_desc,
                            dict(model.categories))


def permutation_importance(model: TrainedModel, dataset: Dataset,
                           repeats: int = 10, subset=None, seed: int = 0,
                           _eps: float = 1e-12) -> ImportanceReport:
    """Relative increase in per-target squared error when a feature column is
    permuted within the subset, averaged over seeded repeats."""
    if dataset.feature_names != model.feature_names:
        raise ValueError("dataset features do not match the model")
    idx, desc = _resolve_subset(dataset, subset)
    X = dataset.X[idx]
    Y = dataset.Y[idx]
    observed = ~np.isnan(Y)
    if not observed.any():
        raise ValueError("subset has no observed targets")
    t = Y.shape[1]

    def errors(Xq):
        pred = predict(model, Xq)
        err = np.empty(t)
        for j in range(t):
            m = observed[:, j]
            err[j] = np.mean((pred[m, j] - Y[m, j]) ** 2) if m.any() else np.nan
        return err

    base = errors(X)
    denom = np.maximum(base, _eps)
    rng = np.random.default_rng(seed)
    scores = [np.zeros(X.shape[1]) for _ in range(t)]
    for _ in range(repeats):
        for col in range(X.shape[1]):
            perm = rng.permutation(X.shape[0])
            Xp = X.copy()
            Xp[:, col] = X[perm, col]
            err = errors(Xp)
            for j in range(t):
                if not np.isnan(base[j]):
                    scores[j][col] += (err[j] - base[j]) / denom[j]
    for j in range(t):
        scores[j] /= repeats
    return _finish("permutation", model, scores, desc)


def _route(tree, X):
    """Subset row indices reaching every node of the tree."""
    rows_at = {0: np.arange(X.shape[0])}
    order = [0]
    out = {}
    while order:
        node = order.pop()
        rows = rows_at.pop(node)
        out[node] = rows
        f = tree.feature[node]
        if f >= 0 and rows.size:
            go_left = X[rows, f] <= tree.threshold[node]
            rows_at[tree.left[node]] = rows[go_left]
            rows_at[tree.right[node]] = rows[~go_left]
            order.extend((tree.left[node], tree.right[node]))
        elif f >= 0:
            rows_at[tree.left[node]] = rows
            rows_at[tree.right[node]] = rows[:0]
            order.extend((tree.left[node], tree.right[node]))
    return out


def _tree_scores(model: TrainedModel, dataset: Dataset, subset, formula):
    if not model.is_tree_ensemble:
        raise ValueError("score requires tree ensemble")
    if dataset.feature_names != model.feature_names:
        raise ValueError("dataset features do not match the model")
    idx, desc = _resolve_subset(dataset, subset)
    X = model.scaler.transform_x(
        np.where(np.isnan(dataset.X[idx]),
                 np.broadcast_to(model.scaler.x_mean, dataset.X[idx].shape),
                 dataset.X[idx]))
    Ys = model.scaler.transform_y(dataset.Y[idx])
    t = len(model.target_names)
    d = len(model.feature_names)
    totals = [np.zeros(d) for _ in range(t)]
    tree_counts = np.zeros(t)
    for tree, targets in model.trees():
        for j in targets:
            tree_counts[j] += 1
        routed = _route(tree, X)
        n_root = max(1, X.shape[0])
        for node, rows in routed.items():
            f = int(tree.feature[node])
            if f < 0 or rows.size == 0:
                continue
            contrib = formula(tree, node, rows, X, Ys, n_root)
            for j in targets:
                totals[j][f] += contrib[j] if np.ndim(contrib) else contrib
    scores = []
    for j in range(t):
        k = max(1.0, tree_counts[j])
        scores.append(totals[j] / k)
    return scores, desc


def genie3_importance(model: TrainedModel, dataset: Dataset,
                      subset=None) -> ImportanceReport:
    """Per feature: mean over trees of sum over its split nodes of
    N(node) * realized variance reduction, per standardized target."""

    def formula(tree, node, rows, X, Ys, n_root):
        f = tree.feature[node]
        go_left = X[rows, f] <= tree.threshold[node]
        y = Ys[rows]
        yl, yr = y[go_left], y[~go_left]
        n = rows.size
        with np.errstate(invalid="ignore"):
            var_p = np.nanvar(y, axis=0)
            var_l = np.nanvar(yl, axis=0) if yl.shape[0] else np.zeros(y.shape[1])
            var_r = np.nanvar(yr, axis=0) if yr.shape[0] else np.zeros(y.shape[1])
        dvar = (np.nan_to_num(var_p)
                - (yl.shape[0] / n) * np.nan_to_num(var_l)
                - (yr.shape[0] / n) * np.nan_to_num(var_r))
        return n * dvar

    scores, desc = _tree_scores(model, dataset, subset, formula)
    return _finish("genie3", model, scores, desc)


def symbolic_importance(model: TrainedModel, dataset: Dataset,
                        subset=None) -> ImportanceReport:
    """Per feature: mean over trees of sum over its split nodes of the
    fraction of subset examples reaching the node."""

    def formula(tree, node, rows, X, Ys, n_root):
        return rows.size / n_root

    scores, desc = _tree_scores(model, dataset, subset, formula)
    return _finish("symbolic", model, scores, desc)


def compute_importance(kind, model, dataset, subset=None, repeats=10, seed=0):
    if kind == "permutation":
        return permutation_importance(model, dataset, repeats=repeats,
                                      subset=subset, seed=seed)
    if kind == "genie3":
        return genie3_importance(model, dataset, subset=subset)
    if kind == "symbolic":
        return symbolic_importance(model, dataset, subset=subset)
    raise ValueError(f"unknown score kind {kind!r}")


def summarize(report: ImportanceReport, categories: dict, top_k: int = 10):
    """Category roll-up (per target + aggregate) and top-k feature lists.

    Ties in the top-k ordering are broken by feature name.
    """
    for f in report.aggregate:
        if f not in categories:
            raise ValueError(f"feature {f!r} has no category")

    def rollup(scores):
        out = {}
        for f, s in scores.items():
            out[categories[f]] = out.get(categories[f], 0.0) + s
        return out

    def top(scores):
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return [{"feature": f, "score": s} for f, s in ranked[:top_k]]

    per_target_rollup = {t: rollup(sc) for t, sc in report.per_target.items()}
    per_target_top = {t: top(sc) for t, sc in report.per_target.items()}
    return {
        "category_rollup": {"aggregate": rollup(report.aggregate),
                            "per_target": per_target_rollup},
        "top_features": {"aggregate": top(report.aggregate),
                         "per_target": per_target_top},
        "top_k": top_k,
    }
