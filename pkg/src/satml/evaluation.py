"""Temporal splitting, masked error metrics, and the what-if engine.

Metrics are computed only over observed target values.  Splits are temporal
by default (both use-cases are forecasting); shuffled splits exist behind an
explicit flag and are marked in the metafile as leakage-prone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .learners import TrainedModel, predict_dataset


@dataclass
class MetricReport:
    per_target: dict  # target -> {rmse, mae, count}; None metrics = undefined
    overall_rmse: float
    overall_mae: float

    def to_dict(self):
        return {"per_target": self.per_target,
                "overall_rmse": self.overall_rmse,
                "overall_mae": self.overall_mae}


@dataclass
class WhatIfSpec:
    excluded_features: list = field(default_factory=list)
    excluded_intervals: list = field(default_factory=list)  # (from_ms, to_ms)
    base_run: str = ""

    def to_dict(self):
        return {"excluded_features": list(self.excluded_features),
                "excluded_intervals": [list(i) for i in self.excluded_intervals],
                "base_run": self.base_run}


def split(dataset: Dataset, kind: str = "holdout", fraction: float = 0.8,
          k: int = 5, shuffled: bool = False, seed: int = 0):
    """Partition rows, keeping time order unless `shuffled` is set.

    holdout: (train, test) with train = earliest `fraction` of rows.
    kfold: list of (train, test) with contiguous test blocks.
    """
    n = dataset.n_rows
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    order = np.arange(n)
    if shuffled:
        order = np.random.default_rng(seed).permutation(n)
    if kind == "holdout":
        if not 0 < fraction < 1:
            raise ValueError("holdout fraction must be in (0, 1)")
        cut = int(round(n * fraction))
        cut = min(max(cut, 1), n - 1)
        return dataset.take(order[:cut]), dataset.take(order[cut:])
    if kind == "kfold":
        if k > n:
            raise ValueError("k exceeds the number of rows")
        if k < 2:
            raise ValueError("k must be >= 2")
        bounds = np.linspace(0, n, k + 1).astype(int)
        folds = []
        for i in range(k):
            test = order[bounds[i]:bounds[i + 1]]
            train = np.concatenate([order[:bounds[i]], order[bounds[i + 1]:]])
            folds.append((dataset.take(train), dataset.take(test)))
        return folds
    raise ValueError(f"unknown split kind {kind!r}")


def evaluate(model: TrainedModel, dataset: Dataset) -> MetricReport:
    """Per-target RMSE/MAE over rows with that target observed."""
    pred = predict_dataset(model, dataset)
    per_target = {}
    rmses, maes = [], []
    for j, name in enumerate(dataset.target_names):
        mask = ~np.isnan(dataset.Y[:, j])
        count = int(mask.sum())
        if count == 0:
            per_target[name] = {"rmse": None, "mae": None, "count": 0}
            continue
        diff = pred[mask, j] - dataset.Y[mask, j]
        rmse = float(np.sqrt(np.mean(diff ** 2)))
        mae = float(np.mean(np.abs(diff)))
        per_target[name] = {"rmse": rmse, "mae": mae, "count": count}
        rmses.append(rmse)
        maes.append(mae)
    overall_rmse = float(np.mean(rmses)) if rmses else None
    overall_mae = float(np.mean(maes)) if maes else None
    return MetricReport(per_target, overall_rmse, overall_mae)


def apply_exclusions(dataset: Dataset, spec: WhatIfSpec) -> Dataset:
    """Drop excluded features and rows whose bin centers fall inside any
    excluded interval.  Excluding everything is an error."""
    ds = dataset
    if spec.excluded_features:
        unknown = set(spec.excluded_features) - set(ds.feature_names)
        if unknown:
            raise ValueError(f"unknown features: {sorted(unknown)}")
        ds = ds.drop_features(spec.excluded_features)
        if ds.n_features == 0:
            raise ValueError("what-if excludes every feature")
    if spec.excluded_intervals:
        if ds.time_index is None:
            raise ValueError("dataset has no time index")
        keep = np.ones(ds.n_rows, dtype=bool)
        for lo, hi in spec.excluded_intervals:
            keep &= ~((ds.time_index >= lo) & (ds.time_index < hi))
        if not keep.any():
            raise ValueError("what-if excludes every row")
        ds = ds.take(np.flatnonzero(keep))
    return ds


def diff_metrics(base: dict, variant: dict) -> dict:
    """Per-target metric deltas (variant - base) for shared targets."""
    out = {}
    for t, bm in base.get("per_target", {}).items():
        vm = variant.get("per_target", {}).get(t)
        if vm is None:
            continue
        out[t] = {
            m: (None if bm.get(m) is None or vm.get(m) is None
                else vm[m] - bm[m])
            for m in ("rmse", "mae")
        }
    return out


def run_whatif(base_config: dict, spec: WhatIfSpec, out_dir,
               base_summary: dict = None) -> dict:
    """Clone the base config, apply exclusions, re-run the full pipeline with
    the base seed, and report metric/importance deltas against the base."""
    from .runs import execute_run

    config = dict(base_config)
    # lineage stays in the comparison report, not in the executed config, so
    # an empty exclusion set reproduces the base artifacts bit-identically
    config["exclude"] = {**spec.to_dict(), "base_run": ""}
    summary = execute_run(config, out_dir)
    report = {"whatif": spec.to_dict(), "variant": summary}
    if base_summary is not None:
        report["base"] = base_summary
        report["metric_deltas"] = diff_metrics(
            base_summary.get("metrics", {}), summary.get("metrics", {}))
    return report
