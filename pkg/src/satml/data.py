"""Tabular dataset container shared by the pipelines and learners.

Missing values are NaN throughout.  Features carry a category tag used by
the importance roll-ups; targets keep their missing mask so that training
exclusion and masked evaluation can apply their own rules.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass
class Dataset:
    X: np.ndarray  # (n, d) float64, NaN = missing
    Y: np.ndarray  # (n, t) float64, NaN = missing
    feature_names: list
    target_names: list
    categories: dict = field(default_factory=dict)  # feature -> category tag
    time_index: np.ndarray = None  # (n,) ms-UTC bin centers, optional

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y row counts differ")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("feature name count mismatch")
        if self.Y.shape[1] != len(self.target_names):
            raise ValueError("target name count mismatch")

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def n_targets(self):
        return self.Y.shape[1]

    def take(self, idx) -> "Dataset":
        ti = self.time_index[idx] if self.time_index is not None else None
        return replace(self, X=self.X[idx], Y=self.Y[idx], time_index=ti)

    def select_features(self, names) -> "Dataset":
        keep = [i for i, n in enumerate(self.feature_names) if n in set(names)]
        return replace(
            self,
            X=self.X[:, keep],
            feature_names=[self.feature_names[i] for i in keep],
            categories={n: c for n, c in self.categories.items()
                        if n in set(names)},
        )

    def drop_features(self, names) -> "Dataset":
        drop = set(names)
        return self.select_features([n for n in self.feature_names if n not in drop])

    def to_csv(self) -> bytes:
        """ut_ms,<features...>,<targets...>; NaN serialized as empty field."""
        buf = io.StringIO()
        buf.write(",".join(["ut_ms"] + self.feature_names + self.target_names) + "\n")
        t = self.time_index if self.time_index is not None else np.zeros(self.n_rows, dtype=np.int64)
        for i in range(self.n_rows):
            vals = [str(int(t[i]))]
            for v in self.X[i]:
                vals.append("" if np.isnan(v) else repr(float(v)))
            for v in self.Y[i]:
                vals.append("" if np.isnan(v) else repr(float(v)))
            buf.write(",".join(vals) + "\n")
        return buf.getvalue().encode()

    @staticmethod
    def from_csv(data: bytes, target_names, categories=None) -> "Dataset":
        lines = data.decode().splitlines()
        header = lines[0].split(",")
        if header[0] != "ut_ms":
            raise ValueError("dataset CSV must start with ut_ms")
        names = header[1:]
        tset = set(target_names)
        fnames = [n for n in names if n not in tset]
        tnames = [n for n in names if n in tset]
        rows = [line.split(",") for line in lines[1:] if line]
        t = np.array([int(r[0]) for r in rows], dtype=np.int64)
        grid = np.array(
            [[float(v) if v != "" else np.nan for v in r[1:]] for r in rows],
            dtype=np.float64,
        ).reshape(len(rows), len(names))
        fidx = [names.index(n) for n in fnames]
        tidx = [names.index(n) for n in tnames]
        return Dataset(grid[:, fidx], grid[:, tidx], fnames, tnames,
                       categories or {}, time_index=t)


class Scaler:
    """Per-column standardization with population std; zero-variance columns
    pass through unscaled.  Fitted on the learning set only."""

    def __init__(self, feature_names, target_names,
                 x_mean, x_std, y_mean, y_std):
        self.feature_names = list(feature_names)
        self.target_names = list(target_names)
        self.x_mean = np.asarray(x_mean, dtype=np.float64)
        self.x_std = np.asarray(x_std, dtype=np.float64)
        self.y_mean = np.asarray(y_mean, dtype=np.float64)
        self.y_std = np.asarray(y_std, dtype=np.float64)

    @staticmethod
    def fit(dataset: Dataset) -> "Scaler":
        if dataset.n_rows == 0:
            raise ValueError("cannot fit scaler on an empty learning set")
        xm = np.nanmean(dataset.X, axis=0)
        xs = np.nanstd(dataset.X, axis=0)
        with np.errstate(invalid="ignore"):
            ym = np.nanmean(np.where(np.isnan(dataset.Y), np.nan, dataset.Y), axis=0)
            ys = np.nanstd(dataset.Y, axis=0)
        return Scaler(dataset.feature_names, dataset.target_names, xm, xs, ym, ys)

    def _check(self, dataset: Dataset):
        if dataset.feature_names != self.feature_names:
            raise ValueError("scaler fitted on different feature columns")
        if dataset.target_names != self.target_names:
            raise ValueError("scaler fitted on different target columns")

    def transform_x(self, X):
        scale = np.where(self.x_std > 0, self.x_std, 1.0)
        shift = np.where(self.x_std > 0, self.x_mean, 0.0)
        return (X - shift) / scale

    def transform_y(self, Y):
        scale = np.where(self.y_std > 0, self.y_std, 1.0)
        shift = np.where(self.y_std > 0, self.y_mean, 0.0)
        return (Y - shift) / scale

    def invert_y(self, Y):
        scale = np.where(self.y_std > 0, self.y_std, 1.0)
        shift = np.where(self.y_std > 0, self.y_mean, 0.0)
        return Y * scale + shift

    def apply(self, dataset: Dataset) -> Dataset:
        self._check(dataset)
        return replace(dataset, X=self.transform_x(dataset.X),
                       Y=self.transform_y(dataset.Y))

    def to_dict(self):
        return {
            "feature_names": self.feature_names,
            "target_names": self.target_names,
            "x_mean": self.x_mean.tolist(), "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean.tolist(), "y_std": self.y_std.tolist(),
        }

    @staticmethod
    def from_dict(d):
        return Scaler(d["feature_names"], d["target_names"],
                      d["x_mean"], d["x_std"], d["y_mean"], d["y_std"])


def impute_missing(dataset: Dataset, scaler: Scaler) -> Dataset:
    """Fill missing feature values with the learning-set means; Y untouched."""
    scaler._check(dataset)
    X = dataset.X.copy()
    nan = np.isnan(X)
    if nan.any():
        fill = np.broadcast_to(scaler.x_mean, X.shape)
        X[nan] = fill[nan]
    return replace(dataset, X=X)


def exclude_missing_targets(dataset: Dataset, mode: str = "global"):
    """Drop learning rows with missing targets.

    global: rows with any missing target removed, returns a Dataset.
    local: returns per-target row index arrays (rows observed for that target).
    """
    if mode == "global":
        keep = ~np.isnan(dataset.Y).any(axis=1)
        if not keep.any():
            raise ValueError("no training data: all rows have missing targets")
        return dataset.take(np.flatnonzero(keep))
    if mode == "local":
        out = []
        for j in range(dataset.n_targets):
            rows = np.flatnonzero(~np.isnan(dataset.Y[:, j]))
            out.append(rows)
        if all(len(r) == 0 for r in out):
            raise ValueError("no training data: all targets entirely missing")
        return out
    raise ValueError(f"unknown mode {mode!r}")


def dataset_digest(dataset: Dataset) -> str:
    import hashlib

    h = hashlib.sha256()
    h.update(json.dumps({"features": dataset.feature_names,
                         "targets": dataset.target_names}).encode())
    h.update(dataset.X.tobytes())
    h.update(dataset.Y.tobytes())
    if dataset.time_index is not None:
        h.update(np.asarray(dataset.time_index).tobytes())
    return h.hexdigest()
