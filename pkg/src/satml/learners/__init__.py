"""Multi-target learners with a common train/predict/persist surface.

Training standardizes features and targets with statistics from the learning
set, the learner fits on the standardized data, and predictions are
inverse-transformed back to the original scale.  gboost runs in local mode
(one booster per target, per-target missing-row exclusion); knn, forest and
fcnn are global (rows with any missing target are excluded).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..data import (Dataset, Scaler, dataset_digest, exclude_missing_targets,
                    impute_missing)
from ..util import TOOL_VERSION, canonical_json, sha256_bytes
from .fcnn import FCNNModel
from .forest import ForestModel
from .gboost import Booster, GBoostModel  # noqa: F401
from .knn import KNNModel

LEARNER_CLASSES = {
    "knn": KNNModel,
    "forest": ForestModel,
    "gboost": GBoostModel,
    "fcnn": FCNNModel,
}

DEFAULT_PARAMS = {
    "knn": {"k": 5, "weighting": "uniform"},
    "forest": {"n_trees": 100, "mtry": None, "min_leaf": 2,
               "max_depth": None, "bootstrap": True},
    "gboost": {"loss": "squared", "alpha": 0.5, "n_rounds": 100,
               "learning_rate": 0.1, "max_depth": 3, "min_leaf": 1},
    "fcnn": {"hidden": [64, 64], "activation": "relu", "epochs": 100,
             "batch_size": 32, "learning_rate": 1e-3},
}

FORMAT_VERSION = 1


@dataclass
class ModelSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in LEARNER_CLASSES:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        merged = dict(DEFAULT_PARAMS[self.kind])
        merged.update(self.params)
        self.params = merged

    @property
    def target_mode(self):
        return "local" if self.kind == "gboost" else "global"

    def to_dict(self):
        return {"kind": self.kind, "params": self.params, "seed": self.seed,
                "target_mode": self.target_mode}


@dataclass
class TrainedModel:
    spec: ModelSpec
    learner: object
    scaler: Scaler
    feature_names: list
    target_names: list
    categories: dict
    metafile: dict

    @property
    def is_tree_ensemble(self):
        return self.spec.kind in ("forest", "gboost")

    def trees(self):
        """All trees of a tree-ensemble model, with their target scope.

        Returns a list of (tree, target_indices): forest trees cover all
        targets, each booster's trees cover its single target.
        """
        if self.spec.kind == "forest":
            all_t = list(range(len(self.target_names)))
            return [(t, all_t) for t in self.learner.trees]
        if self.spec.kind == "gboost":
            out = []
            for j, booster in enumerate(self.learner.boosters):
                out.extend((t, [j]) for t in booster.trees)
            return out
        raise ValueError("score requires tree ensemble")


def train(dataset: Dataset, spec: ModelSpec) -> TrainedModel:
    """Fit a learner on the dataset per the spec; pure in (dataset, spec)."""
    cls = LEARNER_CLASSES[spec.kind]
    if spec.target_mode == "global":
        learn_set = exclude_missing_targets(dataset, "global")
        scaler = Scaler.fit(learn_set)
        ds = scaler.apply(impute_missing(learn_set, scaler))
        params = dict(spec.params)
        if spec.kind in ("forest", "fcnn", "knn"):
            params["seed"] = spec.seed
        learner = cls(**params).fit(ds.X, ds.Y)
    else:
        row_sets = exclude_missing_targets(dataset, "local")
        any_target = np.flatnonzero(~np.isnan(dataset.Y).all(axis=1))
        learn_set = dataset.take(any_target)
        scaler = Scaler.fit(learn_set)
        full = scaler.apply(impute_missing(dataset, scaler))
        params = dict(spec.params)
        params["seed"] = spec.seed
        learner = cls(**params)
        learner.fit(full.X, full.Y, row_sets=row_sets)
    metafile = {
        "learner": spec.to_dict(),
        "feature_names": list(dataset.feature_names),
        "target_names": list(dataset.target_names),
        "categories": dict(dataset.categories),
        "scaler": scaler.to_dict(),
        "dataset_digest": dataset_digest(dataset),
        "tool_version": TOOL_VERSION,
    }
    return TrainedModel(spec, learner, scaler, list(dataset.feature_names),
                        list(dataset.target_names), dict(dataset.categories),
                        metafile)


def predict(model: TrainedModel, X, feature_names=None) -> np.ndarray:
    """Predict on the original scale; missing features are imputed with the
    training means before standardization."""
    X = np.asarray(X, dtype=np.float64)
    if feature_names is not None:
        if list(feature_names) != model.feature_names:
            unknown = set(feature_names) - set(model.feature_names)
            if unknown:
                raise ValueError(f"unknown feature columns: {sorted(unknown)}")
            order = [list(feature_names).index(n) for n in model.feature_names]
            X = X[:, order]
    if X.shape[1] != len(model.feature_names):
        raise ValueError("feature count mismatch")
    nan = np.isnan(X)
    if nan.any():
        X = X.copy()
        X[nan] = np.broadcast_to(model.scaler.x_mean, X.shape)[nan]
    Xs = model.scaler.transform_x(X)
    Ys = model.learner.predict(Xs)
    if Ys.ndim == 1:
        Ys = Ys[:, None]
    return model.scaler.invert_y(Ys)


def predict_dataset(model: TrainedModel, dataset: Dataset) -> np.ndarray:
    if dataset.feature_names != model.feature_names:
        raise ValueError("dataset features do not match the model")
    return predict(model, dataset.X)


def model_payload(model: TrainedModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "metafile": model.metafile,
        "state": model.learner.to_dict(),
    }


def model_digest(model: TrainedModel) -> str:
    return sha256_bytes(canonical_json(model_payload(model)))


def save_model(model: TrainedModel, path) -> str:
    """Write the versioned model container; returns its content digest."""
    payload = model_payload(model)
    digest = sha256_bytes(canonical_json(payload))
    doc = {"digest": digest, **payload}
    with open(path, "wb") as f:
        f.write(canonical_json(doc))
    return digest


def load_model(path) -> TrainedModel:
    """Load and verify a model container (version and digest checked)."""
    with open(path, "rb") as f:
        doc = json.load(f)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')}")
    stored = doc.pop("digest", None)
    digest = sha256_bytes(canonical_json(doc))
    if stored != digest:
        raise ValueError("model file digest mismatch; refusing to load")
    meta = doc["metafile"]
    spec = ModelSpec(meta["learner"]["kind"], meta["learner"]["params"],
                     meta["learner"]["seed"])
    learner = LEARNER_CLASSES[spec.kind].from_dict(doc["state"])
    scaler = Scaler.from_dict(meta["scaler"])
    return TrainedModel(spec, learner, scaler, meta["feature_names"],
                        meta["target_names"], meta["categories"], meta)
