"""End-to-end run execution shared by the CLI and the HTTP service.

A run is described by one JSON config; executing it writes a fixed artifact
set (dataset, model, predictions, metrics, importance, metafile) into a
directory.  Everything is deterministic in (config, input files), so the
metafile plus input digests replay a run byte-identically.
"""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

import numpy as np

from . import evaluation, importance as imp, integral, learners, mex
from .data import Dataset, dataset_digest
from .ingest import ChannelKind, default_outlier_rules, flag_outliers, parse_channel
from .util import TOOL_VERSION, canonical_json, sha256_bytes, sha256_file

MEX_CHANNELS = {"saa": ChannelKind.SAA, "dmop": ChannelKind.DMOP,
                "ftl": ChannelKind.FTL, "evt": ChannelKind.EVT,
                "lt": ChannelKind.LT, "pw": ChannelKind.PW}
INTEGRAL_CHANNELS = {"orbit": ChannelKind.ORBIT, "irem": ChannelKind.IREM,
                     "eclipse": ChannelKind.ECLIPSE}

ARTIFACT_NAMES = ("dataset", "categories", "model", "predictions", "metrics",
                  "importance", "metafile")


class ConfigError(ValueError):
    """Invalid run configuration; carries field-level messages."""

    def __init__(self, errors):
        super().__init__("; ".join(f"{f}: {m}" for f, m in errors))
        self.errors = list(errors)


def normalize_config(config: dict) -> dict:
    """Fill defaults and validate; raises ConfigError with field messages."""
    cfg = copy.deepcopy(config)
    errors = []
    spacecraft = cfg.get("spacecraft")
    if spacecraft not in ("mex", "integral"):
        errors.append(("spacecraft", f"must be 'mex' or 'integral', got {spacecraft!r}"))
    inputs = cfg.get("inputs") or {}
    if spacecraft == "mex":
        missing = [k for k in MEX_CHANNELS if k not in inputs]
        if missing:
            errors.append(("inputs", f"missing channels: {missing}"))
    elif spacecraft == "integral":
        for k in ("orbit", "irem"):
            if k not in inputs:
                errors.append(("inputs", f"missing channel: {k}"))
    gran = cfg.setdefault("granularity_min", 15.0)
    if not isinstance(gran, (int, float)) or gran <= 0:
        errors.append(("granularity_min", "must be a positive number"))
    cfg.setdefault("cleansing", "impute_mean")
    if cfg["cleansing"] not in ("impute_mean", "drop_rows"):
        errors.append(("cleansing", f"unknown policy {cfg['cleansing']!r}"))

    fs = cfg.setdefault("feature_spec", {})
    fs.setdefault("dmop_decay_halflife_min", 120.0)
    fs.setdefault("include_categories", ["SAA", "DMOP", "FTL", "EVT", "LT"])
    fs.setdefault("history_depth", 0)

    cfg.setdefault("representation", "per-rev")
    if cfg["representation"] not in ("per-rev", "positional"):
        errors.append(("representation", f"unknown {cfg['representation']!r}"))
    cfg.setdefault("bin_width_min", 15.0)
    cfg.setdefault("threshold", 600.0)
    cfg.setdefault("target_variant", "phase")
    cfg.setdefault("task", "regression")
    hist = cfg.setdefault("history", {})
    hist.setdefault("n", 0)
    hist.setdefault("m", 0)

    learner = cfg.setdefault("learner", {})
    kind = learner.setdefault("kind", "forest")
    if kind not in learners.LEARNER_CLASSES:
        errors.append(("learner.kind", f"unknown learner kind {kind!r}"))
    else:
        params = dict(learners.DEFAULT_PARAMS[kind])
        params.update(learner.get("params") or {})
        learner["params"] = params
    learner.setdefault("seed", 0)

    sp = cfg.setdefault("split", {})
    sp.setdefault("kind", "holdout")
    sp.setdefault("fraction", 0.8)
    sp.setdefault("shuffled", False)
    if sp["kind"] != "holdout":
        errors.append(("split.kind", "runs use temporal holdout"))
    elif not 0 < sp["fraction"] < 1:
        errors.append(("split.fraction", "must be in (0, 1)"))

    impc = cfg.setdefault("importance", {})
    impc.setdefault("kinds", None)  # resolved per model kind at run time
    impc.setdefault("repeats", 10)
    impc.setdefault("top_k", 10)

    exc = cfg.setdefault("exclude", {})
    exc.setdefault("excluded_features", [])
    exc.setdefault("excluded_intervals", [])
    exc.setdefault("base_run", "")

    if errors:
        raise ConfigError(errors)
    return cfg


def check_inputs_exist(cfg: dict):
    errors = []
    for name, path in (cfg.get("inputs") or {}).items():
        if not os.path.exists(path):
            errors.append((f"inputs.{name}", f"file not found: {path}"))
    if errors:
        raise ConfigError(errors)


def _load_tables(cfg):
    spacecraft = cfg["spacecraft"]
    channels = MEX_CHANNELS if spacecraft == "mex" else INTEGRAL_CHANNELS
    tables, digests, reports = {}, {}, {}
    for name, kind in channels.items():
        path = cfg["inputs"].get(name)
        if path is None:
            continue
        with open(path, "rb") as f:
            raw = f.read()
        digests[name] = sha256_bytes(raw)
        table, report = parse_channel(kind, raw, source_name=str(path))
        for rule in default_outlier_rules(kind, table.column_names):
            table, n_flagged = flag_outliers(table, rule)
            report.outliers_flagged += n_flagged
        tables[name] = table
        reports[name] = report
    return tables, digests, reports


def build_dataset(cfg, tables) -> Dataset:
    if cfg["spacecraft"] == "mex":
        spec = mex.FeatureSpec(
            dmop_decay_halflife_min=cfg["feature_spec"]["dmop_decay_halflife_min"],
            include_categories=tuple(cfg["feature_spec"]["include_categories"]),
            history_depth=cfg["feature_spec"]["history_depth"])
        return mex.build_mex_dataset(list(tables.values()),
                                     cfg["granularity_min"], spec,
                                     cfg["cleansing"])
    ds = integral.build_integral_dataset(
        tables["orbit"], tables["irem"], tables.get("eclipse"),
        representation=cfg["representation"],
        bin_width_min=cfg["bin_width_min"], threshold=cfg["threshold"],
        target_variant=cfg["target_variant"], task=cfg["task"],
        history_n=cfg["history"]["n"], history_m=cfg["history"]["m"])
    if cfg["cleansing"] == "drop_rows":
        keep = ~np.isnan(ds.X).any(axis=1)
        ds = ds.take(np.flatnonzero(keep))
    return ds


def _importance_kinds(cfg, model):
    kinds = cfg["importance"]["kinds"]
    if kinds is None:
        kinds = ["permutation"]
        if model.is_tree_ensemble:
            kinds += ["genie3", "symbolic"]
    return kinds


def execute_run(config: dict, out_dir) -> dict:
    """Run preprocess -> train -> evaluate -> importance; write artifacts.

    Returns a summary with artifact digests and headline metrics.
    """
    cfg = normalize_config(config)
    check_inputs_exist(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    tables, input_digests, parse_reports = _load_tables(cfg)
    dataset = build_dataset(cfg, tables)

    wspec = evaluation.WhatIfSpec(cfg["exclude"]["excluded_features"],
                                  cfg["exclude"]["excluded_intervals"],
                                  cfg["exclude"]["base_run"])
    dataset = evaluation.apply_exclusions(dataset, wspec)

    ds_bytes = dataset.to_csv()
    (out / "dataset.csv").write_bytes(ds_bytes)
    (out / "categories.json").write_bytes(canonical_json(dataset.categories))

    train_ds, test_ds = evaluation.split(
        dataset, "holdout", cfg["split"]["fraction"],
        shuffled=cfg["split"]["shuffled"], seed=cfg["learner"]["seed"])

    spec = learners.ModelSpec(cfg["learner"]["kind"],
                              cfg["learner"]["params"],
                              cfg["learner"]["seed"])
    model = learners.train(train_ds, spec)
    model_digest = learners.save_model(model, out / "model.json")

    pred = learners.predict_dataset(model, test_ds)
    _write_predictions(out / "predictions.csv", test_ds, pred)

    metrics = evaluation.evaluate(model, test_ds).to_dict()
    (out / "metrics.json").write_bytes(canonical_json(metrics))

    reports = {}
    for kind in _importance_kinds(cfg, model):
        rep = imp.compute_importance(kind, model, dataset,
                                     repeats=cfg["importance"]["repeats"],
                                     seed=cfg["learner"]["seed"])
        reports[kind] = {
            **rep.to_dict(),
            "summary": imp.summarize(rep, dataset.categories,
                                     cfg["importance"]["top_k"]),
        }
    (out / "importance.json").write_bytes(canonical_json(reports))

    metafile = {
        "config": cfg,
        "inputs_sha256": input_digests,
        "parse_reports": {
            name: {"accepted": r.accepted, "rejected": r.rejected,
                   "outliers_flagged": r.outliers_flagged}
            for name, r in parse_reports.items()},
        "dataset_digest": dataset_digest(dataset),
        "model_digest": model_digest,
        "scaler": model.scaler.to_dict(),
        "tool_version": TOOL_VERSION,
    }
    meta_bytes = canonical_json(metafile)
    (out / "metafile.json").write_bytes(meta_bytes)

    return {
        "config": cfg,
        "metrics": metrics,
        "dataset_digest": metafile["dataset_digest"],
        "model_digest": model_digest,
        "metafile_sha256": sha256_bytes(meta_bytes),
        "artifacts": {
            "dataset": str(out / "dataset.csv"),
            "categories": str(out / "categories.json"),
            "model": str(out / "model.json"),
            "predictions": str(out / "predictions.csv"),
            "metrics": str(out / "metrics.json"),
            "importance": str(out / "importance.json"),
            "metafile": str(out / "metafile.json"),
        },
    }


def _write_predictions(path, dataset: Dataset, pred: np.ndarray):
    """CSV: ut_ms, predicted and (when present) true value per target."""
    lines = ["ut_ms," + ",".join(
        [f"pred_{t}" for t in dataset.target_names]
        + [f"true_{t}" for t in dataset.target_names])]
    t_idx = dataset.time_index if dataset.time_index is not None \
        else np.zeros(dataset.n_rows, dtype=np.int64)
    for i in range(dataset.n_rows):
        row = [str(int(t_idx[i]))]
        row += [repr(float(v)) for v in pred[i]]
        row += ["" if np.isnan(v) else repr(float(v)) for v in dataset.Y[i]]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_run_dataset(run_dir) -> Dataset:
    """Rehydrate the dataset artifact of a completed run."""
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "metafile.json").read_text())
    targets = meta["scaler"]["target_names"]
    cats = json.loads((run_dir / "categories.json").read_text())
    return Dataset.from_csv((run_dir / "dataset.csv").read_bytes(), targets,
                            cats)
