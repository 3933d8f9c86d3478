"""Disk-backed run store and the HTTP API that serves it.

Layout: one directory per run under the store root, holding `record.json`
(state machine: queued -> running -> done | failed) and an `artifacts/`
directory written by the executor.  Completed artifacts are immutable, so
reads need no locking; record updates go through a single lock plus an
atomic rename.  Jobs run on one background worker thread, so the API never
blocks on training.
"""

from __future__ import annotations

import json
import queue
import threading
import time
import uuid
from pathlib import Path

import numpy as np

from . import importance as imp, learners
from .data import Dataset
from .runs import ARTIFACT_NAMES, ConfigError, check_inputs_exist, execute_run, \
    load_run_dataset, normalize_config
from .util import canonical_json

SCHEMA_VERSION = 1


def eda_summary(dataset: Dataset, variables, t_from=None, t_to=None, bins=20):
    """Histogram and boxplot statistics per variable over a time range.

    Quartiles use linear interpolation of order statistics; whiskers extend
    to the last value within 1.5 * IQR of the box, values beyond are listed
    as outliers.
    """
    names = list(dataset.feature_names) + list(dataset.target_names)
    for v in variables:
        if v not in names:
            raise ValueError(f"unknown variable {v!r}")
    t = dataset.time_index
    keep = np.ones(dataset.n_rows, dtype=bool)
    if t is not None:
        if t_from is not None:
            keep &= t >= t_from
        if t_to is not None:
            keep &= t < t_to
    if not keep.any():
        raise ValueError("time range selects no rows")
    grid = np.hstack([dataset.X, dataset.Y])[keep]
    out = {}
    for v in variables:
        col = grid[:, names.index(v)]
        col = col[~np.isnan(col)]
        if col.size == 0:
            out[v] = {"count": 0, "histogram": None, "boxplot": None}
            continue
        counts, edges = np.histogram(col, bins=bins)
        q1, med, q3 = np.quantile(col, [0.25, 0.5, 0.75])
        iqr = q3 - q1
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = col[(col >= lo_fence) & (col <= hi_fence)]
        outliers = col[(col < lo_fence) | (col > hi_fence)]
        out[v] = {
            "count": int(col.size),
            "histogram": {"bin_edges": edges.tolist(),
                          "counts": counts.tolist()},
            "boxplot": {"min": float(inside.min()), "q1": float(q1),
                        "median": float(med), "q3": float(q3),
                        "max": float(inside.max()),
                        "outliers": sorted(float(x) for x in outliers)},
        }
    return {"schema_version": SCHEMA_VERSION, "variables": out}


class RunStore:
    """Directory-per-run persistence with a single background worker."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._queue = queue.Queue()
        self._worker = threading.Thread(target=self._work, daemon=True)
        self._worker.start()

    # -- record handling ---------------------------------------------------
    def _record_path(self, run_id):
        return self.root / run_id / "record.json"

    def _write_record(self, record):
        path = self._record_path(record["run_id"])
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(canonical_json(record))
        tmp.replace(path)

    def get_run(self, run_id) -> dict:
        path = self._record_path(run_id)
        if not path.exists():
            raise KeyError(run_id)
        return json.loads(path.read_text())

    def list_runs(self):
        out = []
        for p in sorted(self.root.iterdir()):
            if (p / "record.json").exists():
                out.append(json.loads((p / "record.json").read_text()))
        out.sort(key=lambda r: r.get("created", 0))
        return out

    # -- submission --------------------------------------------------------
    def submit_run(self, config: dict, parent: str = None) -> str:
        """Validate synchronously, queue asynchronously; returns the run id."""
        cfg = normalize_config(config)
        check_inputs_exist(cfg)
        run_id = uuid.uuid4().hex[:12]
        record = {
            "run_id": run_id,
            "state": "queued",
            "config": cfg,
            "parent": parent,
            "error": None,
            "summary": None,
            "created": time.time(),
            "started": None,
            "finished": None,
        }
        with self._lock:
            self._write_record(record)
        self._queue.put(run_id)
        return run_id

    def submit_whatif(self, base_run_id: str, exclude: dict) -> str:
        """Child run: clone the base config, apply the exclusions, keep the
        base seed so deltas are attributable to the exclusions alone."""
        base = self.get_run(base_run_id)
        if base["state"] != "done":
            raise ValueError("base run is not done")
        cfg = json.loads(json.dumps(base["config"]))
        exc = cfg.setdefault("exclude", {})
        exc["excluded_features"] = sorted(
            set(exc.get("excluded_features", []))
            | set(exclude.get("excluded_features", [])))
        exc["excluded_intervals"] = (list(exc.get("excluded_intervals", []))
                                     + list(exclude.get("excluded_intervals", [])))
        exc["base_run"] = ""  # lineage tracked via the record's parent field
        return self.submit_run(cfg, parent=base_run_id)

    # -- worker ------------------------------------------------------------
    def _work(self):
        while True:
            run_id = self._queue.get()
            if run_id is None:
                return
            self._execute(run_id)

    def _execute(self, run_id):
        with self._lock:
            record = self.get_run(run_id)
            record["state"] = "running"
            record["started"] = time.time()
            self._write_record(record)
        try:
            summary = execute_run(record["config"],
                                  self.root / run_id / "artifacts")
            record["state"] = "done"
            record["summary"] = summary
        except Exception as exc:  # failure is a terminal state, not a crash
            record["state"] = "failed"
            record["error"] = str(exc)
        record["finished"] = time.time()
        with self._lock:
            self._write_record(record)

    def wait(self, run_id, timeout=300.0):
        deadline = time.time() + timeout
        while time.time() < deadline:
            record = self.get_run(run_id)
            if record["state"] in ("done", "failed"):
                return record
            time.sleep(0.05)
        raise TimeoutError(f"run {run_id} still {record['state']}")

    def close(self):
        self._queue.put(None)

    # -- artifacts ---------------------------------------------------------
    def artifact_path(self, run_id, kind) -> Path:
        if kind not in ARTIFACT_NAMES:
            raise ValueError(f"unknown artifact kind {kind!r}")
        record = self.get_run(run_id)
        if record["state"] == "failed":
            raise RuntimeError(f"run failed: {record['error']}")
        if record["state"] != "done":
            raise RuntimeError("run not finished")
        ext = "csv" if kind in ("dataset", "predictions") else "json"
        path = self.root / run_id / "artifacts" / f"{kind}.{ext}"
        if not path.exists():
            raise KeyError(kind)
        return path

    def run_dir(self, run_id) -> Path:
        return self.root / run_id / "artifacts"


def predictions_view(store: RunStore, run_id, lines=None, cumulative=False,
                     t_from=None, t_to=None):
    """Per-line predicted series, optional cumulative sum over the selected
    lines, absolute error per point when truth exists."""
    path = store.artifact_path(run_id, "predictions")
    rows = path.read_text().splitlines()
    header = rows[0].split(",")
    targets = [h[len("pred_"):] for h in header if h.startswith("pred_")]
    sel = list(lines) if lines else targets
    unknown = set(sel) - set(targets)
    if unknown:
        raise ValueError(f"unknown target names: {sorted(unknown)}")
    t_col, pred_cols, true_cols = [], {t: [] for t in sel}, {t: [] for t in sel}
    for row in rows[1:]:
        if not row:
            continue
        parts = row.split(",")
        ts = int(parts[0])
        if t_from is not None and ts < t_from:
            continue
        if t_to is not None and ts >= t_to:
            continue
        t_col.append(ts)
        for t in sel:
            pred_cols[t].append(float(parts[header.index(f"pred_{t}")]))
            raw = parts[header.index(f"true_{t}")]
            true_cols[t].append(float(raw) if raw != "" else None)
    series = []
    for t in sel:
        truth = true_cols[t]
        has_truth = any(v is not None for v in truth)
        entry = {"target": t, "t": t_col, "predicted": pred_cols[t]}
        if has_truth:
            entry["true"] = truth
            entry["abs_error"] = [
                None if v is None else abs(p - v)
                for p, v in zip(pred_cols[t], truth)]
        series.append(entry)
    payload = {"schema_version": SCHEMA_VERSION, "run_id": run_id,
               "cumulative": bool(cumulative), "series": series}
    if cumulative:
        total = [sum(pred_cols[t][i] for t in sel) for i in range(len(t_col))]
        payload["cumulative_series"] = {"t": t_col, "predicted": total}
    return payload


def _doughnut(scores, categories):
    per_cat = {}
    for f, s in scores.items():
        per_cat[categories[f]] = per_cat.get(categories[f], 0.0) + max(s, 0.0)
    total = sum(per_cat.values())
    segments = []
    for cat in sorted(per_cat):
        frac = per_cat[cat] / total if total > 0 else 1.0 / len(per_cat)
        segments.append({"category": cat, "score": per_cat[cat],
                         "fraction": frac})
    return segments


def importance_view(store: RunStore, run_id, score="permutation",
                    t_from=None, t_to=None, selector=None, top_k=10):
    """Chart payloads for the importance diagrams.

    Full interval: served from the stored report.  A narrowed interval
    triggers subset-scoped recomputation against the stored model and
    dataset.  `selector` limits top-k lists to one target.
    """
    record = store.get_run(run_id)
    if record["state"] != "done":
        raise RuntimeError("run not finished")
    run_dir = store.run_dir(run_id)
    stored = json.loads((run_dir / "importance.json").read_text())
    model_kind = record["config"]["learner"]["kind"]
    if score in ("genie3", "symbolic") and model_kind not in ("forest", "gboost"):
        raise ValueError(f"score {score!r} requires a tree-ensemble model")

    if t_from is None and t_to is None and score in stored:
        report = imp.ImportanceReport.from_dict(stored[score])
    else:
        dataset = load_run_dataset(run_dir)
        model = learners.load_model(run_dir / "model.json")
        subset = None
        if t_from is not None or t_to is not None:
            t = dataset.time_index
            mask = np.ones(dataset.n_rows, dtype=bool)
            if t_from is not None:
                mask &= t >= t_from
            if t_to is not None:
                mask &= t < t_to
            subset = mask
        repeats = record["config"]["importance"]["repeats"]
        report = imp.compute_importance(score, model, dataset, subset=subset,
                                        repeats=repeats,
                                        seed=record["config"]["learner"]["seed"])

    cats = report.categories
    summary = imp.summarize(report, cats, top_k)
    doughnuts = [{"name": "aggregate", "segments": _doughnut(report.aggregate, cats)}]
    for target, scores in report.per_target.items():
        doughnuts.append({"name": target, "segments": _doughnut(scores, cats)})
    top = summary["top_features"]
    if selector and selector in top["per_target"]:
        top = {"aggregate": top["aggregate"],
               "per_target": {selector: top["per_target"][selector]}}
    pies = {}
    source = (report.per_target.get(selector, report.aggregate)
              if selector else report.aggregate)
    for f, s in source.items():
        pies.setdefault(cats[f], []).append({"feature": f, "score": s})
    for cat in pies:
        pies[cat].sort(key=lambda e: (-e["score"], e["feature"]))
    return {"schema_version": SCHEMA_VERSION, "run_id": run_id,
            "score": report.score_kind, "subset": report.subset,
            "doughnuts": doughnuts, "top_features": top,
            "category_pies": pies,
            "category_rollup": summary["category_rollup"]}


def create_app(store_root):
    """FastAPI application over a RunStore."""
    from fastapi import FastAPI, HTTPException, Query, Response

    store = RunStore(store_root)
    app = FastAPI(title="telemetry-workbench runstore")
    app.state.store = store

    def _get_or_404(run_id):
        try:
            return store.get_run(run_id)
        except KeyError:
            raise HTTPException(404, f"unknown run {run_id!r}")

    @app.get("/health")
    def health():
        return {"schema_version": SCHEMA_VERSION, "status": "ok"}

    @app.post("/runs", status_code=201)
    def submit(body: dict):
        try:
            if "base_run" in body:
                run_id = store.submit_whatif(body["base_run"],
                                             body.get("exclude", {}))
            else:
                run_id = store.submit_run(body.get("config", body))
        except ConfigError as exc:
            raise HTTPException(400, detail={"errors": [
                {"field": f, "message": m} for f, m in exc.errors]})
        except (KeyError, ValueError) as exc:
            raise HTTPException(400, detail=str(exc))
        return {"schema_version": SCHEMA_VERSION, "run_id": run_id}

    @app.get("/runs")
    def list_runs():
        return {"schema_version": SCHEMA_VERSION, "runs": store.list_runs()}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return {"schema_version": SCHEMA_VERSION, "run": _get_or_404(run_id)}

    @app.get("/runs/{run_id}/artifacts/{kind}")
    def artifact(run_id: str, kind: str):
        _get_or_404(run_id)
        try:
            path = store.artifact_path(run_id, kind)
        except ValueError as exc:
            raise HTTPException(404, str(exc))
        except (RuntimeError, KeyError) as exc:
            raise HTTPException(409, str(exc))
        media = "text/csv" if path.suffix == ".csv" else "application/json"
        return Response(path.read_bytes(), media_type=media)

    @app.post("/eda")
    def eda(body: dict):
        run_id = body.get("run_id")
        record = _get_or_404(run_id)
        if record["state"] != "done":
            raise HTTPException(409, "run not finished")
        dataset = load_run_dataset(store.run_dir(run_id))
        try:
            return eda_summary(dataset, body.get("variables", []),
                               body.get("from"), body.get("to"),
                               int(body.get("bins", 20)))
        except ValueError as exc:
            raise HTTPException(400, str(exc))

    @app.get("/runs/{run_id}/predictions")
    def predictions(run_id: str, lines: str = Query(None),
                    cumulative: bool = False,
                    from_ms: int = Query(None, alias="from"),
                    to_ms: int = Query(None, alias="to")):
        _get_or_404(run_id)
        sel = lines.split(",") if lines else None
        try:
            return predictions_view(store, run_id, sel, cumulative,
                                    from_ms, to_ms)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        except (RuntimeError, KeyError) as exc:
            raise HTTPException(409, str(exc))

    @app.get("/runs/{run_id}/importance")
    def importance(run_id: str, score: str = "permutation",
                   from_ms: int = Query(None, alias="from"),
                   to_ms: int = Query(None, alias="to"),
                   selector: str = Query(None), top_k: int = 10):
        _get_or_404(run_id)
        try:
            return importance_view(store, run_id, score, from_ms, to_ms,
                                   selector, top_k)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        except RuntimeError as exc:
            raise HTTPException(409, str(exc))

    return app
