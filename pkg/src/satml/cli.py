"""Command-line access to every pipeline stage.

The `--config file` form is canonical (the service executes the same config
schema, so the two paths produce identical artifacts); flags are overrides
for the common fields.  Exit codes: 0 success, 1 pipeline failure, 2 usage
error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import evaluation, importance as imp, learners
from .data import Dataset, dataset_digest
from .runs import ConfigError, execute_run, normalize_config
from .util import TOOL_VERSION, canonical_json


def _fail(message, code=1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_dataset_dir(path) -> Dataset:
    path = Path(path)
    csv = path / "dataset.csv" if path.is_dir() else path
    meta_path = csv.parent / "metafile.json"
    if not meta_path.exists():
        _fail(f"no metafile.json next to {csv}")
    meta = json.loads(meta_path.read_text())
    targets = meta.get("target_names") or meta["scaler"]["target_names"]
    cats_path = csv.parent / "categories.json"
    cats = json.loads(cats_path.read_text()) if cats_path.exists() else {}
    return Dataset.from_csv(csv.read_bytes(), targets, cats)


def _write_dataset(ds: Dataset, out_dir, meta_extra):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dataset.csv").write_bytes(ds.to_csv())
    (out / "categories.json").write_bytes(canonical_json(ds.categories))
    meta = {"target_names": list(ds.target_names),
            "dataset_digest": dataset_digest(ds),
            "tool_version": TOOL_VERSION, **meta_extra}
    (out / "metafile.json").write_bytes(canonical_json(meta))
    click.echo(f"dataset: {out / 'dataset.csv'} "
               f"({ds.n_rows} rows, {ds.n_features} features, "
               f"{ds.n_targets} targets)")
    click.echo(f"dataset digest: {meta['dataset_digest']}")


@click.group()
@click.version_option(TOOL_VERSION)
def main():
    """Spacecraft telemetry analysis workbench."""


@main.command("preprocess-mex")
@click.option("--saa", required=True, type=click.Path(exists=True))
@click.option("--dmop", required=True, type=click.Path(exists=True))
@click.option("--ftl", required=True, type=click.Path(exists=True))
@click.option("--evt", required=True, type=click.Path(exists=True))
@click.option("--lt", required=True, type=click.Path(exists=True))
@click.option("--pw", required=True, type=click.Path(exists=True))
@click.option("--granularity", default=15.0, show_default=True)
@click.option("--halflife", default=120.0, show_default=True,
              help="DMOP command-energy decay half-life, minutes.")
@click.option("--history", default=0, show_default=True,
              help="Target-lag history depth.")
@click.option("--cleansing", default="impute_mean", show_default=True,
              type=click.Choice(["impute_mean", "drop_rows"]))
@click.option("--out", required=True, type=click.Path())
def preprocess_mex(saa, dmop, ftl, evt, lt, pw, granularity, halflife,
                   history, cleansing, out):
    """Build the aligned thermal-power dataset from the six MEX channels."""
    from .runs import _load_tables

    cfg = {
        "spacecraft": "mex",
        "inputs": {"saa": saa, "dmop": dmop, "ftl": ftl, "evt": evt,
                   "lt": lt, "pw": pw},
        "granularity_min": granularity,
        "feature_spec": {
            "dmop_decay_halflife_min": halflife,
            "include_categories": ["SAA", "DMOP", "FTL", "EVT", "LT"]
            + (["HIST"] if history else []),
            "history_depth": history},
        "cleansing": cleansing,
    }
    try:
        cfg = normalize_config(cfg)
        tables, digests, _ = _load_tables(cfg)
        from .runs import build_dataset

        ds = build_dataset(cfg, tables)
    except (ConfigError, ValueError) as exc:
        _fail(exc)
    _write_dataset(ds, out, {"config": cfg, "inputs_sha256": digests})


@main.command("preprocess-integral")
@click.option("--orbit", required=True, type=click.Path(exists=True))
@click.option("--irem", required=True, type=click.Path(exists=True))
@click.option("--eclipse", type=click.Path(exists=True))
@click.option("--rep", default="per-rev", show_default=True,
              type=click.Choice(["per-rev", "positional"]))
@click.option("--bin-width", default=15.0, show_default=True)
@click.option("--threshold", default=600.0, show_default=True)
@click.option("--target-variant", default="phase", show_default=True,
              type=click.Choice(["phase", "altitude"]))
@click.option("--task", default="regression", show_default=True,
              type=click.Choice(["regression", "classification"]))
@click.option("--history-n", default=0, show_default=True)
@click.option("--history-m", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def preprocess_integral(orbit, irem, eclipse, rep, bin_width, threshold,
                        target_variant, task, history_n, history_m, out):
    """Build the belt-crossing dataset in either representation."""
    from .runs import _load_tables, build_dataset

    inputs = {"orbit": orbit, "irem": irem}
    if eclipse:
        inputs["eclipse"] = eclipse
    cfg = {
        "spacecraft": "integral", "inputs": inputs,
        "representation": rep, "bin_width_min": bin_width,
        "threshold": threshold, "target_variant": target_variant,
        "task": task, "history": {"n": history_n, "m": history_m},
    }
    try:
        cfg = normalize_config(cfg)
        tables, digests, _ = _load_tables(cfg)
        ds = build_dataset(cfg, tables)
    except (ConfigError, ValueError) as exc:
        _fail(exc)
    _write_dataset(ds, out, {"config": cfg, "inputs_sha256": digests,
                             "representation": rep})


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="Full run config; executes the end-to-end pipeline.")
@click.option("--dataset", "dataset_path", type=click.Path(exists=True),
              help="Preprocessed dataset directory (or its dataset.csv).")
@click.option("--learner", default="forest", show_default=True,
              type=click.Choice(sorted(learners.LEARNER_CLASSES)))
@click.option("--params", default="{}",
              help="Learner hyperparameter overrides as JSON.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def train(config_path, dataset_path, learner, params, seed, out):
    """Train a model; with --config this runs the complete pipeline."""
    out_dir = Path(out)
    try:
        if config_path:
            cfg = json.loads(Path(config_path).read_text())
            summary = execute_run(cfg, out_dir)
            (out_dir / "summary.json").write_bytes(canonical_json(summary))
            click.echo(f"model digest: {summary['model_digest']}")
            click.echo(f"metafile: {out_dir / 'metafile.json'}")
            return
        if not dataset_path:
            raise click.UsageError("provide --config or --dataset")
        ds = _load_dataset_dir(dataset_path)
        spec = learners.ModelSpec(learner, json.loads(params), seed)
        model = learners.train(ds, spec)
        out_dir.mkdir(parents=True, exist_ok=True)
        digest = learners.save_model(model, out_dir / "model.json")
        (out_dir / "metafile.json").write_bytes(canonical_json(model.metafile))
        click.echo(f"model digest: {digest}")
    except click.UsageError:
        raise
    except (ConfigError, ValueError) as exc:
        _fail(exc)


@main.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def predict(model_path, dataset_path, out):
    """Predict on a preprocessed dataset; writes a predictions CSV."""
    try:
        model = learners.load_model(model_path)
        ds = _load_dataset_dir(dataset_path)
        pred = learners.predict_dataset(model, ds)
    except ValueError as exc:
        _fail(exc)
    from .runs import _write_predictions

    Path(out).parent.mkdir(parents=True, exist_ok=True)
    _write_predictions(out, ds, pred)
    click.echo(f"predictions: {out}")


@main.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", type=click.Path())
def evaluate(model_path, dataset_path, out):
    """Masked RMSE/MAE per target on a preprocessed dataset."""
    try:
        model = learners.load_model(model_path)
        ds = _load_dataset_dir(dataset_path)
        report = evaluation.evaluate(model, ds).to_dict()
    except ValueError as exc:
        _fail(exc)
    payload = canonical_json(report)
    if out:
        Path(out).write_bytes(payload)
    click.echo(payload.decode())


@main.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True))
@click.option("--score", default="permutation", show_default=True,
              type=click.Choice(list(imp.SCORE_KINDS)))
@click.option("--repeats", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--top-k", default=10, show_default=True)
@click.option("--out", type=click.Path())
def importance(model_path, dataset_path, score, repeats, seed, top_k, out):
    """Feature-ranking scores with category roll-up and top-k list."""
    try:
        model = learners.load_model(model_path)
        ds = _load_dataset_dir(dataset_path)
        report = imp.compute_importance(score, model, ds, repeats=repeats,
                                        seed=seed)
        doc = {**report.to_dict(),
               "summary": imp.summarize(report, ds.categories, top_k)}
    except ValueError as exc:
        _fail(exc)
    payload = canonical_json(doc)
    if out:
        Path(out).write_bytes(payload)
    click.echo(payload.decode())


@main.command()
@click.option("--base", "base_dir", required=True,
              type=click.Path(exists=True),
              help="Artifact directory of the base run (holds metafile.json).")
@click.option("--exclude-feature", "features", multiple=True)
@click.option("--exclude-interval", "intervals", multiple=True,
              help="from_ms:to_ms, may repeat.")
@click.option("--out", required=True, type=click.Path())
def whatif(base_dir, features, intervals, out):
    """Re-run the base pipeline with exclusions and diff the metrics."""
    base = Path(base_dir)
    try:
        meta = json.loads((base / "metafile.json").read_text())
        base_cfg = meta["config"]
        parsed = []
        for spec in intervals:
            lo, hi = spec.split(":")
            parsed.append((int(lo), int(hi)))
        base_summary = {
            "metrics": json.loads((base / "metrics.json").read_text()),
            "model_digest": meta.get("model_digest"),
            "dataset_digest": meta.get("dataset_digest"),
        }
        wspec = evaluation.WhatIfSpec(list(features), parsed, str(base))
        report = evaluation.run_whatif(base_cfg, wspec, out, base_summary)
    except (ConfigError, ValueError, KeyError, FileNotFoundError) as exc:
        _fail(exc)
    (Path(out) / "comparison.json").write_bytes(canonical_json(report))
    click.echo(f"comparison: {Path(out) / 'comparison.json'}")


@main.command()
@click.option("--store", required=True, type=click.Path(),
              help="Run-store root directory.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True)
def serve(store, host, port):
    """Serve the run-store HTTP API (consumed by the browser workbench)."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(store), host=host, port=port)


if __name__ == "__main__":
    main()
