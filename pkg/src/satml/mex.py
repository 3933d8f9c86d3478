"""Thermal-power pipeline: align the six telemetry channels onto a regular
time grid, engineer category-tagged features, aggregate the 33 power-line
currents into per-bin mean targets, cleanse, and emit a reproducibility
metafile.

Feature categories (one per source channel plus HIST for target lags):
  SAA  - per-bin mean of each solar aspect angle
  DMOP - per-subsystem command counts and exponentially decayed command
         energy (evaluated at bin end, so no future data is read)
  FTL  - fraction of the bin covered by each pointing type
  EVT  - fraction of the bin spent in umbra
  LT   - long-term quantities linearly interpolated at the bin center
  HIST - lagged copies of the targets from strictly earlier bins
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .ingest import ChannelKind, RawTable
from .util import TOOL_VERSION, canonical_json

MS_PER_MIN = 60_000

CATEGORIES = ("SAA", "DMOP", "FTL", "EVT", "LT", "HIST")


@dataclass
class FeatureSpec:
    dmop_decay_halflife_min: float = 120.0
    include_categories: tuple = ("SAA", "DMOP", "FTL", "EVT", "LT")
    history_depth: int = 0

    def __post_init__(self):
        if self.dmop_decay_halflife_min <= 0:
            raise ValueError("halflife must be positive")
        if self.history_depth < 0:
            raise ValueError("history_depth must be >= 0")
        for cat in self.include_categories:
            if cat not in CATEGORIES:
                raise ValueError(f"unknown feature category {cat!r}")

    def to_dict(self):
        return {
            "dmop_decay_halflife_min": self.dmop_decay_halflife_min,
            "include_categories": list(self.include_categories),
            "history_depth": self.history_depth,
        }


@dataclass
class AlignedFrame:
    t0: int  # ms-UTC, start of bin 0
    granularity_min: float
    columns: dict  # name -> float64 array, one value per bin
    missing_mask: dict = field(default_factory=dict)  # name -> bool array

    @property
    def n_bins(self):
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    @property
    def width_ms(self):
        return int(round(self.granularity_min * MS_PER_MIN))

    def bin_centers(self):
        return self.t0 + self.width_ms * np.arange(self.n_bins, dtype=np.int64) \
            + self.width_ms // 2

    def bin_edges(self):
        return self.t0 + self.width_ms * np.arange(self.n_bins + 1, dtype=np.int64)


def bin_aggregate(timestamps, values, t0, width_ms, n_bins, how="mean"):
    """Aggregate irregular samples into grid bins; empty bins give NaN."""
    out = np.full(n_bins, np.nan)
    idx = (np.asarray(timestamps, dtype=np.int64) - t0) // width_ms
    ok = (idx >= 0) & (idx < n_bins)
    idx = idx[ok]
    vals = np.asarray(values, dtype=np.float64)[ok]
    if idx.size == 0:
        return out
    order = np.argsort(idx, kind="stable")
    idx, vals = idx[order], vals[order]
    bounds = np.flatnonzero(np.diff(idx)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [idx.size]])
    fn = {"mean": np.mean, "median": np.median, "sum": np.sum,
          "min": np.min, "max": np.max}[how]
    for s, e in zip(starts, ends):
        out[idx[s]] = fn(vals[s:e])
    return out


def _grid(tables, granularity_min):
    width = int(round(granularity_min * MS_PER_MIN))
    lo, hi = None, None
    for t in tables:
        if t.n_rows == 0:
            continue
        ts = t.timestamps
        tlo, thi = int(ts.min()), int(ts.max())
        if t.kind is ChannelKind.FTL:
            # interval ends are exclusive, so the last covered instant is e-1
            thi = max(thi, int(t.columns["ute_ms"].max()) - 1)
        lo = tlo if lo is None else min(lo, tlo)
        hi = thi if hi is None else max(hi, thi)
    if lo is None or hi <= lo:
        raise ValueError("zero-span time range")
    t0 = (lo // width) * width
    n_bins = int((hi - t0) // width) + 1
    return t0, width, n_bins


def align(tables, granularity_min, aggregators=None) -> AlignedFrame:
    """Put the numeric columns of the given tables onto one regular grid.

    Outlier-flagged rows are excluded.  Default per-column aggregator is the
    mean; override per column via `aggregators` (name -> rule).
    """
    if not tables:
        raise ValueError("empty table list")
    if granularity_min <= 0:
        raise ValueError("granularity must be positive")
    aggregators = aggregators or {}
    t0, width, n_bins = _grid([t.clean() for t in tables], granularity_min)
    columns, mask = {}, {}
    for table in tables:
        table = table.clean()
        ts = table.timestamps
        for name, col in table.columns.items():
            if col.dtype == object or name == ingest_time_col(table):
                continue
            how = aggregators.get(name, "mean")
            agg = bin_aggregate(ts, col, t0, width, n_bins, how)
            columns[name] = agg
            mask[name] = np.isnan(agg)
    frame = AlignedFrame(t0, granularity_min, columns, mask)
    return frame


def ingest_time_col(table: RawTable):
    from .ingest import TIME_COLUMN

    return TIME_COLUMN[table.kind]


def realign(frame: AlignedFrame, granularity_min) -> AlignedFrame:
    """Re-bin an aligned frame by its bin centers (idempotent at the same
    granularity)."""
    width = int(round(granularity_min * MS_PER_MIN))
    centers = frame.bin_centers()
    lo = int(centers.min())
    t0 = (lo // width) * width
    n_bins = int((int(centers.max()) - t0) // width) + 1
    columns, mask = {}, {}
    for name, col in frame.columns.items():
        ok = ~frame.missing_mask[name]
        agg = bin_aggregate(centers[ok], col[ok], t0, width, n_bins, "mean")
        columns[name] = agg
        mask[name] = np.isnan(agg)
    return AlignedFrame(t0, granularity_min, columns, mask)


def aggregate_power(pw: RawTable, granularity_min, grid=None):
    """Per-bin arithmetic mean of each NPWD current; empty bins are missing.

    Returns (frame) whose columns are the power lines.
    """
    if pw.kind is not ChannelKind.PW:
        raise ValueError("aggregate_power requires a PW table")
    pw = pw.clean()
    if grid is None:
        t0, width, n_bins = _grid([pw], granularity_min)
    else:
        t0, width, n_bins = grid
    columns, mask = {}, {}
    ts = pw.timestamps
    for name, col in pw.columns.items():
        if name == "ut_ms":
            continue
        agg = bin_aggregate(ts, col, t0, width, n_bins, "mean")
        columns[name] = agg
        mask[name] = np.isnan(agg)
    return AlignedFrame(t0, granularity_min, columns, mask)


def _interval_coverage(edges, starts, ends):
    """Fraction of each grid bin covered by the union-free interval list."""
    n_bins = len(edges) - 1
    width = edges[1] - edges[0]
    cov = np.zeros(n_bins)
    for s, e in zip(starts, ends):
        if e <= s:
            continue
        first = max(0, int((s - edges[0]) // width))
        last = min(n_bins - 1, int((e - 1 - edges[0]) // width))
        for k in range(first, last + 1):
            lo = max(s, edges[k])
            hi = min(e, edges[k + 1])
            if hi > lo:
                cov[k] += (hi - lo) / width
    return np.minimum(cov, 1.0)


def _umbra_intervals(evt: RawTable):
    starts, ends = [], []
    open_start = None
    for t, desc in zip(evt.timestamps, evt.columns["description"]):
        if "UMBRA_START" in desc:
            open_start = int(t)
        elif "UMBRA_END" in desc and open_start is not None:
            starts.append(open_start)
            ends.append(int(t))
            open_start = None
    return starts, ends


def construct_features(frame: AlignedFrame, tables, spec: FeatureSpec):
    """Build the per-bin feature columns for the requested categories.

    Returns (feature columns dict, categories dict).  No column reads data
    later than its bin end.
    """
    by_kind = {t.kind: t.clean() for t in tables}
    edges = frame.bin_edges()
    n = frame.n_bins
    cols, cats = {}, {}

    def add(name, values, cat):
        cols[name] = np.asarray(values, dtype=np.float64)
        cats[name] = cat

    for cat in spec.include_categories:
        if cat == "SAA" and ChannelKind.SAA in by_kind:
            saa = by_kind[ChannelKind.SAA]
            for c in ("sa", "sx", "sy", "sz"):
                add(f"saa_{c}",
                    bin_aggregate(saa.timestamps, saa.columns[c],
                                  frame.t0, frame.width_ms, n, "mean"),
                    "SAA")
        elif cat == "DMOP" and ChannelKind.DMOP in by_kind:
            dmop = by_kind[ChannelKind.DMOP]
            subsys = np.array([str(c)[:4] for c in dmop.columns["command"]])
            halflife_ms = spec.dmop_decay_halflife_min * MS_PER_MIN
            decay_per_bin = 0.5 ** (frame.width_ms / halflife_ms)
            for s in sorted(set(subsys)):
                ts = dmop.timestamps[subsys == s]
                counts = np.histogram(ts, bins=edges)[0].astype(np.float64)
                add(f"dmop_count_{s}", counts, "DMOP")
                # running decayed sum evaluated at each bin end
                energy = np.zeros(n)
                prev = 0.0
                j = 0
                ts_sorted = np.sort(ts)
                for k in range(n):
                    end = edges[k + 1]
                    val = prev * decay_per_bin
                    while j < ts_sorted.size and ts_sorted[j] < end:
                        val += 0.5 ** ((end - ts_sorted[j]) / halflife_ms)
                        j += 1
                    energy[k] = val
                    prev = val
                add(f"dmop_energy_{s}", energy, "DMOP")
        elif cat == "FTL" and ChannelKind.FTL in by_kind:
            ftl = by_kind[ChannelKind.FTL]
            pointing = np.array([str(p) for p in ftl.columns["pointing"]])
            for p in sorted(set(pointing)):
                sel = pointing == p
                add(f"ftl_{p}",
                    _interval_coverage(edges, ftl.columns["utb_ms"][sel],
                                       ftl.columns["ute_ms"][sel]),
                    "FTL")
        elif cat == "EVT" and ChannelKind.EVT in by_kind:
            starts, ends = _umbra_intervals(by_kind[ChannelKind.EVT])
            add("evt_umbra_frac", _interval_coverage(edges, starts, ends), "EVT")
        elif cat == "LT" and ChannelKind.LT in by_kind:
            lt = by_kind[ChannelKind.LT]
            centers = frame.bin_centers().astype(np.float64)
            ts = lt.timestamps.astype(np.float64)
            for c in ("sunmars_km", "eclipseduration_min", "occultationduration_min"):
                vals = np.interp(centers, ts, lt.columns[c])
                vals[(centers < ts.min()) | (centers > ts.max())] = np.nan
                add(f"lt_{c}", vals, "LT")
    return cols, cats


def add_target_history(X, feature_names, categories, Y, target_names, depth):
    """Append lag-1..lag-depth copies of each target as HIST features."""
    if depth <= 0:
        return X, feature_names, categories
    n = Y.shape[0]
    extra, names = [], []
    for lag in range(1, depth + 1):
        lagged = np.full_like(Y, np.nan)
        if lag < n:
            lagged[lag:] = Y[:-lag]
        extra.append(lagged)
        names.extend(f"hist_{t}_lag{lag}" for t in target_names)
    X = np.hstack([X] + extra)
    feature_names = list(feature_names) + names
    categories = dict(categories)
    for nm in names:
        categories[nm] = "HIST"
    return X, feature_names, categories


def build_mex_dataset(tables, granularity_min=15.0, spec: FeatureSpec = None,
                      cleanse_policy: str = "impute_mean"):
    """End-to-end MEX preprocessing: align, features, power targets, cleanse."""
    spec = spec or FeatureSpec()
    by_kind = {t.kind: t for t in tables}
    if ChannelKind.PW not in by_kind:
        raise ValueError("MEX pipeline requires a PW table")
    clean = [t.clean() for t in tables]
    grid = _grid(clean, granularity_min)
    t0, width, n_bins = grid
    frame = AlignedFrame(t0, granularity_min, {}, {})
    frame.columns["_grid"] = np.zeros(n_bins)
    frame.missing_mask["_grid"] = np.zeros(n_bins, dtype=bool)
    cols, cats = construct_features(frame, tables, spec)
    power = aggregate_power(by_kind[ChannelKind.PW], granularity_min, grid)
    target_names = sorted(power.columns)
    Y = np.column_stack([power.columns[c] for c in target_names])
    feature_names = list(cols)
    X = (np.column_stack([cols[c] for c in feature_names])
         if feature_names else np.zeros((n_bins, 0)))
    if spec.history_depth and "HIST" in spec.include_categories:
        X, feature_names, cats = add_target_history(
            X, feature_names, cats, Y, target_names, spec.history_depth)
    ds = Dataset(X, Y, feature_names, target_names, cats,
                 time_index=frame.bin_centers())
    return cleanse(ds, cleanse_policy)


def cleanse(dataset: Dataset, policy: str) -> Dataset:
    """drop_rows removes rows with any missing feature; impute_mean fills
    missing features with the per-column mean.  Rows whose targets are all
    missing are always dropped."""
    keep = ~np.isnan(dataset.Y).all(axis=1)
    ds = dataset.take(np.flatnonzero(keep))
    if policy == "drop_rows":
        ok = ~np.isnan(ds.X).any(axis=1)
        return ds.take(np.flatnonzero(ok))
    if policy == "impute_mean":
        X = ds.X.copy()
        nan = np.isnan(X)
        if nan.any():
            if nan.all(axis=0).any():
                j = int(np.flatnonzero(nan.all(axis=0))[0])
                raise ValueError(
                    f"column {ds.feature_names[j]!r} entirely missing; "
                    "mean undefined")
            means = np.nanmean(X, axis=0)
            X[nan] = np.broadcast_to(means, X.shape)[nan]
        return ds.__class__(X, ds.Y, ds.feature_names, ds.target_names,
                            ds.categories, ds.time_index)
    raise ValueError(f"unknown cleansing policy {policy!r}")


def emit_metafile(config: dict, dataset_digest: str) -> bytes:
    """Canonical JSON metafile: everything needed to replay the run."""
    doc = dict(config)
    doc["dataset_digest"] = dataset_digest
    doc["tool_version"] = TOOL_VERSION
    return canonical_json(doc)
