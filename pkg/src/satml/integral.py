"""Belt-crossing pipeline: median-bin the radiation counts, threshold them to
find belt entries/exits near perigee, convert times to orbital phase and
Kepler altitudes, and emit positional or per-revolution datasets.

Conventions fixed here for determinism:
  - strict ">" at the in-belt count threshold (default 600 counts/s);
  - entry/exit times are midpoints of the bin-center pair where the mask flips;
  - a belt passage is attributed to the perigee it brackets: entries are
    searched from the midpoint of the previous perigee-to-perigee window,
    exits up to the midpoint of the revolution's own window;
  - even-sized bin median = mean of the two middle values;
  - Earth radius 6371 km for altitude conversion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import Dataset
from .ingest import ChannelKind, RawTable
from .mex import MS_PER_MIN, bin_aggregate

EARTH_RADIUS_KM = 6371.0
DEFAULT_THRESHOLD = 600.0
ECLIPSE_KINDS = ("earth_umbra", "earth_penumbra", "moon_penumbra")

ELEMENT_NAMES = (
    "perigee_alt_km", "apogee_alt_km", "perigee_lon_deg", "semimajor_km",
    "eccentricity", "inclination_deg", "raan_deg", "argp_deg",
    "period_s", "period_diff_s", "perigee_ms", "apogee_ms",
)


class KeplerConvergenceError(RuntimeError):
    def __init__(self, ecc, mean_anom):
        super().__init__(
            f"Kepler iteration did not converge (e={ecc}, M={mean_anom})")
        self.ecc = ecc
        self.mean_anom = mean_anom


@dataclass
class Revolution:
    rev: int
    perigee_ms: int
    perigee_alt_km: float
    apogee_ms: int
    apogee_alt_km: float
    perigee_lon_deg: float
    semimajor_km: float
    eccentricity: float
    inclination_deg: float
    raan_deg: float
    argp_deg: float
    period_s: float
    period_diff_s: float
    eclipse_events: dict = field(default_factory=dict)  # kind -> (enter_ms, exit_ms)

    def __post_init__(self):
        if not 0 <= self.eccentricity < 1:
            raise ValueError("eccentricity must be in [0, 1)")
        if self.period_s <= 0:
            raise ValueError("period must be positive")
        if self.apogee_ms <= self.perigee_ms:
            raise ValueError("apogee must follow perigee")

    def elements(self):
        return np.array([getattr(self, n) for n in ELEMENT_NAMES],
                        dtype=np.float64)


def revolutions_from_tables(orbit: RawTable, eclipse: RawTable = None):
    """Assemble Revolution records from parsed ORBIT (+ optional ECLIPSE) tables."""
    if orbit.kind is not ChannelKind.ORBIT:
        raise ValueError("expected an ORBIT table")
    events = {}
    if eclipse is not None:
        if eclipse.kind is not ChannelKind.ECLIPSE:
            raise ValueError("expected an ECLIPSE table")
        for i in range(eclipse.n_rows):
            rev = int(eclipse.columns["rev"][i])
            kind = str(eclipse.columns["event"][i])
            events.setdefault(rev, {})[kind] = (
                int(eclipse.columns["enter_ms"][i]),
                int(eclipse.columns["exit_ms"][i]),
            )
    revs = []
    for i in range(orbit.n_rows):
        kw = {name: orbit.columns[name][i]
              for name in orbit.column_names}
        rev = Revolution(
            rev=int(kw["rev"]), perigee_ms=int(kw["perigee_ms"]),
            perigee_alt_km=float(kw["perigee_alt_km"]),
            apogee_ms=int(kw["apogee_ms"]),
            apogee_alt_km=float(kw["apogee_alt_km"]),
            perigee_lon_deg=float(kw["perigee_lon_deg"]),
            semimajor_km=float(kw["semimajor_km"]),
            eccentricity=float(kw["eccentricity"]),
            inclination_deg=float(kw["inclination_deg"]),
            raan_deg=float(kw["raan_deg"]), argp_deg=float(kw["argp_deg"]),
            period_s=float(kw["period_s"]),
            period_diff_s=float(kw["period_diff_s"]),
            eclipse_events=events.get(int(kw["rev"]), {}),
        )
        revs.append(rev)
    revs.sort(key=lambda r: r.perigee_ms)
    return revs


@dataclass
class BinnedIrem:
    centers: np.ndarray  # ms-UTC, strictly increasing
    median_count: np.ndarray  # counts/s, NaN where no samples
    width_min: float


def bin_irem(irem: RawTable, width_min: float = 15.0) -> BinnedIrem:
    """Median-filter the 8-second count stream into 5-15 minute bins."""
    if irem.kind is not ChannelKind.IREM:
        raise ValueError("expected an IREM table")
    if not 5.0 <= width_min <= 15.0:
        raise ValueError("bin width must be within [5, 15] minutes")
    irem = irem.clean()
    if irem.n_rows == 0:
        raise ValueError("empty IREM table")
    width = int(round(width_min * MS_PER_MIN))
    ts = irem.timestamps
    t0 = (int(ts.min()) // width) * width
    n_bins = int((int(ts.max()) - t0) // width) + 1
    med = bin_aggregate(ts, irem.columns["count_rate"], t0, width, n_bins,
                        "median")
    centers = t0 + width * np.arange(n_bins, dtype=np.int64) + width // 2
    return BinnedIrem(centers, med, width_min)


def next_perigee_ms(rev: Revolution, revs, index) -> int:
    if index + 1 < len(revs):
        return revs[index + 1].perigee_ms
    return int(rev.perigee_ms + rev.period_s * 1000)


def to_phase(t, rev: Revolution, next_perigee: int) -> float:
    """Normalized orbital position: 0 at perigee, 1 at the next perigee."""
    if not rev.perigee_ms <= t <= next_perigee:
        raise ValueError(
            f"time {t} outside revolution [{rev.perigee_ms}, {next_perigee}]")
    return (t - rev.perigee_ms) / (next_perigee - rev.perigee_ms)


def phase_to_altitude(phase, rev: Revolution):
    """Altitude above Earth at the given orbital phase.

    Treats phase as mean-anomaly fraction, solves Kepler's equation by
    Newton iteration, and returns a(1 - e*cos E) - R_earth.  Accepts a
    scalar or an array of phases.
    """
    p = np.asarray(phase, dtype=np.float64)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("phase must be within [0, 1]")
    M = 2.0 * np.pi * p
    E, ok = kernels.solve_kepler(M, rev.eccentricity)
    if not np.all(ok):
        raise KeplerConvergenceError(rev.eccentricity, np.atleast_1d(M)[~np.atleast_1d(ok)][0])
    r = rev.semimajor_km * (1.0 - rev.eccentricity * np.cos(E))
    alt = r - EARTH_RADIUS_KM
    return float(alt) if np.isscalar(phase) or np.ndim(phase) == 0 else alt


@dataclass
class CrossingLabels:
    revs: list  # rev numbers, aligned with the arrays below
    entry_phase: np.ndarray
    exit_phase: np.ndarray
    entry_alt_km: np.ndarray
    exit_alt_km: np.ndarray
    entry_ms: np.ndarray
    exit_ms: np.ndarray

    @property
    def missing(self):
        return np.isnan(self.entry_phase) | np.isnan(self.exit_phase)


def _phase_of_time(t, revs):
    """Phase and containing-revolution index for an absolute time."""
    for i, rev in enumerate(revs):
        nxt = next_perigee_ms(rev, revs, i)
        if rev.perigee_ms <= t < nxt or (i == len(revs) - 1 and t == nxt):
            return to_phase(t, rev, nxt), i
    return np.nan, -1


def detect_crossings(binned: BinnedIrem, revs,
                     threshold: float = DEFAULT_THRESHOLD) -> CrossingLabels:
    """Threshold the binned counts and attribute entry/exit to each perigee.

    Entry: first below->above transition after the midpoint of the previous
    perigee window (or the revolution's own perigee for the first one).
    Exit: last above->below transition before the midpoint of the
    revolution's own window.  Revolutions without an above-threshold bin in
    their search window get missing labels.
    """
    centers = binned.centers
    counts = binned.median_count
    valid = ~np.isnan(counts)
    mask = np.zeros(len(counts), dtype=bool)
    mask[valid] = counts[valid] > threshold

    # transition midpoints between consecutive valid bins
    up_times, down_times = [], []
    prev = None
    for i in np.flatnonzero(valid):
        if prev is not None:
            if not mask[prev] and mask[i]:
                up_times.append(0.5 * (centers[prev] + centers[i]))
            elif mask[prev] and not mask[i]:
                down_times.append(0.5 * (centers[prev] + centers[i]))
        prev = i
    up_times = np.array(up_times)
    down_times = np.array(down_times)

    n = len(revs)
    entry_phase = np.full(n, np.nan)
    exit_phase = np.full(n, np.nan)
    entry_alt = np.full(n, np.nan)
    exit_alt = np.full(n, np.nan)
    entry_ms = np.full(n, np.nan)
    exit_ms = np.full(n, np.nan)

    for i, rev in enumerate(revs):
        nxt = next_perigee_ms(rev, revs, i)
        if i > 0:
            prev_rev = revs[i - 1]
            lo = 0.5 * (prev_rev.perigee_ms + rev.perigee_ms)
        else:
            lo = min(rev.perigee_ms, centers[0])
        hi = 0.5 * (rev.perigee_ms + nxt)

        ups = up_times[(up_times >= lo) & (up_times < hi)]
        downs = down_times[(down_times >= lo) & (down_times < hi)]
        if ups.size:
            t = float(ups[0])
            entry_ms[i] = t
            ph, j = _phase_of_time(t, revs)
            if j >= 0:
                entry_phase[i] = ph
                entry_alt[i] = phase_to_altitude(ph, revs[j])
        if downs.size:
            t = float(downs[-1])
            exit_ms[i] = t
            ph, j = _phase_of_time(t, revs)
            if j >= 0:
                exit_phase[i] = ph
                exit_alt[i] = phase_to_altitude(ph, revs[j])
    return CrossingLabels([r.rev for r in revs], entry_phase, exit_phase,
                          entry_alt, exit_alt, entry_ms, exit_ms)


POSITIONAL_FEATURES = ELEMENT_NAMES + ("phase",)


def build_positional(revs, binned: BinnedIrem, task: str = "regression",
                     threshold: float = DEFAULT_THRESHOLD):
    """One example per bin: current revolution's elements plus phase;
    target is the median count (regression) or the in-belt flag
    (classification).  Returns (Dataset, dropped-bin count)."""
    if task not in ("regression", "classification"):
        raise ValueError(f"unknown task {task!r}")
    rows_X, rows_y, times = [], [], []
    dropped = 0
    perigees = np.array([r.perigee_ms for r in revs])
    for c, count in zip(binned.centers, binned.median_count):
        i = int(np.searchsorted(perigees, c, side="right")) - 1
        if i < 0:
            dropped += 1
            continue
        rev = revs[i]
        nxt = next_perigee_ms(rev, revs, i)
        if c >= nxt:
            dropped += 1
            continue
        phase = to_phase(int(c), rev, nxt)
        feats = np.concatenate([rev.elements(), [phase]])
        if task == "regression":
            y = count
        else:
            y = np.nan if np.isnan(count) else float(count > threshold)
        rows_X.append(feats)
        rows_y.append([y])
        times.append(int(c))
    ds = Dataset(np.array(rows_X).reshape(len(rows_X), len(POSITIONAL_FEATURES)),
                 np.array(rows_y).reshape(len(rows_y), 1),
                 list(POSITIONAL_FEATURES),
                 ["irem_median" if task == "regression" else "in_belt"],
                 {n: "ORBIT" if n != "phase" else "PHASE"
                  for n in POSITIONAL_FEATURES},
                 time_index=np.array(times, dtype=np.int64))
    return ds, dropped


PER_REV_ELEMENT_FEATURES = ELEMENT_NAMES[:10] + ("perigee_ms", "apogee_ms")


def build_per_revolution(revs, labels: CrossingLabels,
                         target_variant: str = "phase") -> Dataset:
    """One example per revolution: 12 orbital elements + 6 eclipse phases,
    targets entry/exit (phase or altitude).  Absent eclipse events are filled
    with the apogee phase; missing crossing labels stay missing."""
    if target_variant not in ("phase", "altitude"):
        raise ValueError(f"unknown target variant {target_variant!r}")
    feature_names = list(PER_REV_ELEMENT_FEATURES) + [
        f"ecl_{kind}_{side}" for kind in ECLIPSE_KINDS
        for side in ("enter", "exit")
    ]
    X = np.zeros((len(revs), 18))
    Y = np.full((len(revs), 2), np.nan)
    times = np.zeros(len(revs), dtype=np.int64)
    by_rev = {r: i for i, r in enumerate(labels.revs)}
    for i, rev in enumerate(revs):
        nxt = next_perigee_ms(rev, revs, i)
        apogee_phase = to_phase(min(max(rev.apogee_ms, rev.perigee_ms), nxt),
                                rev, nxt)
        feats = list(rev.elements())
        for kind in ECLIPSE_KINDS:
            ev = rev.eclipse_events.get(kind)
            if ev is None:
                feats.extend([apogee_phase, apogee_phase])
            else:
                enter = min(max(ev[0], rev.perigee_ms), nxt)
                exit_ = min(max(ev[1], rev.perigee_ms), nxt)
                feats.extend([to_phase(enter, rev, nxt),
                              to_phase(exit_, rev, nxt)])
        X[i] = feats
        j = by_rev.get(rev.rev)
        if j is not None:
            if target_variant == "phase":
                Y[i] = [labels.entry_phase[j], labels.exit_phase[j]]
            else:
                Y[i] = [labels.entry_alt_km[j], labels.exit_alt_km[j]]
        times[i] = rev.perigee_ms
    suffix = "phase" if target_variant == "phase" else "alt_km"
    cats = {n: ("ECLIPSE" if n.startswith("ecl_") else "ORBIT")
            for n in feature_names}
    return Dataset(X, Y, feature_names,
                   [f"entry_{suffix}", f"exit_{suffix}"], cats,
                   time_index=times)


def add_history(dataset: Dataset, n: int = 0, m: int = 0) -> Dataset:
    """Append feature history (depth n) and autoregression history (depth m);
    unavailable history stays missing for later imputation."""
    if n < 0 or m < 0:
        raise ValueError("history depths must be >= 0")
    if n == 0 and m == 0:
        return dataset
    base_feats = list(dataset.feature_names)
    X_parts = [dataset.X]
    names = list(base_feats)
    cats = dict(dataset.categories)
    rows = dataset.n_rows
    for lag in range(1, n + 1):
        lagged = np.full_like(dataset.X, np.nan)
        if lag < rows:
            lagged[lag:] = dataset.X[:-lag]
        X_parts.append(lagged)
        for f in base_feats:
            nm = f"{f}_lag{lag}"
            names.append(nm)
            cats[nm] = "HIST"
    for lag in range(1, m + 1):
        lagged = np.full_like(dataset.Y, np.nan)
        if lag < rows:
            lagged[lag:] = dataset.Y[:-lag]
        X_parts.append(lagged)
        for t in dataset.target_names:
            nm = f"{t}_lag{lag}"
            names.append(nm)
            cats[nm] = "HIST"
    return Dataset(np.hstack(X_parts), dataset.Y, names,
                   dataset.target_names, cats, time_index=dataset.time_index)


def build_integral_dataset(orbit: RawTable, irem: RawTable,
                           eclipse: RawTable = None,
                           representation: str = "per-rev",
                           bin_width_min: float = 15.0,
                           threshold: float = DEFAULT_THRESHOLD,
                           target_variant: str = "phase",
                           task: str = "regression",
                           history_n: int = 0, history_m: int = 0):
    """End-to-end INTEGRAL preprocessing for either representation."""
    revs = revolutions_from_tables(orbit, eclipse)
    binned = bin_irem(irem, bin_width_min)
    if representation == "per-rev":
        labels = detect_crossings(binned, revs, threshold)
        ds = build_per_revolution(revs, labels, target_variant)
    elif representation == "positional":
        ds, _ = build_positional(revs, binned, task, threshold)
    else:
        raise ValueError(f"unknown representation {representation!r}")
    return add_history(ds, history_n, history_m)
