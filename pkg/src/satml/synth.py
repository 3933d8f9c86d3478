"""Synthetic telemetry generators.

Real mission archives are not available here, so these generators produce
channel files with the right schemas and controllable ground truth: MEX
channel sets whose power lines respond to the solar aspect angle and umbra
state, INTEGRAL orbits with a square-wave radiation signal whose transition
times are known exactly, and a per-revolution dataset whose entry/exit
phases are a smooth function of eccentricity and perigee altitude.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .ingest import ChannelKind, RawTable
from .integral import ELEMENT_NAMES, ECLIPSE_KINDS, Revolution

HOUR_MS = 3_600_000
MIN_MS = 60_000


def gen_mex_tables(seed=0, n_hours=96, n_lines=33):
    """Six MEX channel tables covering n_hours, with NPWD currents driven by
    the solar aspect angle, umbra state and command activity plus noise."""
    rng = np.random.default_rng(seed)
    t0 = 1_219_622_400_000  # arbitrary epoch
    end = t0 + n_hours * HOUR_MS

    saa_t = np.arange(t0, end, 5 * MIN_MS)
    sa = 90 + 60 * np.sin(2 * np.pi * (saa_t - t0) / (24 * HOUR_MS))
    saa = RawTable(ChannelKind.SAA, {
        "ut_ms": saa_t.astype(np.int64),
        "sa": sa + rng.normal(0, 1, sa.size),
        "sx": (sa * 0.5 + 20) % 360.0,
        "sy": (sa * 0.25 + 200) % 360.0,
        "sz": rng.uniform(0, 360, sa.size),
    }, "synthetic-saa")

    subsystems = ["ATTT", "PWRS", "TMCS", "OBCP"]
    n_cmd = max(8, n_hours)
    cmd_t = np.sort(rng.integers(t0, end, n_cmd))
    commands = np.array([
        f"{subsystems[rng.integers(len(subsystems))]}{rng.integers(100, 999)}A"
        for _ in range(n_cmd)
    ], dtype=object)
    dmop = RawTable(ChannelKind.DMOP, {
        "ut_ms": cmd_t.astype(np.int64), "command": commands}, "synthetic-dmop")

    pointings = ["EARTH", "NADIR", "INERTIAL"]
    seg = np.arange(t0, end, 2 * HOUR_MS)
    ftl = RawTable(ChannelKind.FTL, {
        "utb_ms": seg.astype(np.int64),
        "ute_ms": (seg + 2 * HOUR_MS).astype(np.int64),
        "pointing": np.array([pointings[i % 3] for i in range(seg.size)],
                             dtype=object),
    }, "synthetic-ftl")

    evt_rows_t, evt_rows_d = [], []
    orbit_period = 7 * HOUR_MS
    for k in range(int((end - t0) // orbit_period)):
        peri = t0 + k * orbit_period
        evt_rows_t += [peri, peri + HOUR_MS // 2, peri + HOUR_MS,
                       peri + orbit_period // 2]
        evt_rows_d += ["PERICENTRE", "UMBRA_START", "UMBRA_END", "APOCENTRE"]
    evt = RawTable(ChannelKind.EVT, {
        "ut_ms": np.array(evt_rows_t, dtype=np.int64),
        "description": np.array(evt_rows_d, dtype=object)}, "synthetic-evt")

    lt_t = np.arange(t0, end + HOUR_MS, 6 * HOUR_MS)
    lt = RawTable(ChannelKind.LT, {
        "ut_ms": lt_t.astype(np.int64),
        "sunmars_km": 2.2e8 + 1e5 * np.sin(2 * np.pi * (lt_t - t0) / (200 * HOUR_MS)),
        "eclipseduration_min": 30 + 5 * np.cos(2 * np.pi * (lt_t - t0) / (100 * HOUR_MS)),
        "occultationduration_min": 12 + 2 * np.sin(2 * np.pi * (lt_t - t0) / (90 * HOUR_MS)),
    }, "synthetic-lt")

    pw_t = np.arange(t0, end, MIN_MS)
    phase_day = 2 * np.pi * (pw_t - t0) / (24 * HOUR_MS)
    umbra = ((pw_t - t0) % orbit_period >= HOUR_MS // 2) \
        & ((pw_t - t0) % orbit_period < HOUR_MS)
    cols = {"ut_ms": pw_t.astype(np.int64)}
    for i in range(n_lines):
        base = 0.3 + 0.02 * i
        gain = 0.1 + 0.01 * (i % 7)
        cols[f"NPWD{2500 + i:04d}"] = np.clip(
            base + gain * np.sin(phase_day + i) + 0.15 * umbra
            + rng.normal(0, 0.01, pw_t.size), 0.0, None)
    pw = RawTable(ChannelKind.PW, cols, "synthetic-pw")
    return [saa, dmop, ftl, evt, lt, pw]


def _default_revolutions(rng, n_revs, t0, period_hours=64.0):
    revs = []
    peri = t0
    prev_period = period_hours * 3600
    for k in range(n_revs):
        period_s = period_hours * 3600 * rng.uniform(0.97, 1.03)
        ecc = rng.uniform(0.55, 0.9)
        apo_alt = rng.uniform(130_000, 155_000)
        a = (apo_alt + 6371) / (1 + ecc)
        peri_alt = a * (1 - ecc) - 6371
        rev = Revolution(
            rev=k + 1, perigee_ms=int(peri),
            perigee_alt_km=float(peri_alt),
            apogee_ms=int(peri + period_s * 500),  # half period, in ms
            apogee_alt_km=float(apo_alt),
            perigee_lon_deg=float(rng.uniform(0, 360)),
            semimajor_km=float(a), eccentricity=float(ecc),
            inclination_deg=float(rng.uniform(50, 55)),
            raan_deg=float(rng.uniform(0, 360)),
            argp_deg=float(rng.uniform(0, 360)),
            period_s=float(period_s),
            period_diff_s=float(period_s - prev_period),
        )
        revs.append(rev)
        prev_period = period_s
        peri += period_s * 1000
    return revs


def gen_integral_tables(seed=0, n_revs=8, cadence_s=8.0,
                        in_belt_counts=5000.0, out_counts=50.0, noise=0.0,
                        entry_before_perigee_h=4.0, exit_after_perigee_h=5.0):
    """ORBIT/IREM/ECLIPSE tables with a square-wave radiation signal.

    Returns (orbit, irem, eclipse, revs, truth) where truth maps rev number
    to the exact (entry_ms, exit_ms) of the square wave.
    """
    rng = np.random.default_rng(seed)
    t0 = 1_356_998_400_000
    revs = _default_revolutions(rng, n_revs, t0)

    truth = {}
    windows = []
    for rev in revs:
        entry = rev.perigee_ms - entry_before_perigee_h * HOUR_MS
        exit_ = rev.perigee_ms + exit_after_perigee_h * HOUR_MS
        truth[rev.rev] = (entry, exit_)
        windows.append((entry, exit_))

    last_end = revs[-1].perigee_ms + revs[-1].period_s * 1000
    ts = np.arange(t0 - 6 * HOUR_MS, last_end, cadence_s * 1000.0).astype(np.int64)
    counts = np.full(ts.size, out_counts)
    for entry, exit_ in windows:
        counts[(ts >= entry) & (ts < exit_)] = in_belt_counts
    if noise > 0:
        counts = np.clip(counts + rng.normal(0, noise, counts.size), 0, None)
    irem = RawTable(ChannelKind.IREM, {
        "ut_ms": ts, "count_rate": counts.astype(np.float64)}, "synthetic-irem")

    orbit_cols = {"rev": np.array([r.rev for r in revs], dtype=np.int64)}
    for name in ELEMENT_NAMES:
        dtype = np.int64 if name.endswith("_ms") else np.float64
        orbit_cols[name] = np.array([getattr(r, name) for r in revs], dtype=dtype)
    order = ["rev", "perigee_ms", "perigee_alt_km", "apogee_ms",
             "apogee_alt_km", "perigee_lon_deg", "semimajor_km",
             "eccentricity", "inclination_deg", "raan_deg", "argp_deg",
             "period_s", "period_diff_s"]
    orbit = RawTable(ChannelKind.ORBIT, {k: orbit_cols[k] for k in order},
                     "synthetic-orbit")

    ecl_rows = []
    for rev in revs:
        for kind in ECLIPSE_KINDS:
            if rng.random() < 0.6:
                enter = rev.perigee_ms + int(rng.uniform(0.05, 0.4)
                                             * rev.period_s * 1000)
                ecl_rows.append((rev.rev, kind, enter,
                                 enter + int(rng.uniform(10, 60) * MIN_MS)))
    if ecl_rows:
        eclipse = RawTable(ChannelKind.ECLIPSE, {
            "rev": np.array([r[0] for r in ecl_rows], dtype=np.int64),
            "event": np.array([r[1] for r in ecl_rows], dtype=object),
            "enter_ms": np.array([r[2] for r in ecl_rows], dtype=np.int64),
            "exit_ms": np.array([r[3] for r in ecl_rows], dtype=np.int64),
        }, "synthetic-eclipse")
    else:
        eclipse = None
    return orbit, irem, eclipse, revs, truth


def gen_per_rev_dataset(n=200, sigma=0.01, seed=0) -> Dataset:
    """Per-revolution dataset whose entry/exit phases are smooth functions of
    eccentricity and perigee altitude plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    ecc = rng.uniform(0.5, 0.9, n)
    peri_alt = rng.uniform(1000, 9000, n)
    X = np.column_stack([
        peri_alt,
        rng.uniform(130_000, 155_000, n),  # apogee_alt_km
        rng.uniform(0, 360, n),  # perigee_lon_deg
        rng.uniform(80_000, 95_000, n),  # semimajor_km
        ecc,
        rng.uniform(50, 55, n),  # inclination_deg
        rng.uniform(0, 360, n),  # raan_deg
        rng.uniform(0, 360, n),  # argp_deg
        rng.uniform(225_000, 235_000, n),  # period_s
        rng.normal(0, 100, n),  # period_diff_s
        np.arange(n, dtype=np.float64) * 2.3e8,  # perigee_ms
        np.arange(n, dtype=np.float64) * 2.3e8 + 1.15e8,  # apogee_ms
        *[rng.uniform(0.3, 0.7, n) for _ in range(6)],  # eclipse phases
    ])
    feature_names = list(ELEMENT_NAMES) + [
        f"ecl_{kind}_{side}" for kind in ECLIPSE_KINDS
        for side in ("enter", "exit")
    ]
    entry = (0.90 + 0.045 * np.sin(np.pi * (ecc - 0.5) / 0.4)
             + 0.025 * np.cos(np.pi * (peri_alt - 1000) / 8000)
             + rng.normal(0, sigma, n))
    exit_ = (0.08 + 0.04 * np.cos(np.pi * (ecc - 0.5) / 0.4)
             + 0.028 * np.sin(np.pi * (peri_alt - 1000) / 8000)
             + rng.normal(0, sigma, n))
    Y = np.column_stack([entry, exit_])
    cats = {f: ("ECLIPSE" if f.startswith("ecl_") else "ORBIT")
            for f in feature_names}
    return Dataset(X, Y, feature_names, ["entry_phase", "exit_phase"], cats,
                   time_index=(np.arange(n) * 230_400_000 + 1_356_998_400_000))


def gen_linear_dataset(n=300, n_decoys=5, slope=3.0, noise=0.1, seed=0) -> Dataset:
    """y = slope * x1 + noise with decoy features; used by the importance and
    what-if sanity checks."""
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(-1, 1, n)
    decoys = rng.uniform(-1, 1, (n, n_decoys))
    X = np.column_stack([x1, decoys])
    y = slope * x1 + rng.normal(0, noise, n)
    names = ["x1"] + [f"decoy{i + 1}" for i in range(n_decoys)]
    cats = {"x1": "SIGNAL", **{f"decoy{i + 1}": "DECOY"
                               for i in range(n_decoys)}}
    return Dataset(X, y[:, None], names, ["y"], cats,
                   time_index=np.arange(n, dtype=np.int64) * MIN_MS)
