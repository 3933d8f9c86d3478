"""Belt-crossing pipeline: binning conventions, threshold semantics, phase
and altitude conversion, dataset contracts and history construction."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from satml import integral
from satml.ingest import ChannelKind, RawTable
from satml.integral import (DEFAULT_THRESHOLD, EARTH_RADIUS_KM, ECLIPSE_KINDS,
                            ELEMENT_NAMES, Revolution, add_history, bin_irem,
                            build_integral_dataset, build_per_revolution,
                            build_positional, detect_crossings,
                            next_perigee_ms, phase_to_altitude,
                            revolutions_from_tables, to_phase)

MIN_MS = 60_000
HOUR_MS = 3_600_000


def irem(ts, vals):
    return RawTable(ChannelKind.IREM, {
        "ut_ms": np.asarray(ts, dtype=np.int64),
        "count_rate": np.asarray(vals, dtype=np.float64)})


def make_rev(rev=1, perigee_ms=0, period_h=64.0, ecc=0.7, apo_alt=150_000.0,
             **kw):
    a = (apo_alt + EARTH_RADIUS_KM) / (1 + ecc)
    defaults = dict(
        rev=rev, perigee_ms=perigee_ms,
        perigee_alt_km=a * (1 - ecc) - EARTH_RADIUS_KM,
        apogee_ms=perigee_ms + int(period_h * HOUR_MS / 2),
        apogee_alt_km=apo_alt, perigee_lon_deg=10.0, semimajor_km=a,
        eccentricity=ecc, inclination_deg=52.0, raan_deg=100.0,
        argp_deg=270.0, period_s=period_h * 3600.0, period_diff_s=0.0)
    defaults.update(kw)
    return Revolution(**defaults)


class TestRevolution:
    def test_invalid_eccentricity_rejected(self):
        with pytest.raises(ValueError):
            make_rev(ecc=1.0)

    def test_apogee_must_follow_perigee(self):
        with pytest.raises(ValueError):
            make_rev(apogee_ms=-5)

    def test_elements_order_matches_names(self):
        rev = make_rev()
        el = rev.elements()
        assert el.shape == (12,)
        assert el[list(ELEMENT_NAMES).index("eccentricity")] == 0.7

    def test_from_tables_sorted_and_eclipses_attached(self, integral_case):
        revs = revolutions_from_tables(integral_case["orbit"],
                                       integral_case["eclipse"])
        perigees = [r.perigee_ms for r in revs]
        assert perigees == sorted(perigees)
        assert any(r.eclipse_events for r in revs)
        for r in revs:
            for kind in r.eclipse_events:
                assert kind in ECLIPSE_KINDS


class TestBinIrem:
    def test_median_per_bin_odd(self):
        t = [0, 1000, 2000]
        b = bin_irem(irem(t, [5.0, 100.0, 7.0]), 5.0)
        assert b.median_count[0] == 7.0

    def test_median_per_bin_even(self):
        b = bin_irem(irem([0, 1, 2, 3], [1.0, 2.0, 3.0, 4.0]), 5.0)
        assert b.median_count[0] == 2.5

    def test_empty_bins_nan_and_centers_monotone(self):
        b = bin_irem(irem([0, 15 * MIN_MS], [1.0, 2.0]), 5.0)
        assert b.median_count[0] == 1.0
        assert np.isnan(b.median_count[1:3]).all()
        assert b.median_count[3] == 2.0
        assert (np.diff(b.centers) > 0).all()

    def test_width_bounds_enforced(self):
        for width in (4.9, 15.1):
            with pytest.raises(ValueError):
                bin_irem(irem([0], [1.0]), width)

    def test_outlier_rows_removed_before_binning(self):
        t = irem([0, 1000], [5.0, -1.0])
        t.outlier_mask[1] = True
        b = bin_irem(t, 5.0)
        assert b.median_count[0] == 5.0


class TestPhase:
    def test_endpoints_and_midpoint(self):
        rev = make_rev()
        nxt = next_perigee_ms(rev, [rev], 0)
        assert to_phase(rev.perigee_ms, rev, nxt) == 0.0
        assert to_phase(nxt, rev, nxt) == 1.0
        assert to_phase((rev.perigee_ms + nxt) // 2, rev, nxt) == pytest.approx(0.5)

    def test_outside_revolution_rejected(self):
        rev = make_rev()
        with pytest.raises(ValueError):
            to_phase(-1, rev, next_perigee_ms(rev, [rev], 0))

    def test_next_perigee_uses_successor_then_period(self):
        r1, r2 = make_rev(1, 0), make_rev(2, 7 * HOUR_MS)
        revs = [r1, r2]
        assert next_perigee_ms(r1, revs, 0) == 7 * HOUR_MS
        assert next_perigee_ms(r2, revs, 1) == 7 * HOUR_MS + int(r2.period_s * 1000)

    @given(st.floats(0.01, 0.99))
    @settings(max_examples=30, deadline=None)
    def test_phase_is_affine_in_time(self, frac):
        rev = make_rev()
        nxt = next_perigee_ms(rev, [rev], 0)
        t = rev.perigee_ms + frac * (nxt - rev.perigee_ms)
        assert to_phase(t, rev, nxt) == pytest.approx(frac, abs=1e-12)


class TestPhaseToAltitude:
    def test_perigee_and_apogee_exact(self):
        rev = make_rev()
        assert phase_to_altitude(0.0, rev) == pytest.approx(rev.perigee_alt_km, abs=1e-9)
        assert phase_to_altitude(0.5, rev) == pytest.approx(rev.apogee_alt_km, abs=1e-9)
        assert phase_to_altitude(1.0, rev) == pytest.approx(rev.perigee_alt_km, abs=1e-9)

    def test_circular_orbit_constant_altitude(self):
        rev = make_rev(ecc=0.0, apo_alt=10_000.0)
        alts = phase_to_altitude(np.linspace(0, 1, 11), rev)
        np.testing.assert_allclose(alts, 10_000.0, rtol=1e-12)

    def test_monotone_on_ascending_half(self):
        rev = make_rev()
        alts = phase_to_altitude(np.linspace(0, 0.5, 101), rev)
        assert (np.diff(alts) > 0).all()

    def test_symmetric_about_apogee(self):
        rev = make_rev()
        p = np.linspace(0.0, 0.5, 21)
        np.testing.assert_allclose(phase_to_altitude(p, rev),
                                   phase_to_altitude(1.0 - p, rev),
                                   rtol=1e-10)

    def test_phase_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            phase_to_altitude(1.1, make_rev())

    @given(st.floats(0.0, 0.95), st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_altitude_within_orbit_bounds(self, ecc, phase):
        rev = make_rev(ecc=ecc)
        alt = phase_to_altitude(phase, rev)
        assert rev.perigee_alt_km - 1e-6 <= alt <= rev.apogee_alt_km + 1e-6


def square_wave_case(n_revs=4, cadence_s=60.0, entry_h=4.0, exit_h=5.0,
                     seed=3):
    from satml import synth

    orbit, ir, ecl, revs, truth = synth.gen_integral_tables(
        seed=seed, n_revs=n_revs, cadence_s=cadence_s,
        entry_before_perigee_h=entry_h, exit_after_perigee_h=exit_h)
    return ir, revs, truth


class TestDetectCrossings:
    def test_threshold_is_strict(self):
        rev = make_rev(period_h=2.0)
        centers_counts = [(0, 600.0), (1, 600.0), (2, 601.0), (3, 601.0),
                          (4, 600.0)]
        ts = [rev.perigee_ms + k * 10 * MIN_MS for k, _ in centers_counts]
        b = bin_irem(irem(ts, [c for _, c in centers_counts]), 10.0)
        labels = detect_crossings(b, [rev], threshold=DEFAULT_THRESHOLD)
        # exactly-600 bins count as outside the belt
        assert not np.isnan(labels.entry_ms[0])
        assert not np.isnan(labels.exit_ms[0])

    def test_transition_time_is_bin_center_midpoint(self):
        rev = make_rev(period_h=4.0)
        ts = [rev.perigee_ms + k * 10 * MIN_MS for k in range(6)]
        counts = [50.0, 5000.0, 5000.0, 5000.0, 50.0, 50.0]
        b = bin_irem(irem(ts, counts), 10.0)
        labels = detect_crossings(b, [rev])
        assert labels.entry_ms[0] == 0.5 * (b.centers[0] + b.centers[1])
        assert labels.exit_ms[0] == 0.5 * (b.centers[3] + b.centers[4])

    def test_square_wave_recovered_within_one_bin(self):
        ir, revs, truth = square_wave_case()
        labels = detect_crossings(bin_irem(ir, 15.0), revs)
        width = 15 * MIN_MS
        for i, rev in enumerate(revs):
            entry, exit_ = truth[rev.rev]
            assert abs(labels.entry_ms[i] - entry) <= width
            assert abs(labels.exit_ms[i] - exit_) <= width

    def test_first_revolution_entry_phase_unattributable(self):
        # the entry before the very first perigee has no containing
        # revolution, so its phase stays missing while the time is kept
        ir, revs, truth = square_wave_case()
        labels = detect_crossings(bin_irem(ir, 15.0), revs)
        assert not np.isnan(labels.entry_ms[0])
        assert np.isnan(labels.entry_phase[0])
        assert not np.isnan(labels.entry_phase[1:]).any()
        assert not np.isnan(labels.exit_phase).any()

    def test_entry_phase_near_one_exit_near_zero(self):
        ir, revs, truth = square_wave_case()
        labels = detect_crossings(bin_irem(ir, 15.0), revs)
        assert (labels.entry_phase[1:] > 0.9).all()
        assert (labels.exit_phase < 0.1).all()

    def test_quiet_revolution_gets_missing_labels(self):
        rev = make_rev(period_h=4.0)
        ts = [rev.perigee_ms + k * 10 * MIN_MS for k in range(6)]
        b = bin_irem(irem(ts, [50.0] * 6), 10.0)
        labels = detect_crossings(b, [rev])
        assert labels.missing[0]


class TestPositional:
    def test_feature_contract(self, integral_case):
        ds, dropped = build_positional(
            integral_case["revs"], bin_irem(integral_case["irem"], 15.0))
        assert ds.feature_names == list(ELEMENT_NAMES) + ["phase"]
        assert ds.target_names == ["irem_median"]
        assert ds.n_features == 13

    def test_row_count_matches_covered_bins(self):
        # two aligned 64 h revolutions, 15 min bins starting exactly at the
        # first perigee: ceil(64 h / 15 min) = 256 rows per revolution
        t0 = 1_356_998_400_000  # multiple of 900000
        r1 = make_rev(1, t0)
        r2 = make_rev(2, t0 + 64 * HOUR_MS)
        ts = np.arange(t0, t0 + 128 * HOUR_MS, 5 * MIN_MS)
        ds, dropped = build_positional(
            [r1, r2], bin_irem(irem(ts, np.full(ts.size, 50.0)), 15.0))
        in_r1 = (ds.time_index >= t0) & (ds.time_index < r2.perigee_ms)
        assert int(in_r1.sum()) == 256
        assert dropped == 0

    def test_bins_before_first_perigee_dropped(self):
        rev = make_rev(1, 10 * HOUR_MS, period_h=4.0)
        ts = np.arange(0, 14 * HOUR_MS, 5 * MIN_MS)
        ds, dropped = build_positional(
            [rev], bin_irem(irem(ts, np.full(ts.size, 50.0)), 15.0))
        assert dropped > 0
        assert (ds.time_index >= rev.perigee_ms).all()

    def test_classification_target_thresholds(self):
        rev = make_rev(period_h=2.0)
        ts = [rev.perigee_ms + k * 15 * MIN_MS for k in range(4)]
        ds, _ = build_positional(
            [rev], bin_irem(irem(ts, [50.0, 700.0, 600.0, 50.0]), 15.0),
            task="classification")
        np.testing.assert_array_equal(ds.Y[:, 0], [0.0, 1.0, 0.0, 0.0])


class TestPerRevolution:
    def test_eighteen_features_two_targets(self, integral_case):
        labels = detect_crossings(bin_irem(integral_case["irem"], 15.0),
                                  integral_case["revs"])
        ds = build_per_revolution(integral_case["revs"], labels)
        assert ds.n_features == 18
        assert sum(f.startswith("ecl_") for f in ds.feature_names) == 6
        assert ds.target_names == ["entry_phase", "exit_phase"]
        assert ds.n_rows == len(integral_case["revs"])

    def test_absent_eclipse_filled_with_apogee_phase(self):
        rev = make_rev()
        labels = detect_crossings(
            bin_irem(irem([rev.perigee_ms], [50.0]), 15.0), [rev])
        ds = build_per_revolution([rev], labels)
        nxt = next_perigee_ms(rev, [rev], 0)
        apo_phase = to_phase(rev.apogee_ms, rev, nxt)
        j = ds.feature_names.index("ecl_earth_umbra_enter")
        assert ds.X[0, j] == pytest.approx(apo_phase)

    def test_altitude_variant_targets(self, integral_case):
        labels = detect_crossings(bin_irem(integral_case["irem"], 15.0),
                                  integral_case["revs"])
        ds = build_per_revolution(integral_case["revs"], labels, "altitude")
        assert ds.target_names == ["entry_alt_km", "exit_alt_km"]
        obs = ~np.isnan(ds.Y)
        assert (ds.Y[obs] > 0).all()


class TestAddHistory:
    def make_ds(self):
        from satml.data import Dataset

        X = np.arange(8, dtype=float).reshape(4, 2)
        Y = np.arange(4, dtype=float).reshape(4, 1) * 10
        return Dataset(X, Y, ["a", "b"], ["y"], {"a": "ORBIT", "b": "ORBIT"},
                       time_index=np.arange(4, dtype=np.int64))

    def test_feature_history_shifts_rows(self):
        ds = add_history(self.make_ds(), n=2, m=0)
        assert ds.feature_names == ["a", "b", "a_lag1", "b_lag1",
                                    "a_lag2", "b_lag2"]
        j = ds.feature_names.index("a_lag1")
        assert np.isnan(ds.X[0, j])
        np.testing.assert_array_equal(ds.X[1:, j], ds.X[:-1, 0])
        assert ds.categories["a_lag2"] == "HIST"

    def test_target_history_uses_previous_targets(self):
        ds = add_history(self.make_ds(), n=0, m=1)
        j = ds.feature_names.index("y_lag1")
        assert np.isnan(ds.X[0, j])
        np.testing.assert_array_equal(ds.X[1:, j], ds.Y[:-1, 0])

    def test_zero_depths_identity(self):
        base = self.make_ds()
        assert add_history(base, 0, 0) is base

    def test_negative_depth_rejected(self):
        with pytest.raises(ValueError):
            add_history(self.make_ds(), n=-1)


class TestEndToEnd:
    def test_per_rev_pipeline(self, integral_case):
        ds = build_integral_dataset(integral_case["orbit"],
                                    integral_case["irem"],
                                    integral_case["eclipse"],
                                    history_n=1, history_m=1)
        assert ds.n_features == 18 + 18 + 2
        assert ds.n_rows == len(integral_case["revs"])

    def test_positional_pipeline(self, integral_case):
        ds = build_integral_dataset(integral_case["orbit"],
                                    integral_case["irem"],
                                    representation="positional")
        assert ds.n_features == 13
        assert ds.n_rows > 100

    def test_unknown_representation_rejected(self, integral_case):
        with pytest.raises(ValueError):
            build_integral_dataset(integral_case["orbit"],
                                   integral_case["irem"],
                                   representation="weekly")
