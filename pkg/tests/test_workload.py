import gzip
import io
import math
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fogplace.errors import ConfigurationError, DegenerateInputError, FormatError, InvalidInputError
from fogplace.topology import BaseStation, random_stations
from fogplace.workload import (MULTIMEDIA, ColumnMap, DemandSnapshot, ServiceSpec, SynthConfig, TrafficSeries,
                               aggregate_to_regions, classify_intensity, demand_snapshots, grid_centers, kmeans_1d,
                               map_grids_to_stations, parse_cdr, read_synth_config, series_from_csv, series_to_csv,
                               snapshots_to_csv, synth_workload)

T0 = datetime(2013, 11, 1, tzinfo=timezone.utc).timestamp()


class TestParseCdr:
    def test_dataset_row(self):
        out = parse_cdr(io.StringIO("grid_id\ttimestamp\ttraffic\n0\t2013-11-01 00:00:00\t11.028366381681\n"))
        assert out.records == [(0, T0, 11.028366381681)]

    def test_epoch_milliseconds(self):
        out = parse_cdr(io.StringIO("grid_id\ttimestamp\ttraffic\n4\t1383264000000\t2.5\n"))
        assert out.records == [(4, T0, 2.5)]

    def test_empty_traffic_skipped(self):
        text = "grid_id\ttimestamp\ttraffic\n1\t1383264000000\t\n1\t1383264600000\t3.0\n"
        out = parse_cdr(io.StringIO(text))
        assert out.skipped == 1
        assert len(out.records) == 1

    def test_duplicates_summed(self):
        text = "grid_id,timestamp,traffic\n2,1383264000000,1.0\n2,1383264000000,2.0\n"
        out = parse_cdr(io.StringIO(text), ColumnMap(delimiter=","))
        assert out.records == [(2, T0, 3.0)]
        assert out.merged == 1

    def test_sorted_output(self):
        text = "grid_id,timestamp,traffic\n5,1383264600000,1\n1,1383264600000,1\n1,1383264000000,1\n"
        recs = parse_cdr(io.StringIO(text), ColumnMap(delimiter=",")).records
        assert recs == sorted(recs)

    def test_headerless_positions(self):
        out = parse_cdr(io.StringIO("7\t1383264000000\t0\t9.5\n"), ColumnMap(positions=(0, 1, 3)))
        assert out.records == [(7, T0, 9.5)]

    def test_gzip_bytes(self):
        raw = gzip.compress(b"grid_id\ttimestamp\ttraffic\n3\t1383264000000\t1.25\n")
        assert parse_cdr(io.BytesIO(raw)).records == [(3, T0, 1.25)]

    def test_bad_header(self):
        with pytest.raises(FormatError):
            parse_cdr(io.StringIO("a\tb\tc\n1\t2\t3\n"))

    def test_bad_timestamp(self):
        with pytest.raises(FormatError):
            parse_cdr(io.StringIO("grid_id\ttimestamp\ttraffic\n1\tyesterday\t3\n"))


class TestGridMapping:
    def test_single_cover(self):
        st_ = [BaseStation(0, 0, 0, 500), BaseStation(1, 5000, 0, 500)]
        assert map_grids_to_stations({1: (100.0, 0.0)}, st_) == {1: 0}

    def test_nearest_covering_wins(self):
        st_ = [BaseStation(0, 0, 0, 1000), BaseStation(1, 300, 0, 1000)]
        assert map_grids_to_stations({1: (200.0, 0.0)}, st_) == {1: 1}
        assert map_grids_to_stations({1: (100.0, 0.0)}, st_) == {1: 0}

    def test_covering_beats_nearer_noncovering(self):
        st_ = [BaseStation(0, 0, 0, 50), BaseStation(1, 400, 0, 1000)]
        assert map_grids_to_stations({1: (100.0, 0.0)}, st_) == {1: 1}

    def test_uncovered_goes_to_nearest(self):
        st_ = [BaseStation(0, 0, 0, 10), BaseStation(1, 1000, 0, 10)]
        assert map_grids_to_stations({1: (700.0, 0.0)}, st_) == {1: 1}

    def test_no_stations(self):
        with pytest.raises(InvalidInputError):
            map_grids_to_stations({1: (0.0, 0.0)}, [])

    def test_grid_centres(self):
        g = grid_centers(100, 235.0)
        assert len(g) == 10_000
        assert g[1] == (117.5, 117.5)
        assert g[101] == (117.5, 352.5)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_brute_force_scan(self, seed):
        stations = random_stations(30, seed=seed, width_m=23_500, coverage_radius=1500.0)
        grid = grid_centers(40, 587.5)
        mapping = map_grids_to_stations(grid, stations)
        for gid, (x, y) in grid.items():
            dist = {s.id: math.hypot(x - s.x, y - s.y) for s in stations}
            cover = [s.id for s in stations if dist[s.id] <= s.coverage_radius]
            pool = cover if cover else list(dist)
            assert mapping[gid] == min(pool, key=lambda i: (dist[i], i))


class TestAggregation:
    def test_two_grids_one_station(self):
        out = aggregate_to_regions([(1, 0.0, 1.5), (2, 0.0, 2.5)], {1: 9, 2: 9})
        assert out[0].region_id == 9
        assert out[0].values.tolist() == [4.0]

    def test_gaps_zero_filled(self):
        out = aggregate_to_regions([(1, 0.0, 1.0), (2, 1200.0, 2.0)], {1: 0, 2: 1})
        assert [s.values.tolist() for s in out] == [[1.0, 0.0, 0.0], [0.0, 0.0, 2.0]]

    def test_common_start(self):
        out = aggregate_to_regions([(1, 650.0, 1.0), (2, 1300.0, 2.0)], {1: 0, 2: 1})
        assert {s.start_time for s in out} == {600.0}

    def test_unmapped_grid(self):
        with pytest.raises(InvalidInputError):
            aggregate_to_regions([(5, 0.0, 1.0)], {1: 0})

    def test_month_conservation(self):
        rng = np.random.default_rng(3)
        n_grids, n_slots = 60, 30 * 144
        grid_map = {g: int(g % 7) for g in range(n_grids)}
        records = []
        for g in range(n_grids):
            slots = rng.choice(n_slots, size=200, replace=False)
            for t in slots:
                records.append((g, float(t) * 600.0 + rng.uniform(0, 599), float(rng.exponential(5.0))))
        out = aggregate_to_regions(records, grid_map)
        assert math.isclose(sum(s.values.sum() for s in out), math.fsum(v for _, _, v in records), rel_tol=1e-12)

    @given(st.lists(st.tuples(st.integers(0, 9), st.floats(0, 1e5), st.floats(0, 1e3)), min_size=1, max_size=60))
    def test_conservation_property(self, records):
        grid_map = {g: g % 3 for g in range(10)}
        out = aggregate_to_regions(records, grid_map)
        assert math.isclose(sum(s.values.sum() for s in out), math.fsum(v for _, _, v in records),
                            rel_tol=1e-9, abs_tol=1e-9)


class TestSnapshots:
    def test_threshold_example(self):
        series = [TrafficSeries(r, 0, [v]) for r, v in ((1, 1.0), (2, 2.0), (3, 9.0))]
        snap = demand_snapshots(series)[0]
        assert snap.demands == {3: 9.0}

    def test_all_equal_empty(self):
        series = [TrafficSeries(r, 0, [5.0]) for r in range(4)]
        assert demand_snapshots(series)[0].demands == {}

    @pytest.mark.parametrize("seed", range(3))
    def test_membership_matches_mean_comparison(self, seed):
        series = synth_workload(SynthConfig(regions=12, days=2), seed=seed)
        mat = np.vstack([s.values for s in series])
        for t, snap in enumerate(demand_snapshots(series)):
            col = mat[:, t]
            expected = {r for r in range(12) if col[r] > sum(col) / len(col)}
            assert set(snap.demands) == expected

    def test_demand_must_be_positive(self):
        with pytest.raises(InvalidInputError):
            DemandSnapshot(0, {1: 0.0})

    def test_csv_output(self):
        series = [TrafficSeries(r, 0, [v]) for r, v in ((1, 1.0), (2, 2.0), (3, 9.0))]
        assert snapshots_to_csv(demand_snapshots(series)) == "region_id,slot,value\n3,0,9.0\n"

    def test_service_spec_limits(self):
        with pytest.raises(InvalidInputError):
            ServiceSpec(max_latency_ms=150.0)
        assert MULTIMEDIA.max_latency_ms == 100.0


class TestSynth:
    def test_periodic_without_noise(self):
        cfg = SynthConfig(regions=3, days=3, noise_sd=0.0, weekly_damp=1.0)
        for s in synth_workload(cfg, seed=1):
            day = cfg.slots_per_day
            assert np.allclose(s.values[:day], s.values[day:2 * day])
            assert np.allclose(s.values[:day], s.values[2 * day:])

    def test_urban_weekend_damped(self):
        cfg = SynthConfig(regions=4, days=7, weekly_damp=0.6, urban_fraction=0.5)
        s = synth_workload(cfg, seed=2)[0]
        days = s.values.reshape(7, -1).mean(axis=1)
        assert days[5:].mean() < days[:5].mean()

    def test_daily_autocorrelation_beats_13h(self):
        s = synth_workload(SynthConfig(regions=1, days=7), seed=0)[0].values
        x = s - s.mean()

        def acf(lag):
            return float(np.dot(x[:-lag], x[lag:]) / np.dot(x, x))

        assert acf(144) > acf(78)

    @given(st.integers(0, 2**32 - 1))
    def test_deterministic_and_nonnegative(self, seed):
        cfg = SynthConfig(regions=3, days=1, noise_sd=80.0)
        a = synth_workload(cfg, seed)
        b = synth_workload(cfg, seed)
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))
        assert all((x.values >= 0).all() for x in a)

    def test_bad_config(self):
        with pytest.raises(ConfigurationError):
            synth_workload(SynthConfig(days=0))
        with pytest.raises(ConfigurationError):
            synth_workload(SynthConfig(interval_s=7))

    def test_config_file(self):
        cfg = read_synth_config("# demo\nregions = 5\nnoise_sd = 2.5\n")
        assert cfg.regions == 5 and cfg.noise_sd == 2.5
        with pytest.raises(ConfigurationError):
            read_synth_config("colour = blue\n")

    def test_series_csv_round_trip(self):
        series = synth_workload(SynthConfig(regions=2, days=1), seed=4)
        again = series_from_csv(series_to_csv(series))
        assert all(np.array_equal(a.values, b.values) for a, b in zip(series, again))


class TestIntensity:
    def test_separated_clusters(self):
        km = kmeans_1d(np.array([1, 1, 1, 50, 50, 100, 100.0]), 3, seed=0)
        assert km.labels.tolist() == [0, 0, 0, 1, 1, 2, 2]
        assert km.centroids.tolist() == [1.0, 50.0, 100.0]

    def test_too_few_distinct(self):
        with pytest.raises(DegenerateInputError):
            kmeans_1d(np.array([1.0, 1.0, 2.0, 2.0]), 3)

    def test_labels_by_centroid(self):
        series = [TrafficSeries(0, 0, [1, 1, 50, 100]), TrafficSeries(1, 0, [1, 50, 100, 100])]
        labels = classify_intensity(series, seed=0)
        assert labels[(0, 0)] == "low" and labels[(0, 2)] == "medium" and labels[(1, 3)] == "high"

    def test_per_slot_labels_shared(self):
        series = synth_workload(SynthConfig(regions=3, days=1), seed=0)
        labels = classify_intensity(series, per_slot=True)
        for t in range(144):
            assert len({labels[(r, t)] for r in range(3)}) == 1

    @given(st.lists(st.floats(0, 1000, allow_nan=False), min_size=3, max_size=80), st.integers(0, 50))
    def test_partition_property(self, values, seed):
        x = np.array(values)
        if np.unique(x).size < 3:
            return
        km = kmeans_1d(x, 3, seed)
        assert km.labels.shape == x.shape
        assert set(km.labels.tolist()) <= {0, 1, 2}
        assert np.all(np.diff(km.centroids) > 0)
        # Every point sits with its nearest centroid.
        d = np.abs(x[:, None] - km.centroids[None, :])
        assert np.allclose(d[np.arange(x.size), km.labels], d.min(axis=1))

    def test_seeding_survives_underflowing_gaps(self):
        km = kmeans_1d(np.array([0.0, 1.0, 2.458605210697593e-205]), 3, 0)
        assert km.centroids.tolist() == [0.0, 2.458605210697593e-205, 1.0] and km.inertia == 0.0

    def test_deterministic(self):
        x = np.random.default_rng(1).exponential(10, 500)
        assert np.array_equal(kmeans_1d(x, 3, 7).labels, kmeans_1d(x, 3, 7).labels)
