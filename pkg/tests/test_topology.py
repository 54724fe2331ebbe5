import json
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fogplace.errors import ConfigurationError, InvalidInputError, UnknownEntityError
from fogplace.topology import (TABLE_TIER_RANGES, BaseStation, assign_resources, build_hierarchy,
                               build_proximity_graph, check_topology, default_tier_ranges, detect_communities,
                               dumps_topology, latency, latency_table, loads_topology, modularity, random_stations,
                               read_stations_csv, write_stations_csv)

from oracles import modularity_oracle, pairwise_edges, set_partitions


class TestProximityGraph:
    def test_boundary_inclusion(self):
        g = build_proximity_graph([BaseStation(0, 0, 0), BaseStation(1, 2999, 0)], 3000)
        assert g.number_of_edges() == 1

    def test_boundary_exclusion(self):
        g = build_proximity_graph([BaseStation(0, 0, 0), BaseStation(1, 3001, 0)], 3000)
        assert g.number_of_edges() == 0

    def test_exact_radius_included(self):
        g = build_proximity_graph([BaseStation(0, 0, 0), BaseStation(1, 3000, 0)], 3000)
        assert g.has_edge(0, 1)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            build_proximity_graph([], 3000)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(InvalidInputError):
            build_proximity_graph([BaseStation(0, 0, 0), BaseStation(0, 1, 1)], 3000)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_pairwise_scan(self, seed):
        st_ = random_stations(50, seed=seed)
        g = build_proximity_graph(st_, 3000)
        assert set(map(lambda e: tuple(sorted(e)), g.edges)) == pairwise_edges([(s.x, s.y) for s in st_], 3000)

    @given(st.integers(2, 120), st.integers(0, 10_000), st.floats(200, 5000))
    def test_matches_pairwise_scan_property(self, n, seed, radius):
        st_ = random_stations(n, seed=seed)
        g = build_proximity_graph(st_, radius)
        assert set(tuple(sorted(e)) for e in g.edges) == pairwise_edges([(s.x, s.y) for s in st_], radius)


class TestCommunities:
    def test_two_cliques_found_by_exhaustive_search(self):
        g = nx.Graph()
        g.add_edges_from((a, b) for a in range(4) for b in range(a + 1, 4))
        g.add_edges_from((a, b) for a in range(4, 8) for b in range(a + 1, 8))
        g.add_edge(3, 4)
        best = max(set_partitions(list(range(8))), key=lambda p: modularity_oracle(g, p))
        assert sorted(sorted(c) for c in best) == [[0, 1, 2, 3], [4, 5, 6, 7]]
        assert detect_communities(g, seed=0) == [[0, 1, 2, 3], [4, 5, 6, 7]]

    def test_no_edges_gives_singletons(self):
        g = nx.empty_graph(5)
        assert detect_communities(g) == [[0], [1], [2], [3], [4]]

    def test_modularity_matches_definition(self):
        g = build_proximity_graph(random_stations(30, seed=4), 3000)
        comms = detect_communities(g, seed=1)
        assert modularity(g, comms) == pytest.approx(modularity_oracle(g, comms), abs=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_partition_and_modularity_bounds(self, seed):
        g = build_proximity_graph(random_stations(60, seed=seed), 2500)
        comms = detect_communities(g, seed=seed)
        flat = sorted(v for c in comms for v in c)
        assert flat == sorted(g.nodes)
        q = modularity(g, comms)
        assert q >= modularity(g, [[v] for v in g.nodes]) - 1e-12
        assert q >= modularity(g, [list(g.nodes)]) - 1e-12

    def test_deterministic(self):
        g = build_proximity_graph(random_stations(80, seed=2), 2500)
        assert detect_communities(g, seed=5) == detect_communities(g, seed=5)


class TestHierarchy:
    def test_four_close_stations(self):
        st_ = [BaseStation(i, x, y) for i, (x, y) in enumerate([(0, 0), (100, 0), (0, 100), (100, 100)])]
        topo = build_hierarchy(st_, radius_m=3000, mu=2)
        assert topo.tier_sizes() == [4, 1]
        assert topo.tier_count == 2

    def test_mu_below_one_rejected(self):
        with pytest.raises(InvalidInputError):
            build_hierarchy(random_stations(5), mu=0)

    @pytest.mark.parametrize("seed", range(6))
    def test_invariants_100_stations(self, seed):
        topo = build_hierarchy(random_stations(100, seed=seed, width_m=20_000), radius_m=3000, mu=2, seed=seed)
        assert check_topology(topo) == []
        assert topo.stations == list(range(100))

    def test_upper_nodes_at_centroids(self):
        topo = build_hierarchy(random_stations(40, seed=3), radius_m=2500)
        for n in topo.nodes.values():
            if n.children:
                xs = [topo.nodes[c].position[0] for c in n.children]
                ys = [topo.nodes[c].position[1] for c in n.children]
                assert n.position == pytest.approx((np.mean(xs), np.mean(ys)))

    def test_disconnected_layout_still_terminates(self):
        st_ = [BaseStation(i, 50_000.0 * i, 0.0) for i in range(6)]
        topo = build_hierarchy(st_, radius_m=3000, mu=2)
        assert check_topology(topo) == []

    def test_single_station(self):
        topo = build_hierarchy([BaseStation(7, 0.0, 0.0)])
        assert check_topology(topo) == []
        assert topo.stations == [7]

    @given(st.integers(2, 80), st.integers(1, 3), st.integers(0, 1000))
    def test_invariants_property(self, n, mu, seed):
        topo = build_hierarchy(random_stations(n, seed=seed, width_m=15_000), radius_m=3000, mu=mu, seed=seed)
        assert check_topology(topo) == []

    def test_json_round_trip(self):
        topo = assign_resources(build_hierarchy(random_stations(25, seed=1)), seed=2)
        text = dumps_topology(topo)
        again = loads_topology(text)
        assert dumps_topology(again) == text
        assert json.loads(text)["schema"].startswith("fogplace.topology/")


class TestResources:
    def test_tier_one_ranges(self):
        topo = assign_resources(build_hierarchy(random_stations(30, seed=0)), seed=0)
        lo, hi = TABLE_TIER_RANGES[0]["mips"]
        assert (lo, hi) == (2.8, 5.3)
        for nid in topo.stations:
            r = topo.nodes[nid].resources
            assert 2.8 <= r.mips <= 5.3
            assert r.ram_gb == 25

    def test_storage_column_is_squared_sizes(self):
        assert [TABLE_TIER_RANGES[c]["storage_gb"] for c in range(4)] == [
            (100.0**2, 100.0**2), (200.0**2, 200.0**2), (400.0**2, 400.0**2), (1000.0**2, 1000.0**2)]

    def test_maxima_increase_by_column(self):
        for name in ("mips", "storage_gb", "ram_gb", "up_mbps", "down_mbps"):
            maxima = [TABLE_TIER_RANGES[c][name][1] for c in range(4)]
            assert all(a < b for a, b in zip(maxima, maxima[1:]))

    def test_degenerate_range(self):
        topo = build_hierarchy(random_stations(10, seed=0))
        ranges = {t: {k: (5.0, 5.0) for k in ("mips", "storage_gb", "ram_gb", "up_mbps", "down_mbps")}
                  for t in range(topo.tier_count)}
        assign_resources(topo, ranges)
        assert all(n.resources.mips == 5.0 for n in topo.nodes.values())

    def test_missing_tier_rejected(self):
        topo = build_hierarchy(random_stations(30, seed=0))
        ranges = default_tier_ranges(topo.tier_count)
        del ranges[1]
        with pytest.raises(ConfigurationError):
            assign_resources(topo, ranges)

    def test_deterministic(self):
        a = assign_resources(build_hierarchy(random_stations(30, seed=0)), seed=9)
        b = assign_resources(build_hierarchy(random_stations(30, seed=0)), seed=9)
        assert dumps_topology(a) == dumps_topology(b)


@pytest.fixture(scope="module")
def topo():
    return assign_resources(build_hierarchy(random_stations(40, seed=1), radius_m=2500), seed=1)


class TestLatency:
    def test_own_station_is_processing_only(self, topo):
        assert latency(topo, 3, 3, 0.0) == topo.processing_latency(0)

    def test_monotone_in_load(self, topo):
        root = topo.root
        assert latency(topo, root, 0, 1.0) >= latency(topo, root, 0, 0.0)

    def test_monotone_along_path(self, topo):
        path = topo.ancestors(5)
        values = [latency(topo, n, 5, 0.0) for n in path]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_fog_below_cap_root_near_cap(self, topo):
        for n in topo.ancestors(0):
            if n != topo.root:
                assert latency(topo, n, 0, 1.0) < 100.0
        assert latency(topo, topo.root, 0, 1.0) > 80.0

    def test_unknown_ids(self, topo):
        with pytest.raises(UnknownEntityError):
            latency(topo, 10_000, 0)
        with pytest.raises(UnknownEntityError):
            latency(topo, 0, topo.root)  # a region must be a base station

    def test_load_outside_unit_interval(self, topo):
        with pytest.raises(InvalidInputError):
            latency(topo, 0, 0, 1.5)

    def test_table_matches_direct_computation(self, topo):
        table = latency_table(topo)
        for n in list(topo.nodes)[::3]:
            for r in topo.stations[::4]:
                for load in (0.0, 0.4):
                    assert table.latency(n, r, load) == pytest.approx(latency(topo, n, r, load), rel=1e-12)


class TestStationCsv:
    def test_round_trip(self):
        st_ = random_stations(5, seed=0)
        assert read_stations_csv(write_stations_csv(st_)) == st_

    def test_latlon_projection_distance(self):
        text = "id,lat,lon,coverage_radius_m\n0,45.46,9.19,1000\n1,45.46,9.23,1000\n"
        a, b = read_stations_csv(text, latlon=True)
        expected = math.radians(0.04) * 6_371_000 * math.cos(math.radians(45.46))
        assert math.hypot(a.x - b.x, a.y - b.y) == pytest.approx(expected, rel=1e-9)

    def test_zero_radius_rejected(self):
        with pytest.raises(InvalidInputError):
            BaseStation(0, 0, 0, 0.0)
