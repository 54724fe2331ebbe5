import numpy as np
import pytest
from hypothesis import given, strategies as st

from fogplace.placement.flow import transport

from oracles import transport_lp, transport_nx


def _random(seed, D, F, integer):
    rng = np.random.default_rng(seed)
    if integer:
        lat = rng.integers(0, 11, (D, F)).astype(float)
        vol = rng.integers(1, 11, D).astype(float)
        cap = rng.integers(1, 11, F).astype(float)
    else:
        lat = rng.uniform(0, 50, (D, F))
        vol = rng.uniform(0.1, 20, D)
        cap = rng.uniform(0.1, 30, F)
    usable = rng.random((D, F)) < 0.7
    return lat, usable, vol, cap


class TestTransport:
    def test_single_arc(self):
        r = transport(np.array([[2.0]]), np.array([[True]]), [4.0], [10.0])
        assert r.x.tolist() == [[4.0]] and r.cost == 8.0 and r.total_unmet == 0

    def test_spill_to_expensive_facility(self):
        r = transport(np.array([[1.0, 10.0]]), np.ones((1, 2), bool), [8.0], [5.0, 5.0])
        assert r.x.tolist() == [[5.0, 3.0]]
        assert r.cost == 35.0

    def test_reroutes_to_free_capacity(self):
        # Demand 0 prefers facility 0 but demand 1 can only use facility 0.
        lat = np.array([[1.0, 2.0], [1.0, 0.0]])
        usable = np.array([[True, True], [True, False]])
        r = transport(lat, usable, [3.0, 3.0], [3.0, 3.0])
        assert r.x.tolist() == [[0.0, 3.0], [3.0, 0.0]]
        assert r.cost == 9.0

    def test_unusable_demand_is_unmet(self):
        r = transport(np.zeros((2, 1)), np.array([[True], [False]]), [1.0, 2.0], [5.0])
        assert r.unmet.tolist() == [0.0, 2.0]

    def test_capacity_shortfall(self):
        r = transport(np.zeros((1, 2)), np.ones((1, 2), bool), [10.0], [3.0, 4.0])
        assert r.total_unmet == pytest.approx(3.0)

    @pytest.mark.parametrize("seed", range(40))
    def test_integer_matches_networkx(self, seed):
        lat, usable, vol, cap = _random(seed, 5, 4, integer=True)
        cap = cap + vol.sum()  # guarantee a full assignment so the oracle applies
        r = transport(lat, usable | (np.arange(4) == 0)[None, :], vol, cap)
        assert r.cost == transport_nx(lat.T, (usable | (np.arange(4) == 0)[None, :]).T, vol, cap)

    @given(st.integers(0, 10**6), st.integers(1, 7), st.integers(1, 6))
    def test_real_matches_lp(self, seed, D, F):
        lat, usable, vol, cap = _random(seed, D, F, integer=False)
        r = transport(lat, usable, vol, cap)
        served, cost = transport_lp(lat.T, usable.T, vol, cap)
        assert r.x.sum() == pytest.approx(served, rel=1e-9, abs=1e-9)
        assert r.cost == pytest.approx(cost, rel=1e-7, abs=1e-7)

    @given(st.integers(0, 10**6), st.integers(1, 7), st.integers(1, 6))
    def test_flow_respects_bounds(self, seed, D, F):
        lat, usable, vol, cap = _random(seed, D, F, integer=False)
        r = transport(lat, usable, vol, cap)
        assert np.all(r.x >= 0)
        assert np.all(r.x[~usable] == 0)
        assert np.all(r.x.sum(axis=0) <= cap * (1 + 1e-12))
        assert np.allclose(r.x.sum(axis=1) + r.unmet, vol)
        assert r.cost == pytest.approx(float((r.x * lat).sum()), rel=1e-12, abs=1e-12)
