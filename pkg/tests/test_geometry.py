"""Measure containers, boxes and the spike merging heuristic."""
from __future__ import annotations

import numpy as np
import pytest

from pointprox.geometry import Cube, DiscreteMeasure, Spike, merge_spikes, prune, radon_norm


class TestCube:
    def test_interval_basics(self):
        c = Cube.interval(-1.0, 3.0)
        assert c.dim == 1
        assert c.widths[0] == 4.0
        assert c.midpoint[0] == 1.0
        assert c.contains(2.9) and not c.contains(3.1)
        assert c.contains(3.05, atol=0.1)

    def test_split_covers_and_partitions(self):
        c = Cube.box([0.0, 0.0], [1.0, 2.0])
        children = c.split()
        assert len(children) == 4
        # every child has half the widths and sits inside the parent
        for ch in children:
            assert np.allclose(ch.widths, [0.5, 1.0])
            assert c.contains(ch.midpoint)
        # child midpoints are exactly the four quarter points
        mids = sorted(tuple(ch.midpoint) for ch in children)
        assert mids == [(0.25, 0.5), (0.25, 1.5), (0.75, 0.5), (0.75, 1.5)]

    def test_split_mask_convention(self):
        # child index bit j selects the upper half along axis j
        c = Cube.box([0.0, 0.0], [2.0, 2.0])
        children = c.split()
        assert children[0].upper.tolist() == [1.0, 1.0]
        assert children[1].lower.tolist() == [1.0, 0.0]
        assert children[2].lower.tolist() == [0.0, 1.0]
        assert children[3].lower.tolist() == [1.0, 1.0]

    def test_invalid(self):
        with pytest.raises(ValueError):
            Cube.box([0.0, 1.0], [1.0, 0.0])
        with pytest.raises(ValueError):
            Cube(np.zeros((2, 2)), np.ones((2, 2)))

    def test_frozen_arrays(self):
        c = Cube.interval(0.0, 1.0)
        with pytest.raises(ValueError):
            c.lower[0] = -1.0


class TestDiscreteMeasure:
    def test_construction_and_norms(self):
        mu = DiscreteMeasure([[0.1], [0.5], [0.9]], [1.0, -2.0, 3.0])
        assert len(mu) == 3
        assert mu.dim == 1
        assert mu.radon_norm() == 6.0
        assert mu.total_mass() == 2.0
        assert radon_norm(mu) == 6.0

    def test_1d_location_broadcast(self):
        mu = DiscreteMeasure([0.1, 0.2], [1.0, 1.0])
        assert mu.locations.shape == (2, 1)

    def test_zero_and_add(self):
        z = DiscreteMeasure.zero(2)
        assert len(z) == 0 and z.dim == 2
        mu = DiscreteMeasure([[0.0, 0.0]], [1.5])
        s = z + mu
        assert len(s) == 1 and s.weights[0] == 1.5
        with pytest.raises(ValueError):
            mu + DiscreteMeasure.zero(1)

    def test_prune_keeps_order_and_is_idempotent(self):
        mu = DiscreteMeasure([[0.1], [0.2], [0.3]], [1.0, 0.0, -2.0])
        p = mu.prune()
        assert p.weights.tolist() == [1.0, -2.0]
        assert p.locations[:, 0].tolist() == [0.1, 0.3]
        assert p.prune() is p

    def test_spikes_round_trip(self):
        mu = DiscreteMeasure([[0.2, 0.4], [0.6, 0.8]], [2.0, 3.0])
        back = DiscreteMeasure.from_spikes(list(mu.spikes()))
        assert np.array_equal(back.locations, mu.locations)
        assert np.array_equal(back.weights, mu.weights)
        with pytest.raises(ValueError):
            DiscreteMeasure.from_spikes([])

    def test_json_round_trip(self):
        mu = DiscreteMeasure([[0.25, 0.75]], [1.25])
        obj = mu.to_json_obj()
        assert obj == [{"weight": 1.25, "location": [0.25, 0.75]}]
        back = DiscreteMeasure.from_json_obj(obj)
        assert np.array_equal(back.locations, mu.locations)
        empty = DiscreteMeasure.from_json_obj([], dim=3)
        assert len(empty) == 0 and empty.dim == 3
        with pytest.raises(ValueError):
            DiscreteMeasure.from_json_obj([])

    def test_immutability(self):
        mu = DiscreteMeasure([[0.1]], [1.0])
        with pytest.raises(ValueError):
            mu.weights[0] = 2.0

    def test_scaled_and_with_weights(self):
        mu = DiscreteMeasure([[0.1], [0.9]], [1.0, 2.0])
        assert mu.scaled(-0.5).weights.tolist() == [-0.5, -1.0]
        assert mu.with_weights([3.0, 4.0]).weights.tolist() == [3.0, 4.0]

    def test_spike_validation(self):
        s = Spike(2, [0.5])
        assert s.weight == 2.0 and s.location.shape == (1,)


class TestMergeSpikes:
    def test_merges_to_barycentre(self):
        mu = DiscreteMeasure([[0.0], [0.01]], [1.0, 3.0])
        m = merge_spikes(mu, 0.02)
        assert len(m) == 1
        # mass-weighted barycentre: (1*0 + 3*0.01)/4
        assert m.locations[0, 0] == pytest.approx(0.0075)
        assert m.weights[0] == 4.0

    def test_mass_conserved_under_chained_merges(self, rng):
        locs = rng.uniform(0, 1, size=(12, 2))
        w = rng.uniform(0.5, 2.0, size=12)
        mu = DiscreteMeasure(locs, w)
        m = merge_spikes(mu, 0.15)
        assert m.total_mass() == pytest.approx(mu.total_mass(), rel=1e-12)
        # every surviving pair is separated in max norm
        for i in range(len(m)):
            for j in range(i + 1, len(m)):
                assert np.max(np.abs(m.locations[i] - m.locations[j])) > 0.15

    def test_idempotent_at_fixed_radius(self, rng):
        locs = rng.uniform(0, 1, size=(10, 1))
        mu = DiscreteMeasure(locs, rng.uniform(0.1, 1.0, size=10))
        once = merge_spikes(mu, 0.1)
        twice = merge_spikes(once, 0.1)
        assert len(twice) == len(once)
        assert np.array_equal(once.locations, twice.locations)

    def test_accept_veto(self):
        mu = DiscreteMeasure([[0.0], [0.005]], [1.0, 1.0])
        m = merge_spikes(mu, 0.02, accept=lambda cand: False)
        assert len(m) == 2

    def test_cancelling_pair_skipped(self):
        mu = DiscreteMeasure([[0.0], [0.005]], [1.0, -1.0])
        m = merge_spikes(mu, 0.02)
        assert len(m) == 2

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            merge_spikes(DiscreteMeasure.zero(1), -1.0)
