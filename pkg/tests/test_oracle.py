import numpy as np

from lesioncount import Volume
from lesioncount.oracle import (
    brute_force_components,
    brute_force_diagram,
    level_sweep_trace,
)

from conftest import random_quantized_volume


class TestBruteForceComponents:
    def test_strip_mid_threshold(self, strip):
        comps = brute_force_components(strip, 0.5)
        assert [sorted(c) for c in comps] == [[1], [3]]

    def test_strip_low_threshold(self, strip):
        comps = brute_force_components(strip, 0.05)
        assert [sorted(c) for c in comps] == [[0, 1, 2, 3, 4]]

    def test_empty_superlevel_set(self, strip):
        assert brute_force_components(strip, 0.95) == []

    def test_canonical_ids_are_minima(self):
        rng = np.random.default_rng(13)
        vol = random_quantized_volume(rng, max_side=7)
        comps = brute_force_components(vol, 0.25)
        ids = [min(c) for c in comps]
        assert ids == sorted(ids)

    def test_six_connectivity_not_diagonal(self):
        data = np.zeros((2, 2, 1))
        data[0, 0, 0] = 0.5
        data[1, 1, 0] = 0.5
        assert len(brute_force_components(Volume(data=data), 0.5)) == 2


class TestBruteForceDiagram:
    def test_strip(self, strip):
        pd = brute_force_diagram(strip)
        assert list(zip(pd.births, pd.deaths)) == [(0.6, 0.3)]
        assert pd.birth_indices.tolist() == [3]
        assert pd.essential_births.tolist() == [0.9]
        assert pd.essential_indices.tolist() == [1]

    def test_constant_volume(self):
        pd = brute_force_diagram(Volume(data=np.full((3, 2, 2), 0.5)))
        assert pd.n_dots == 0
        assert pd.essential_births.tolist() == [0.5]

    def test_strictly_decreasing_ramp(self):
        vol = Volume(data=np.linspace(0.9, 0.1, 9).reshape(9, 1, 1))
        pd = brute_force_diagram(vol)
        assert pd.n_dots == 0
        assert pd.n_essentials == 1
        assert pd.essential_indices.tolist() == [0]

    def test_elder_tie_larger_index_dies(self):
        # two equal peaks joined by a valley: the later-indexed peak dies
        vol = Volume(data=np.array([0.8, 0.2, 0.8]).reshape(3, 1, 1))
        pd = brute_force_diagram(vol)
        assert pd.essential_indices.tolist() == [0]
        assert pd.birth_indices.tolist() == [2]
        assert list(zip(pd.births, pd.deaths)) == [(0.8, 0.2)]


class TestLevelSweepTrace:
    def test_levels_descending_and_distinct(self, strip):
        trace = level_sweep_trace(strip)
        levels = trace.levels.tolist()
        assert levels == sorted(set(levels), reverse=True)
        assert len(trace.components_at_level) == len(levels)

    def test_components_nested_as_level_decreases(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            vol = random_quantized_volume(rng, max_side=6)
            trace = level_sweep_trace(vol)
            for upper, lower in zip(trace.components_at_level, trace.components_at_level[1:]):
                for comp in upper:
                    containers = [c for c in lower if comp <= c]
                    assert len(containers) == 1
