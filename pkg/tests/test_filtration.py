import numpy as np
import pytest

from lesioncount import (
    Volume,
    build_filtration_order,
    compute_persistence,
    count_from_diagram,
    diagram_to_csv,
    persistence_count,
)
from lesioncount.oracle import brute_force_components, brute_force_diagram

from conftest import random_quantized_volume


def positive_dots(pd):
    return sorted(
        (b, d) for b, d in zip(pd.births, pd.deaths) if b > d
    )


class TestFiltrationOrder:
    def test_tie_broken_by_index(self):
        vol = Volume(data=np.array([0.3, 0.9, 0.3]).reshape(3, 1, 1))
        g = build_filtration_order(vol)
        assert g.vertex_ids.tolist() == [1, 0, 2]

    def test_strip_order(self, strip):
        g = build_filtration_order(strip)
        assert g.vertex_ids.tolist() == [1, 3, 2, 0, 4]
        assert g.vertex_values.tolist() == [0.9, 0.6, 0.3, 0.2, 0.1]

    def test_all_masked(self):
        vol = Volume(data=np.full((3, 3, 3), 0.05))
        g = build_filtration_order(vol, mask_eps=0.1)
        assert g.n_vertices == 0

    def test_neighbors_restricted_to_foreground(self, strip):
        g = build_filtration_order(strip)
        assert g.neighbors(1) == [0, 2]

    def test_mask_eps_validation(self, strip):
        with pytest.raises(ValueError):
            build_filtration_order(strip, mask_eps=1.0)


class TestPersistenceCount:
    def test_strip_suppressed_merge(self, strip):
        res = persistence_count(strip, theta=0.2)
        assert res.count == 2
        assert positive_dots(res.diagram) == [(0.6, 0.3)]
        assert res.diagram.essential_births.tolist() == [0.9]
        assert res.diagram.essential_indices.tolist() == [1]

    def test_strip_merged(self, strip):
        assert persistence_count(strip, theta=0.35).count == 1

    def test_all_zero(self):
        res = persistence_count(Volume(data=np.zeros((4, 4, 4))), theta=0.5)
        assert res.count == 0
        assert res.diagram.n_dots == 0
        assert res.diagram.n_essentials == 0
        assert np.all(res.labels == 0)

    def test_disjoint_blobs_both_essential(self):
        data = np.zeros((7, 1, 1))
        data[0:2] = 0.8
        data[4:6] = 0.8
        vol = Volume(data=data)
        for theta in (0.0, 0.3, 1.0):
            res = persistence_count(vol, theta=theta)
            assert res.count == 2
            assert res.diagram.n_essentials == 2

    def test_labels_identify_roots(self, strip):
        res = persistence_count(strip, theta=0.2)
        labels = res.labels.ravel(order="F")
        nonzero = labels[labels > 0]
        assert len(set(nonzero.tolist())) == res.count
        # every foreground voxel's label names a root whose birth value
        # bounds the voxel's own probability
        flat = strip.linear_values()
        for lin, lab in enumerate(labels):
            if lab:
                assert flat[lab - 1] >= flat[lin]

    def test_background_labeled_zero(self, strip):
        res = persistence_count(strip, theta=0.0, mask_eps=0.25)
        labels = res.labels.ravel(order="F")
        assert labels[4] == 0 and labels[0] == 0

    def test_theta_validation(self, strip):
        with pytest.raises(ValueError):
            persistence_count(strip, theta=-0.1)

    def test_deterministic_across_runs(self):
        rng = np.random.default_rng(3)
        vol = random_quantized_volume(rng)
        a = persistence_count(vol, theta=0.1)
        b = persistence_count(vol, theta=0.1)
        assert a.count == b.count
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.diagram.births, b.diagram.births)
        assert np.array_equal(a.diagram.deaths, b.diagram.deaths)
        assert np.array_equal(a.diagram.essential_indices, b.diagram.essential_indices)

    def test_forest_invariants(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            vol = random_quantized_volume(rng, max_side=7)
            forest = persistence_count(vol, theta=0.05).forest
            n = forest.parent.size
            for pos in range(n):
                root = forest.root_of(pos)
                # fully compressed: one hop reaches the root
                assert forest.parent[root] == root
                assert forest.root_birth(pos) >= forest.vertex_values[pos]

    def test_crop_does_not_change_counts(self):
        from lesioncount import crop_to_foreground

        rng = np.random.default_rng(44)
        for _ in range(10):
            vol = random_quantized_volume(rng, max_side=8)
            cropped = crop_to_foreground(vol, eps=0.0)
            for theta in (0.0, 0.1, 0.5):
                assert (
                    persistence_count(cropped, theta).count
                    == persistence_count(vol, theta).count
                )


class TestCanonicalDiagram:
    def test_strip(self, strip):
        pd = compute_persistence(strip)
        assert positive_dots(pd) == [(0.6, 0.3)]
        assert pd.essential_births.tolist() == [0.9]

    def test_constant_plateau(self):
        pd = compute_persistence(Volume(data=np.full((3, 3, 3), 0.5)))
        assert pd.n_essentials == 1
        assert pd.essential_births.tolist() == [0.5]
        assert pd.essential_indices.tolist() == [0]
        assert np.count_nonzero(pd.persistences > 0) == 0

    def test_monotone_ramp(self):
        vol = Volume(data=np.linspace(0.05, 0.95, 9).reshape(9, 1, 1))
        pd = compute_persistence(vol)
        assert pd.n_essentials == 1
        assert np.count_nonzero(pd.persistences > 0) == 0

    def test_plateau_saddle_zero_persistence_dot_flagged(self):
        # two plateau arms meeting at their own level: a zero-persistence
        # dot is recorded and flagged, and never counted
        data = np.zeros((2, 2, 1))
        data[1, 0, 0] = 0.5
        data[0, 1, 0] = 0.5
        data[1, 1, 0] = 0.5
        vol = Volume(data=data)
        pd = compute_persistence(vol)
        assert pd.n_essentials == 1
        assert pd.n_dots == 1
        assert pd.zero_persistence.tolist() == [True]
        assert count_from_diagram(pd, 0.0) == 1

    def test_zero_theta_plateaus_do_not_inflate(self):
        vol = Volume(data=np.full((4, 4, 4), 0.7))
        assert persistence_count(vol, theta=0.0).count == 1


class TestCountFromDiagram:
    def test_strip_thresholds(self, strip):
        pd = compute_persistence(strip)
        assert count_from_diagram(pd, 0.2) == 2
        assert count_from_diagram(pd, 0.35) == 1

    def test_empty(self):
        pd = compute_persistence(Volume(data=np.zeros((2, 2, 2))))
        assert count_from_diagram(pd, 0.1) == 0

    def test_negative_theta_rejected(self, strip):
        with pytest.raises(ValueError):
            count_from_diagram(compute_persistence(strip), -1e-9)


class TestOracleEquivalence:
    def test_counts_and_diagrams_match_oracle(self):
        rng = np.random.default_rng(42)
        thetas = np.arange(0, 33) / 32.0
        for _ in range(40):
            vol = random_quantized_volume(rng, max_side=8)
            fast = compute_persistence(vol)
            slow = brute_force_diagram(vol)
            assert positive_dots(fast) == positive_dots(slow)
            assert fast.essential_births.tolist() == slow.essential_births.tolist()
            assert fast.essential_indices.tolist() == slow.essential_indices.tolist()
            for th in thetas:
                merged = persistence_count(vol, th).count
                assert merged == count_from_diagram(fast, th)
                assert merged == slow.count_at(th)

    def test_monotone_in_theta(self):
        rng = np.random.default_rng(99)
        for _ in range(15):
            vol = random_quantized_volume(rng, max_side=8)
            counts = [persistence_count(vol, th).count for th in np.linspace(0, 1, 9)]
            assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_saturation_at_theta_one(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            vol = random_quantized_volume(rng, max_side=8)
            fg = vol.data[vol.data > 0]
            expected = len(brute_force_components(vol, fg.min())) if fg.size else 0
            assert persistence_count(vol, 1.0).count == expected

    def test_disjoint_additivity(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            a = random_quantized_volume(rng, max_side=6)
            b = random_quantized_volume(rng, max_side=6)
            nx = a.dims[0] + b.dims[0] + 1
            ny = max(a.dims[1], b.dims[1])
            nz = max(a.dims[2], b.dims[2])
            data = np.zeros((nx, ny, nz))
            data[: a.dims[0], : a.dims[1], : a.dims[2]] = a.data
            data[a.dims[0] + 1 :, : b.dims[1], : b.dims[2]] = b.data
            combined = Volume(data=data)
            for th in (0.0, 0.1, 0.5):
                assert (
                    persistence_count(combined, th).count
                    == persistence_count(a, th).count + persistence_count(b, th).count
                )


class TestDiagramCsv:
    def test_header_and_rows(self, strip):
        text = diagram_to_csv(compute_persistence(strip))
        lines = text.strip().split("\n")
        assert lines[0] == "birth,death,persistence,birth_index,essential"
        assert lines[1] == "0.900000,inf,inf,1,1"
        assert lines[2] == "0.600000,0.300000,0.300000,3,0"

    def test_row_ordering(self):
        # several essentials and dots force the documented sort order
        data = np.zeros((11, 1, 1))
        data[0] = 0.8  # essential (island)
        data[2] = 0.9  # essential (island)
        data[4:9, 0, 0] = [0.5, 0.2, 0.7, 0.3, 0.6]
        vol = Volume(data=data)
        text = diagram_to_csv(compute_persistence(vol))
        lines = text.strip().split("\n")[1:]
        ess = [l for l in lines if l.endswith(",1")]
        dots = [l for l in lines if l.endswith(",0")]
        assert lines == ess + dots
        ess_births = [float(l.split(",")[0]) for l in ess]
        assert ess_births == sorted(ess_births, reverse=True)
        dot_pers = [float(l.split(",")[2]) for l in dots]
        assert dot_pers == sorted(dot_pers, reverse=True)

    def test_empty_foreground_header_only(self):
        text = diagram_to_csv(compute_persistence(Volume(data=np.zeros((3, 3, 3)))))
        assert text == "birth,death,persistence,birth_index,essential\n"
