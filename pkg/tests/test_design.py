"""Space-filling design construction and nesting validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from rnagp.design import (
    NestedDesign,
    Violation,
    lhs,
    maximin_lhs,
    nested_design,
    validate_nested,
)


def min_pairwise(x):
    return float(pdist(x).min()) if len(x) > 1 else np.inf


class TestLhs:
    def test_shape_and_range(self):
        x = lhs(17, 3, seed=0)
        assert x.shape == (17, 3)
        assert np.all(x >= 0.0) and np.all(x < 1.0)

    def test_one_point_per_stratum_per_axis(self):
        n = 12
        x = lhs(n, 4, seed=3)
        strata = np.floor(x * n).astype(int)
        for j in range(4):
            assert sorted(strata[:, j]) == list(range(n))

    def test_seed_determinism(self):
        assert np.array_equal(lhs(9, 2, seed=5), lhs(9, 2, seed=5))
        assert not np.array_equal(lhs(9, 2, seed=5), lhs(9, 2, seed=6))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            lhs(0, 2, seed=0)
        with pytest.raises(ValueError):
            lhs(4, 0, seed=0)


class TestMaximinLhs:
    def test_no_worse_than_single_draw(self):
        single = lhs(20, 2, seed=11)
        best = maximin_lhs(20, 2, seed=11, candidates=15)
        assert min_pairwise(best) >= min_pairwise(single)

    def test_still_a_latin_hypercube(self):
        n = 15
        x = maximin_lhs(n, 3, seed=2)
        strata = np.floor(x * n).astype(int)
        for j in range(3):
            assert sorted(strata[:, j]) == list(range(n))

    def test_deterministic(self):
        a = maximin_lhs(10, 2, seed=7, candidates=5)
        b = maximin_lhs(10, 2, seed=7, candidates=5)
        assert np.array_equal(a, b)

    def test_rejects_empty_pool(self):
        with pytest.raises(ValueError, match="candidates"):
            maximin_lhs(5, 2, seed=0, candidates=0)


class TestNestedDesign:
    def test_levels_are_leading_blocks(self):
        nd = nested_design((20, 12, 5), d=2, seed=4)
        assert nd.sizes == (20, 12, 5)
        for lv in range(3):
            assert np.array_equal(nd.designs[lv], nd.designs[0][: nd.sizes[lv]])
        assert validate_nested(nd) == []

    def test_min_distance_grows_up_the_hierarchy(self):
        # a subset can only drop distance pairs, so the minimum cannot shrink
        nd = nested_design((40, 18, 6), d=2, seed=9)
        gaps = [min_pairwise(x) for x in nd.designs]
        assert gaps[0] <= gaps[1] <= gaps[2]

    def test_deterministic_in_seed(self):
        a = nested_design((15, 7), d=3, seed=1)
        b = nested_design((15, 7), d=3, seed=1)
        c = nested_design((15, 7), d=3, seed=2)
        assert all(np.array_equal(x, y) for x, y in zip(a.designs, b.designs))
        assert not np.array_equal(a.designs[0], c.designs[0])

    def test_equal_adjacent_sizes_share_the_level(self):
        nd = nested_design((10, 10, 4), d=2, seed=3)
        assert np.array_equal(nd.designs[0], nd.designs[1])

    def test_rejects_increasing_sizes(self):
        with pytest.raises(ValueError, match="non-increasing"):
            nested_design((5, 8), d=2, seed=0)

    def test_rejects_empty_level(self):
        with pytest.raises(ValueError, match=">= 1"):
            nested_design((5, 0), d=2, seed=0)

    def test_map_to_bounds(self):
        nd = nested_design((8, 3), d=2, seed=0)
        bounds = np.array([[-5.0, 10.0], [0.0, 15.0]])
        mapped = nd.map_to_bounds(bounds)
        for x in mapped:
            assert np.all(x >= bounds[:, 0]) and np.all(x <= bounds[:, 1])
        np.testing.assert_allclose(
            mapped[0], bounds[:, 0] + nd.designs[0] * (bounds[:, 1] - bounds[:, 0]))
        # nesting survives the affine map
        assert np.array_equal(mapped[1], mapped[0][:3])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000),
           sizes=st.lists(st.integers(1, 12), min_size=1, max_size=4),
           d=st.integers(1, 4))
    def test_random_configurations_validate(self, seed, sizes, d):
        sizes = tuple(sorted(sizes, reverse=True))
        nd = nested_design(sizes, d=d, seed=seed, maximin_candidates=3)
        assert nd.sizes == sizes
        assert nd.dim == d
        assert validate_nested(nd) == []


class TestValidateNested:
    def test_clean_sequence_passes(self):
        rng = np.random.default_rng(0)
        x1 = rng.uniform(size=(6, 2))
        assert validate_nested([x1, x1[:3]]) == []

    def test_size_violation(self):
        rng = np.random.default_rng(1)
        x1 = rng.uniform(size=(3, 2))
        x2 = rng.uniform(size=(5, 2))
        out = validate_nested([x1, x2])
        assert len(out) == 1
        assert out[0].kind == "size"
        assert out[0].level == 2

    def test_missing_row_is_flagged(self):
        rng = np.random.default_rng(2)
        x1 = rng.uniform(size=(6, 2))
        x2 = x1[:3].copy()
        x2[1] += 0.25
        out = validate_nested([x1, x2])
        assert [(v.kind, v.row) for v in out] == [("missing", 1)]

    def test_out_of_place_row_is_flagged(self):
        rng = np.random.default_rng(3)
        x1 = rng.uniform(size=(5, 2))
        x2 = x1[[1, 0]]  # both rows exist, order disagrees with the prefix
        out = validate_nested([x1, x2])
        assert [(v.kind, v.row) for v in out] == [
            ("misaligned", 0), ("misaligned", 1)]
        assert "expected row 0" in out[0].detail

    def test_accepts_design_and_dataset_objects(self, perd_dataset):
        nd = nested_design((9, 4), d=2, seed=0)
        assert validate_nested(nd) == []
        assert validate_nested(perd_dataset) == []

    def test_violation_prints_location(self):
        v = Violation(level=2, row=3, kind="missing", detail="gap 0.2")
        assert str(v) == "level 2, row 3: missing (gap 0.2)"
