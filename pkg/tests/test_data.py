"""Dataset container: nesting checks, point insertion, round trips."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnagp.data import MATCH_TOL, DatasetError, MultiFidelityDataset

BOUNDS = np.array([[0.0, 1.0], [0.0, 2.0]])


def two_level(n1=6, n2=3, seed=0):
    rng = np.random.default_rng(seed)
    x1 = rng.uniform([0.0, 0.0], [1.0, 2.0], size=(n1, 2))
    return MultiFidelityDataset(
        bounds=BOUNDS,
        designs=(x1, x1[:n2]),
        outputs=(rng.normal(size=n1), rng.normal(size=n2)),
        costs=(1.0, 3.0),
    )


class TestValidation:
    def test_well_formed_dataset_passes(self):
        ds = two_level()
        assert ds.dim == 2
        assert ds.levels == 2
        assert ds.sizes == (6, 3)

    def test_higher_level_cannot_outgrow_lower(self):
        rng = np.random.default_rng(1)
        x1 = rng.uniform(size=(3, 2))
        x2 = rng.uniform(size=(4, 2))
        with pytest.raises(DatasetError, match="more points"):
            MultiFidelityDataset(BOUNDS, (x1, x2),
                                 (np.zeros(3), np.zeros(4)), (1.0, 3.0))

    def test_leading_block_mismatch_is_rejected(self):
        rng = np.random.default_rng(2)
        x1 = rng.uniform(size=(5, 2))
        x2 = x1[[0, 2]]  # right rows, wrong order relative to x1[:2]
        with pytest.raises(DatasetError, match="nesting violated"):
            MultiFidelityDataset(BOUNDS, (x1, x2),
                                 (np.zeros(5), np.zeros(2)), (1.0, 3.0))

    def test_output_length_mismatch(self):
        rng = np.random.default_rng(3)
        x1 = rng.uniform(size=(4, 2))
        with pytest.raises(DatasetError, match="4 design rows but 3 outputs"):
            MultiFidelityDataset(BOUNDS, (x1,), (np.zeros(3),), (1.0,))

    def test_costs_must_be_positive(self):
        rng = np.random.default_rng(4)
        x1 = rng.uniform(size=(4, 2))
        with pytest.raises(DatasetError, match="costs"):
            MultiFidelityDataset(BOUNDS, (x1,), (np.zeros(4),), (0.0,))

    def test_design_outside_bounds(self):
        x1 = np.array([[0.5, 0.5], [1.5, 0.5]])
        with pytest.raises(DatasetError, match="leaves the input bounds"):
            MultiFidelityDataset(BOUNDS, (x1,), (np.zeros(2),), (1.0,))

    def test_non_finite_output_rejected(self):
        x1 = np.array([[0.5, 0.5]])
        with pytest.raises(DatasetError, match="non-finite"):
            MultiFidelityDataset(BOUNDS, (x1,), (np.array([np.nan]),), (1.0,))

    def test_degenerate_bounds_rejected(self):
        with pytest.raises(DatasetError, match="lo < hi"):
            MultiFidelityDataset(np.array([[1.0, 1.0]]),
                                 (np.array([[1.0]]),), (np.zeros(1),), (1.0,))

    def test_cost_count_must_match_levels(self):
        rng = np.random.default_rng(5)
        x1 = rng.uniform(size=(3, 2))
        with pytest.raises(DatasetError, match="costs"):
            MultiFidelityDataset(BOUNDS, (x1,), (np.zeros(3),), (1.0, 3.0))


class TestLookups:
    def test_cumulative_cost_sums_marginals(self):
        ds = two_level()
        assert ds.cumulative_cost(1) == 1.0
        assert ds.cumulative_cost(2) == 4.0

    def test_level_out_of_range(self):
        ds = two_level()
        with pytest.raises(DatasetError, match="out of range"):
            ds.cumulative_cost(3)
        with pytest.raises(DatasetError, match="out of range"):
            ds.find_point(0, np.zeros(2))

    def test_find_point_exact_and_tolerant(self):
        ds = two_level()
        x = ds.designs[0][4]
        assert ds.find_point(1, x) == 4
        assert ds.find_point(1, x + 0.5 * MATCH_TOL) == 4
        assert ds.find_point(1, x + np.array([0.05, 0.0])) is None
        assert ds.find_point(2, x) is None  # row 4 is beyond the nest

    def test_levels_containing(self):
        ds = two_level()
        assert ds.levels_containing(ds.designs[0][1]) == (1, 2)
        assert ds.levels_containing(ds.designs[0][5]) == (1,)
        assert ds.levels_containing(np.array([0.31, 0.77])) == ()

    def test_output_range_widens_constant_level(self):
        ds = two_level()
        lo, hi = ds.output_range(1)
        assert lo == float(np.min(ds.outputs[0]))
        assert hi == float(np.max(ds.outputs[0]))
        const = MultiFidelityDataset(
            BOUNDS, (ds.designs[0],), (np.full(6, 2.5),), (1.0,))
        assert const.output_range(1) == (2.5, 3.5)


class TestWithPoint:
    def test_new_point_lands_at_same_row_everywhere(self):
        ds = two_level()
        x = np.array([0.9, 1.9])
        grown = ds.with_point(2, x, {1: 10.0, 2: 20.0})
        assert grown.sizes == (7, 4)
        q = 3  # old top-level size
        np.testing.assert_array_equal(grown.designs[0][q], x)
        np.testing.assert_array_equal(grown.designs[1][q], x)
        assert grown.outputs[0][q] == 10.0
        assert grown.outputs[1][q] == 20.0
        grown.validate()
        # the original is untouched
        assert ds.sizes == (6, 3)

    def test_reuses_stored_output_for_known_location(self):
        ds = two_level()
        x = ds.designs[0][5]  # known at level 1 only
        y1_old = float(ds.outputs[0][5])
        grown = ds.with_point(2, x, {2: 42.0})
        assert grown.sizes == (6, 4)
        q = 3
        np.testing.assert_array_equal(grown.designs[0][q], x)
        assert grown.outputs[0][q] == y1_old
        assert grown.outputs[1][q] == 42.0
        grown.validate()
        # level 1 kept the same set of rows, just reordered
        assert sorted(map(tuple, grown.designs[0])) == sorted(
            map(tuple, ds.designs[0]))

    def test_level_one_acquisition_appends(self):
        ds = two_level()
        x = np.array([0.1, 0.2])
        grown = ds.with_point(1, x, {1: -1.0})
        assert grown.sizes == (7, 3)
        np.testing.assert_array_equal(grown.designs[0][6], x)
        grown.validate()

    def test_missing_lower_level_output_is_an_error(self):
        ds = two_level()
        with pytest.raises(DatasetError, match="missing output for level 1"):
            ds.with_point(2, np.array([0.9, 1.9]), {2: 20.0})

    def test_duplicate_acquisition_is_an_error(self):
        ds = two_level()
        with pytest.raises(DatasetError, match="already present"):
            ds.with_point(2, ds.designs[1][0], {})

    def test_dimension_mismatch(self):
        ds = two_level()
        with pytest.raises(DatasetError, match="coordinates"):
            ds.with_point(1, np.array([0.5]), {1: 0.0})

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), level=st.integers(1, 3),
           extra=st.integers(0, 4))
    def test_random_insertions_keep_nesting(self, seed, level, extra):
        rng = np.random.default_rng(seed)
        x1 = rng.uniform([0.0, 0.0], [1.0, 2.0], size=(8, 2))
        ds = MultiFidelityDataset(
            bounds=BOUNDS,
            designs=(x1, x1[:5], x1[:2]),
            outputs=(rng.normal(size=8), rng.normal(size=5),
                     rng.normal(size=2)),
            costs=(1.0, 3.0, 9.0),
        )
        for _ in range(extra):
            x = rng.uniform([0.0, 0.0], [1.0, 2.0])
            outs = {lv: float(rng.normal()) for lv in range(1, level + 1)}
            before = ds.sizes
            ds = ds.with_point(level, x, outs)
            ds.validate()
            for lv in range(1, 4):
                want = before[lv - 1] + (1 if lv <= level else 0)
                assert ds.sizes[lv - 1] == want


class TestRoundTrip:
    def test_dict_round_trip_is_exact(self):
        ds = two_level(seed=9)
        back = MultiFidelityDataset.from_dict(ds.to_dict())
        assert back.sizes == ds.sizes
        np.testing.assert_array_equal(back.bounds, ds.bounds)
        for a, b in zip(back.designs, ds.designs):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(back.outputs, ds.outputs):
            np.testing.assert_array_equal(a, b)
        assert back.costs == ds.costs

    def test_missing_keys_rejected(self):
        payload = two_level().to_dict()
        del payload["designs"]
        with pytest.raises(DatasetError, match="missing keys"):
            MultiFidelityDataset.from_dict(payload)

    def test_declared_dim_must_match(self):
        payload = two_level().to_dict()
        payload["dim"] = 3
        with pytest.raises(DatasetError, match="declared dim"):
            MultiFidelityDataset.from_dict(payload)

    def test_declared_levels_must_match(self):
        payload = two_level().to_dict()
        payload["levels"] = 5
        with pytest.raises(DatasetError, match="declared levels"):
            MultiFidelityDataset.from_dict(payload)
