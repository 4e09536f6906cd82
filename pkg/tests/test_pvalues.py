import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actscan import (
    BackgroundActivations,
    DimensionMismatchError,
    PValueRange,
    RangeVector,
    beat_tie_counts,
    pvalue_range,
    ranges_for_batch,
    ranges_for_input,
)

from conftest import random_instance, reference_ranges

WORKED_COLUMN = [-1.0, -1.0, 0.2, 0.75]


class TestBeatTieCounts:
    @pytest.mark.parametrize(
        "activation,expected",
        [(0.8, (0, 0)), (0.1, (2, 0)), (-1.0, (2, 2))],
    )
    def test_four_background_column(self, activation, expected):
        assert beat_tie_counts(WORKED_COLUMN, activation) == expected

    def test_empty_column_rejected(self):
        with pytest.raises(ValueError):
            beat_tie_counts([], 0.0)

    def test_negative_tolerance_rejected(self):
        with pytest.raises(ValueError):
            beat_tie_counts([1.0], 0.0, tie_tolerance=-0.1)

    def test_tolerance_widens_ties(self):
        col = [0.0, 0.09, 0.21, 1.0]
        assert beat_tie_counts(col, 0.1, tie_tolerance=0.0) == (2, 0)
        assert beat_tie_counts(col, 0.1, tie_tolerance=0.05) == (2, 1)
        assert beat_tie_counts(col, 0.1, tie_tolerance=0.2) == (1, 3)

    def test_counts_never_exceed_background(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            col = rng.standard_normal(rng.integers(1, 30))
            a = rng.standard_normal()
            tol = float(rng.choice([0.0, 0.1, 1.0]))
            n_beat, n_tie = beat_tie_counts(col, a, tol)
            assert 0 <= n_beat and 0 <= n_tie and n_beat + n_tie <= col.size


class TestPValueRange:
    @pytest.mark.parametrize(
        "counts,expected",
        [((0, 0, 4), (0.0, 0.2)), ((2, 0, 4), (0.4, 0.6)), ((2, 2, 4), (0.4, 1.0))],
    )
    def test_worked_counts(self, counts, expected):
        pr = pvalue_range(*counts)
        assert (pr.p_min, pr.p_max) == expected

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            pvalue_range(3, 2, 4)
        with pytest.raises(ValueError):
            pvalue_range(-1, 0, 4)
        with pytest.raises(ValueError):
            pvalue_range(0, 0, 0)

    def test_range_invariants(self):
        with pytest.raises(ValueError):
            PValueRange(0.5, 0.5)
        with pytest.raises(ValueError):
            PValueRange(-0.1, 0.5)

    def test_width_identity(self):
        # width is (n_tie + 1) / (n_background + 1), up to one ulp of the
        # subtraction p_max - p_min
        for n_bg in (1, 4, 9, 100):
            for n_beat in (0, n_bg // 2):
                for n_tie in range(n_bg - n_beat + 1):
                    pr = pvalue_range(n_beat, n_tie, n_bg)
                    expected = (n_tie + 1) / (n_bg + 1)
                    assert pr.width == pytest.approx(expected, abs=1e-15)

    def test_minimum_width(self):
        # the "+1" in p_max guarantees strict width of at least 1/(|B|+1)
        pr = pvalue_range(3, 0, 7)
        assert pr.width >= 1 / 8


class TestRangesForInput:
    def test_single_background_above(self):
        bg = BackgroundActivations(np.array([[0.0]]))
        ranges = ranges_for_input(bg, [1.0])
        assert (ranges[0].p_min, ranges[0].p_max) == (0.0, 0.5)

    def test_single_background_full_tie(self):
        bg = BackgroundActivations(np.array([[1.0]]))
        ranges = ranges_for_input(bg, [1.0])
        assert (ranges[0].p_min, ranges[0].p_max) == (0.0, 1.0)

    def test_four_background_worked_example(self):
        bg = BackgroundActivations(np.array([WORKED_COLUMN] * 3).T)
        ranges = ranges_for_input(bg, [0.8, 0.1, -1.0])
        assert [(r.p_min, r.p_max) for r in (ranges[0], ranges[1], ranges[2])] == [
            (0.0, 0.2),
            (0.4, 0.6),
            (0.4, 1.0),
        ]

    def test_dimension_mismatch(self):
        bg = BackgroundActivations(np.ones((2, 3)))
        with pytest.raises(DimensionMismatchError):
            ranges_for_input(bg, [1.0, 2.0])

    def test_non_finite_input(self):
        bg = BackgroundActivations(np.ones((2, 2)))
        with pytest.raises(ValueError):
            ranges_for_input(bg, [1.0, np.nan])

    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.05, 0.5]))
    @settings(max_examples=60)
    def test_matches_definitional_counts(self, seed, tol):
        rng = np.random.default_rng(seed)
        bg, row = random_instance(
            rng, int(rng.integers(1, 12)), int(rng.integers(1, 25)), with_ties=True
        )
        got = ranges_for_input(BackgroundActivations(bg), row.astype(np.float32), tol)
        want = reference_ranges(bg.astype(np.float32), row.astype(np.float32), tol)
        np.testing.assert_array_equal(got.p_min, want.p_min)
        np.testing.assert_array_equal(got.p_max, want.p_max)


class TestRangesForBatch:
    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.25]))
    @settings(max_examples=60)
    def test_batch_equals_per_row(self, seed, tol):
        # the sorted binary-search path must be identical to the linear scan
        rng = np.random.default_rng(seed)
        n_nodes = int(rng.integers(1, 10))
        n_bg = int(rng.integers(1, 30))
        bg, _ = random_instance(rng, n_nodes, n_bg, with_ties=True)
        batch = random_instance(rng, n_nodes, 4, with_ties=True)[0]
        store = BackgroundActivations(bg)
        got = ranges_for_batch(store, batch.astype(np.float32), tol)
        for i in range(4):
            want = ranges_for_input(store, batch[i].astype(np.float32), tol)
            np.testing.assert_array_equal(got[i].p_min, want.p_min)
            np.testing.assert_array_equal(got[i].p_max, want.p_max)

    def test_tolerance_window_edges(self):
        # values sitting exactly on a +/- tol boundary
        bg = BackgroundActivations(np.array([[0.9, 1.1, 1.0, 0.5, 1.5]]).T)
        got = ranges_for_batch(bg, np.array([[1.0]]), tie_tolerance=0.1)[0]
        n_beat, n_tie = beat_tie_counts(bg.values[:, 0], 1.0, 0.1)
        assert (got.p_min, got.p_max) == (
            n_beat / 6,
            (n_beat + n_tie + 1) / 6,
        )

    def test_batch_dimension_mismatch(self):
        bg = BackgroundActivations(np.ones((2, 3)))
        with pytest.raises(DimensionMismatchError):
            ranges_for_batch(bg, np.ones((2, 4)))


class TestProperties:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40)
    def test_monotonicity_in_activation(self, seed):
        # raising the activation never raises p_min or p_max
        rng = np.random.default_rng(seed)
        col = rng.standard_normal(int(rng.integers(1, 20)))
        activations = np.sort(rng.standard_normal(6))
        bg = BackgroundActivations(col[:, None])
        rs = [ranges_for_input(bg, [a])[0] for a in activations]
        for lo, hi in zip(rs, rs[1:]):
            assert hi.p_min <= lo.p_min
            assert hi.p_max <= lo.p_max

    def test_null_p_min_uniformity(self):
        # under exchangeability with no ties, n_beat is uniform on 0..|B|
        rng = np.random.default_rng(1234)
        n_bg, trials = 9, 40000
        draws = rng.standard_normal((trials, n_bg + 1))
        n_beat = (draws[:, :n_bg] > draws[:, n_bg : n_bg + 1]).sum(axis=1)
        counts = np.bincount(n_beat, minlength=n_bg + 1)
        expected = trials / (n_bg + 1)
        sigma = np.sqrt(trials * (1 / (n_bg + 1)) * (1 - 1 / (n_bg + 1)))
        assert np.abs(counts - expected).max() < 4 * sigma


class TestRangeVector:
    def test_json_round_trip(self):
        rv = RangeVector([0.0, 0.4], [0.2, 1.0])
        rows = rv.to_json_rows()
        assert rows == [
            {"node": 0, "pmin": 0.0, "pmax": 0.2},
            {"node": 1, "pmin": 0.4, "pmax": 1.0},
        ]
        back = RangeVector.from_json_rows(rows)
        np.testing.assert_array_equal(back.p_min, rv.p_min)
        np.testing.assert_array_equal(back.p_max, rv.p_max)

    def test_from_json_requires_dense_nodes(self):
        with pytest.raises(ValueError):
            RangeVector.from_json_rows([{"node": 1, "pmin": 0.0, "pmax": 0.5}])

    def test_validation(self):
        with pytest.raises(ValueError):
            RangeVector([0.5], [0.5])
        with pytest.raises(ValueError):
            RangeVector([], [])
