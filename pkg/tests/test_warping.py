"""
Tests for the window warping operators and training-pair generation.
"""

import numpy as np
import pytest

from wartem.exceptions import ArgumentError, SeriesTooShortError, WarpWindowError
from wartem.warping import (
    TrainingPair,
    WarpDirection,
    WarpFamily,
    audit_pairs,
    generate_warped_variant,
    get_operator,
    lcw,
    liw,
    make_training_pairs,
    max_warp_count,
    rcw,
    riw,
    stack_pairs,
    warp_dataset,
)


class TestOperators:
    """Test the four single-window operators."""

    def test_window_transforms(self):
        """The canonical [1, 2, 3, 4] window, bit-exact."""
        window = [1.0, 2.0, 3.0, 4.0]
        np.testing.assert_array_equal(lcw(window, 0), [1.0, 3.0, 4.0, 4.0])
        np.testing.assert_array_equal(rcw(window, 0), [1.0, 1.0, 2.0, 4.0])
        np.testing.assert_array_equal(liw(window, 0), [1.0, 3.0, 3.5, 4.0])
        np.testing.assert_array_equal(riw(window, 0), [1.0, 1.5, 2.0, 4.0])

    def test_only_window_changes(self):
        """Values outside the focus window are untouched."""
        series = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
        np.testing.assert_array_equal(lcw(series, 1), [0.0, 2.0, 3.0, 4.0, 4.0, 5.0])
        np.testing.assert_array_equal(rcw(series, 2), [0.0, 1.0, 2.0, 2.0, 3.0, 5.0])

    def test_boundary_windows(self):
        """Length-4 series and windows touching either end."""
        np.testing.assert_array_equal(liw([0.0, 0.0, 0.0, 8.0], 0), [0.0, 0.0, 4.0, 8.0])
        np.testing.assert_array_equal(riw([8.0, 0.0, 0.0, 0.0], 0), [8.0, 4.0, 0.0, 0.0])
        padded = [9.0, 1.0, 2.0, 3.0, 4.0, 9.0]
        np.testing.assert_array_equal(lcw(padded, 1), [9.0, 1.0, 3.0, 4.0, 4.0, 9.0])
        np.testing.assert_array_equal(rcw(padded, 1), [9.0, 1.0, 1.0, 2.0, 4.0, 9.0])
        np.testing.assert_array_equal(lcw(padded, 2), [9.0, 1.0, 2.0, 4.0, 9.0, 9.0])
        np.testing.assert_array_equal(rcw(padded, 0), [9.0, 9.0, 1.0, 3.0, 4.0, 9.0])

    @pytest.mark.parametrize("op", [lcw, rcw, liw, riw])
    def test_constant_series_fixed_point(self, op):
        """A constant series is left as it is at every window."""
        series = np.full(7, -2.5)
        for w in range(4):
            np.testing.assert_array_equal(op(series, w), series)

    @pytest.mark.parametrize("left, right", [(lcw, rcw), (liw, riw)])
    def test_mirror_symmetry(self, left, right):
        """right(reverse(t), m-4-w) == reverse(left(t, w)), and the other way round."""
        rng = np.random.default_rng(11)
        for _ in range(200):
            m = int(rng.integers(4, 20))
            w = int(rng.integers(0, m - 3))
            series = rng.normal(size=m)
            np.testing.assert_array_equal(right(series[::-1], m - 4 - w), left(series, w)[::-1])
            np.testing.assert_array_equal(left(series[::-1], m - 4 - w), right(series, w)[::-1])

    @pytest.mark.parametrize("op", [lcw, rcw, liw, riw])
    def test_translation_commutes(self, op):
        """op(t + c, w) == op(t, w) + c."""
        rng = np.random.default_rng(12)
        for _ in range(200):
            m = int(rng.integers(4, 20))
            w = int(rng.integers(0, m - 3))
            series = rng.normal(size=m)
            c = float(rng.uniform(-50, 50))
            np.testing.assert_allclose(op(series + c, w), op(series, w) + c, rtol=0, atol=1e-12)

    def test_input_not_modified(self):
        """Operators return a new array."""
        series = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        before = series.copy()
        for op in (lcw, rcw, liw, riw):
            op(series, 1)
        np.testing.assert_array_equal(series, before)

    def test_window_out_of_range(self):
        """The window must fit: w in 0..m-4."""
        with pytest.raises(WarpWindowError):
            lcw([1.0, 2.0, 3.0, 4.0, 5.0], 2)
        with pytest.raises(IndexError):
            riw([1.0, 2.0, 3.0, 4.0], -1)

    def test_series_too_short(self):
        """Three points cannot hold a window."""
        with pytest.raises(SeriesTooShortError):
            rcw([1.0, 2.0, 3.0], 0)

    def test_get_operator(self):
        """Direction and family select the operator; mixed has none."""
        assert get_operator(WarpDirection.LEFT, WarpFamily.COPY) is lcw
        assert get_operator("right", "interpolation") is riw
        with pytest.raises(ArgumentError):
            get_operator(WarpDirection.LEFT, WarpFamily.MIXED)


class TestWarpedVariant:
    """Test progressive multi-warp generation."""

    def test_zero_warps_is_exact_copy(self):
        """count=0 returns the same values."""
        series = np.linspace(-1, 1, 10)
        out = generate_warped_variant(series, "left", "copy", np.random.default_rng(0), count=0)
        np.testing.assert_array_equal(out, series)
        assert out is not series

    def test_zero_max_warps(self):
        """max_warps=0 forces r = 0."""
        series = np.linspace(0, 1, 12)
        out = generate_warped_variant(series, "right", "mixed", np.random.default_rng(3), max_warps=0)
        np.testing.assert_array_equal(out, series)

    def test_deterministic(self):
        """The same seed yields the same variant."""
        series = np.sin(np.linspace(0, 6, 40))
        a = generate_warped_variant(series, "left", "mixed", np.random.default_rng(5))
        b = generate_warped_variant(series, "left", "mixed", np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_endpoints_preserved(self):
        """No operator ever changes the first or last value of a series."""
        rng = np.random.default_rng(1)
        for _ in range(200):
            series = rng.normal(size=int(rng.integers(4, 30)))
            direction = rng.choice(["left", "right"])
            family = rng.choice(["copy", "interpolation", "mixed"])
            out = generate_warped_variant(series, direction, family, rng, count=int(rng.integers(0, 8)))
            assert out.shape == series.shape
            assert out[0] == series[0]
            assert out[-1] == series[-1]

    def test_copy_family_only_reuses_values(self):
        """Copy warps rearrange existing values, never invent new ones."""
        rng = np.random.default_rng(2)
        series = rng.normal(size=25)
        out = generate_warped_variant(series, "right", "copy", rng, count=12)
        assert set(out.tolist()) <= set(series.tolist())

    def test_single_left_copy_warp(self):
        """One warp of a fixed family equals the operator on some window."""
        series = np.arange(8, dtype=float)
        out = generate_warped_variant(series, "left", "copy", np.random.default_rng(9), count=1)
        candidates = [lcw(series, w) for w in range(5)]
        assert any(np.array_equal(out, c) for c in candidates)

    def test_negative_count(self):
        """Warp counts cannot be negative."""
        with pytest.raises(ArgumentError):
            generate_warped_variant(np.zeros(6), "left", "copy", np.random.default_rng(0), count=-1)

    def test_max_warp_count(self):
        """At most floor(m/2) warps."""
        assert max_warp_count(64) == 32
        assert max_warp_count(7) == 3


class TestTrainingPairs:
    """Test pair construction for the twin auto-encoder."""

    def test_two_pairs_per_series(self, sine_dataset):
        """2n pairs, every series once on each warped side."""
        pairs = make_training_pairs(sine_dataset, "mixed", np.random.default_rng(0))
        assert len(pairs) == 2 * sine_dataset.n
        assert audit_pairs(pairs, sine_dataset)

    def test_directionality(self, sine_dataset):
        """The unwarped slot always holds the exact original series."""
        pairs = make_training_pairs(sine_dataset, "copy", np.random.default_rng(1))
        for pair in pairs:
            original = sine_dataset.series[pair.source_index]
            if pair.warped_side is WarpDirection.LEFT:
                np.testing.assert_array_equal(pair.right_input, original)
            else:
                np.testing.assert_array_equal(pair.left_input, original)

    def test_audit_catches_tampering(self, sine_dataset):
        """A pair whose original slot was altered fails the audit."""
        pairs = make_training_pairs(sine_dataset, "copy", np.random.default_rng(1))
        bad = pairs[0]
        broken = TrainingPair(bad.left_input + 1.0, bad.right_input + 1.0, bad.source_index, bad.warped_side)
        assert not audit_pairs([broken] + pairs[1:], sine_dataset)
        assert not audit_pairs(pairs[1:], sine_dataset)

    def test_labels_are_irrelevant(self, sine_dataset):
        """The raw series matrix yields the same pairs as the dataset."""
        a = make_training_pairs(sine_dataset, "mixed", np.random.default_rng(4))
        b = make_training_pairs(np.array(sine_dataset.series), "mixed", np.random.default_rng(4))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.left_input, y.left_input)
            np.testing.assert_array_equal(x.right_input, y.right_input)
            assert x.source_index == y.source_index

    def test_pairs_are_shuffled(self, sine_dataset):
        """Pairs do not come out in generation order."""
        pairs = make_training_pairs(sine_dataset, "copy", np.random.default_rng(7))
        order = [(p.source_index, p.warped_side.value) for p in pairs]
        generated = [(i, side) for i in range(sine_dataset.n) for side in ("left", "right")]
        assert order != generated

    def test_stack_pairs(self, sine_dataset):
        """Stacking gives (B, m) matrices."""
        pairs = make_training_pairs(sine_dataset, "copy", np.random.default_rng(0))
        left, right = stack_pairs(pairs)
        assert left.shape == right.shape == (2 * sine_dataset.n, sine_dataset.m)


class TestWarpDataset:
    """Test dataset-wide warping."""

    def test_labels_kept(self, sine_dataset):
        """Warping changes values, never labels."""
        warped = warp_dataset(sine_dataset, "right", "interpolation", np.random.default_rng(0), count=3)
        assert list(warped.labels) == list(sine_dataset.labels)
        assert warped.series.shape == sine_dataset.series.shape
