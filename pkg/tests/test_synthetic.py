"""
Tests for the synthetic warped-shape benchmark.
"""

import numpy as np
import pytest

from wartem.exceptions import ArgumentError
from wartem.synthetic import BENCHMARK_NAME, base_shape, make_warp_benchmark


class TestWarpBenchmark:
    """Test benchmark generation."""

    def test_sizes_and_labels(self):
        """Train and test partition n balanced series."""
        train, test = make_warp_benchmark(n=40, m=32, class_count=2, seed=0)
        assert train.n + test.n == 40
        assert train.m == test.m == 32
        labels = np.concatenate([train.labels, test.labels])
        assert np.bincount(labels).tolist() == [20, 20]
        assert train.label_names == ("1", "2")
        assert train.name == test.name == BENCHMARK_NAME

    def test_deterministic(self):
        """The same seed reproduces the benchmark exactly."""
        a, _ = make_warp_benchmark(n=20, m=16, seed=3)
        b, _ = make_warp_benchmark(n=20, m=16, seed=3)
        np.testing.assert_array_equal(a.series, b.series)
        c, _ = make_warp_benchmark(n=20, m=16, seed=4)
        assert not np.array_equal(a.series, c.series)

    def test_no_warps_no_jitter(self):
        """Without warps or jitter every series is its class shape."""
        train, _ = make_warp_benchmark(n=12, m=16, class_count=3, max_warps=0, jitter=0.0, seed=1)
        for row, label in zip(train.series, train.labels):
            np.testing.assert_array_equal(row, base_shape(int(label), 16))

    def test_class_shapes_differ(self):
        """Class c completes c + 1 cycles."""
        assert not np.allclose(base_shape(0, 32), base_shape(1, 32))
        assert base_shape(1, 32)[8] == pytest.approx(0.0, abs=1e-12)

    def test_invalid_arguments(self):
        """Degenerate settings are rejected."""
        for kwargs in (dict(class_count=1), dict(n=3), dict(m=3), dict(max_warps=-1), dict(jitter=-0.1)):
            with pytest.raises(ArgumentError):
                make_warp_benchmark(**kwargs)
