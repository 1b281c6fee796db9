"""Synthetic scene generator: determinism, range, structure."""

import numpy as np
import pytest

from adrn.synthetic import make_synthetic_cube


class TestMakeSyntheticCube:
    def test_shape_and_dtype(self):
        cube = make_synthetic_cube(40, 30, 8, seed=0)
        assert cube.values.shape == (40, 30, 8)
        assert cube.values.dtype == np.float32

    def test_normalized_range(self):
        cube = make_synthetic_cube(32, 32, 8, seed=1)
        assert cube.values.min() >= 0.0
        assert cube.values.max() <= 1.0
        for b in range(8):
            assert cube.band(b).max() == 1.0
            assert cube.band(b).min() == 0.0

    def test_deterministic_per_seed(self):
        a = make_synthetic_cube(24, 24, 6, seed=7)
        b = make_synthetic_cube(24, 24, 6, seed=7)
        c = make_synthetic_cube(24, 24, 6, seed=8)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_adjacent_bands_correlated(self):
        cube = make_synthetic_cube(48, 48, 12, seed=2)
        for b in range(11):
            x = cube.band(b).ravel().astype(np.float64)
            y = cube.band(b + 1).ravel().astype(np.float64)
            corr = np.corrcoef(x, y)[0, 1]
            assert corr > 0.5, f"bands {b} and {b + 1} barely correlate ({corr:.2f})"

    def test_spatially_smooth(self):
        # neighboring pixels should differ far less than the full value range
        cube = make_synthetic_cube(48, 48, 4, seed=3)
        grad = np.abs(np.diff(cube.values, axis=0)).mean()
        assert grad < 0.05

    def test_rejects_bad_dimensions(self):
        with pytest.raises(ValueError):
            make_synthetic_cube(0, 10, 5)
        with pytest.raises(ValueError):
            make_synthetic_cube(10, 10, 5, blobs=0)
