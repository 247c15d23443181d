"""
Unit tests for interp.py module.
"""

import numpy as np
import pytest

from rir_inpaint.core import InvalidInputError, MicMask, RirMatrix, ShapeMismatchError
from rir_inpaint.interp import sci_interpolate

pytestmark = pytest.mark.unit


def column_function(func, num_samples=32, num_mics=8):
    """RIR matrix whose column i holds func(i) scaled by a per-sample profile."""
    profile = np.linspace(1.0, -0.5, num_samples)
    columns = np.array([func(i) for i in range(num_mics)], dtype=float)
    return RirMatrix(profile[:, None] * columns[None, :], 8000)


class TestSciInterpolate:
    """Test cases for sci_interpolate."""

    def test_measured_columns_unchanged(self, toy_rirs, toy_mask):
        result = sci_interpolate(toy_rirs, toy_mask)
        np.testing.assert_array_equal(result.data[:, toy_mask.measured], toy_rirs.data[:, toy_mask.measured])

    def test_all_measured_is_identity(self, toy_rirs):
        result = sci_interpolate(toy_rirs, MicMask.all_true(toy_rirs.num_mics))
        np.testing.assert_array_equal(result.data, toy_rirs.data)
        assert result is not toy_rirs

    def test_linear_field_reproduced(self):
        rirs = column_function(lambda i: 2.0 * i - 3.0)
        mask = MicMask.from_missing(8, [2, 3, 5])
        result = sci_interpolate(rirs, mask)
        np.testing.assert_allclose(result.data, rirs.data, atol=1e-10)

    def test_two_knots_use_line(self):
        rirs = column_function(lambda i: 0.5 * i + 1.0)
        mask = MicMask.from_measured(8, [1, 4])
        result = sci_interpolate(rirs, mask)
        # interior and both extrapolated sides lie on the same line
        np.testing.assert_allclose(result.data, rirs.data, atol=1e-10)

    def test_three_knots_use_quadratic(self):
        rirs = column_function(lambda i: (i - 2.0) ** 2)
        mask = MicMask.from_measured(8, [0, 2, 4])
        result = sci_interpolate(rirs, mask)
        np.testing.assert_allclose(result.data[:, [1, 3]], rirs.data[:, [1, 3]], atol=1e-10)

    def test_linear_continuation_outside_hull(self, rng):
        rirs = RirMatrix(rng.standard_normal((16, 10)), 8000)
        mask = MicMask.from_missing(10, [7, 8, 9])
        result = sci_interpolate(rirs, mask)
        tail = result.data[:, 6:]
        second_difference = tail[:, 2:] - 2.0 * tail[:, 1:-1] + tail[:, :-2]
        np.testing.assert_allclose(second_difference, 0.0, atol=1e-10)

    def test_interior_fill_is_bounded_by_smoothness(self):
        rirs = column_function(np.sin)
        mask = MicMask.from_missing(8, [3])
        result = sci_interpolate(rirs, mask)
        error = np.abs(result.data[:, 3] - rirs.data[:, 3]).max()
        assert error < 0.1

    def test_custom_coordinates(self):
        coords = np.array([0.0, 0.1, 0.3, 0.35, 0.6, 1.0])
        profile = np.linspace(1.0, 0.0, 8)
        rirs = RirMatrix(profile[:, None] * (4.0 * coords - 1.0)[None, :], 8000)
        mask = MicMask.from_missing(6, [2, 5])
        result = sci_interpolate(rirs, mask, coordinates=coords)
        np.testing.assert_allclose(result.data, rirs.data, atol=1e-10)

    def test_too_few_measured(self):
        rirs = RirMatrix(np.ones((4, 3)), 8000)
        with pytest.raises(InvalidInputError):
            sci_interpolate(rirs, MicMask.from_measured(3, [0]))

    def test_mask_size_mismatch(self, toy_rirs):
        with pytest.raises(ShapeMismatchError):
            sci_interpolate(toy_rirs, MicMask.from_missing(5, [1]))

    def test_coordinate_errors(self, toy_rirs, toy_mask):
        with pytest.raises(ShapeMismatchError):
            sci_interpolate(toy_rirs, toy_mask, coordinates=[0.0, 1.0])
        with pytest.raises(InvalidInputError):
            sci_interpolate(toy_rirs, toy_mask, coordinates=[0.0, 1.0, 1.0, 1.0, 2.0, 3.0])
