"""
Cubic-spline interpolation (SCI) of missing RIR columns across the
microphone axis.
"""

from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from .core import InvalidInputError, MicMask, RirMatrix, ShapeMismatchError
from .logger import get_logger


def _polynomial_fit(x: np.ndarray, y: np.ndarray, degree: int) -> Tuple[Callable, Callable]:
    """Exact polynomial through the knots, vectorized over time samples."""
    coeffs = np.polyfit(x, y, degree)  # (degree + 1, K)
    deriv = np.array([coeffs[i] * (degree - i) for i in range(degree)])

    def value(points):
        return np.stack([np.polyval(coeffs, p) for p in np.atleast_1d(points)])

    def slope(points):
        return np.stack([np.polyval(deriv, p) for p in np.atleast_1d(points)])

    return value, slope


def _natural_spline(x: np.ndarray, y: np.ndarray) -> Tuple[Callable, Callable]:
    spline = CubicSpline(x, y, axis=0, bc_type="natural", extrapolate=False)
    derivative = spline.derivative()
    return spline, derivative


def sci_interpolate(
    rirs: RirMatrix,
    mask: MicMask,
    coordinates: Optional[Sequence[float]] = None,
) -> RirMatrix:
    """
    Fill missing columns by per-sample natural cubic splines over the
    microphone coordinate.

    With 2 measured columns a line is used, with 3 an exact quadratic.
    Outside the measured hull the interpolant continues linearly along the
    tangent at the boundary knot. Measured columns are returned unchanged.

    Args:
        rirs: Matrix whose measured columns hold data (missing ones are ignored)
        mask: Measured/missing flags per column
        coordinates: Position of each microphone along the interpolation
            axis; defaults to the column index

    Returns:
        RirMatrix with missing columns filled
    """
    logger = get_logger("interp")
    if mask.size != rirs.num_mics:
        raise ShapeMismatchError(f"Mask has {mask.size} entries for {rirs.num_mics} microphones")
    if mask.all_measured:
        return RirMatrix(rirs.data.copy(), rirs.sample_rate)
    if mask.M < 2:
        raise InvalidInputError(f"Spline interpolation needs >= 2 measured microphones, got {mask.M}")

    coords = np.arange(rirs.num_mics, dtype=float) if coordinates is None else np.asarray(coordinates, dtype=float)
    if coords.shape != (rirs.num_mics,):
        raise ShapeMismatchError(f"Expected {rirs.num_mics} coordinates, got {coords.shape}")

    known = mask.measured
    order = np.argsort(coords[known], kind="stable")
    known = known[order]
    x_known = coords[known]
    if np.any(np.diff(x_known) <= 0):
        raise InvalidInputError("Measured microphone coordinates must be distinct")
    y_known = rirs.data[:, known].T  # (M, K)

    if mask.M == 2:
        value, slope = _polynomial_fit(x_known, y_known, 1)
    elif mask.M == 3:
        value, slope = _polynomial_fit(x_known, y_known, 2)
    else:
        value, slope = _natural_spline(x_known, y_known)

    missing = mask.missing
    x_missing = coords[missing]
    lo, hi = x_known[0], x_known[-1]
    inside = (x_missing >= lo) & (x_missing <= hi)

    filled = np.empty((rirs.num_samples, missing.size))
    if inside.any():
        filled[:, inside] = np.asarray(value(x_missing[inside])).T
    for edge, side in ((lo, x_missing < lo), (hi, x_missing > hi)):
        if side.any():
            base = np.asarray(value(np.array([edge])))[0]
            tangent = np.asarray(slope(np.array([edge])))[0]
            filled[:, side] = base[:, None] + tangent[:, None] * (x_missing[side] - edge)[None, :]

    out = rirs.data.copy()
    out[:, missing] = filled
    logger.debug(f"SCI filled {missing.size} columns from {mask.M} measured")
    return RirMatrix(out, rirs.sample_rate)
