"""
Domain types shared by all modules, plus patch tiling and normalization
used by the inpainting pipeline.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

GAIN_FLOOR = 1e-8
PAD_POLICIES = ("reflect", "zero")


class RirInpaintError(Exception):
    """Base class for all errors raised by the package."""


class InvalidInputError(RirInpaintError, ValueError):
    """Raised when an operation's preconditions are violated."""


class ShapeMismatchError(InvalidInputError):
    """Raised when array shapes disagree."""


@dataclass(frozen=True)
class RirMatrix:
    """
    K×N matrix of impulse responses, one column per microphone.

    Attributes:
        data: Real array of shape (K, N)
        sample_rate: Sampling rate in Hz
    """

    data: np.ndarray
    sample_rate: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise InvalidInputError(f"RIR matrix must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidInputError(f"RIR matrix must be non-empty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("RIR matrix contains non-finite values")
        if int(self.sample_rate) <= 0:
            raise InvalidInputError(f"Sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def num_samples(self) -> int:
        return self.data.shape[0]

    @property
    def num_mics(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    def column(self, index: int) -> np.ndarray:
        return self.data[:, index]

    def select(self, columns: Sequence[int]) -> "RirMatrix":
        """Return the sub-matrix made of the given columns."""
        return RirMatrix(self.data[:, list(columns)], self.sample_rate)

    def with_columns(self, indices: Sequence[int], values: np.ndarray) -> "RirMatrix":
        """Return a copy with the given columns replaced."""
        data = self.data.copy()
        data[:, list(indices)] = values
        return RirMatrix(data, self.sample_rate)


@dataclass(frozen=True)
class MicMask:
    """
    Column-wise availability mask: True = measured, False = missing.
    """

    flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool)
        if flags.ndim != 1 or flags.size < 1:
            raise InvalidInputError("Mask must be a non-empty boolean vector")
        if not flags.any():
            raise InvalidInputError("Mask must contain at least one measured microphone")
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)

    @classmethod
    def from_missing(cls, num_mics: int, missing: Sequence[int]) -> "MicMask":
        flags = np.ones(num_mics, dtype=bool)
        missing = list(missing)
        if any(i < 0 or i >= num_mics for i in missing):
            raise InvalidInputError(f"Missing indices {missing} out of range for {num_mics} microphones")
        flags[missing] = False
        return cls(flags)

    @classmethod
    def from_measured(cls, num_mics: int, measured: Sequence[int]) -> "MicMask":
        flags = np.zeros(num_mics, dtype=bool)
        measured = list(measured)
        if any(i < 0 or i >= num_mics for i in measured):
            raise InvalidInputError(f"Measured indices {measured} out of range for {num_mics} microphones")
        flags[measured] = True
        return cls(flags)

    @classmethod
    def all_true(cls, num_mics: int) -> "MicMask":
        return cls(np.ones(num_mics, dtype=bool))

    @property
    def size(self) -> int:
        return self.flags.size

    @property
    def measured(self) -> np.ndarray:
        return np.flatnonzero(self.flags)

    @property
    def missing(self) -> np.ndarray:
        return np.flatnonzero(~self.flags)

    @property
    def M(self) -> int:
        return int(self.flags.sum())

    @property
    def L(self) -> int:
        return self.size - self.M

    @property
    def all_measured(self) -> bool:
        return self.L == 0

    @property
    def ratio(self) -> float:
        """Fraction of missing microphones."""
        return self.L / self.size


@dataclass(frozen=True)
class PatchGrid:
    """
    Patch tiling parameters (rows = time samples, columns = microphones).
    """

    patch_height: int = 64
    patch_width: int = 64
    stride_rows: int = 32
    stride_cols: int = 32
    pad_policy: str = "reflect"

    def __post_init__(self):
        if self.patch_height < 1 or self.patch_width < 1:
            raise InvalidInputError("Patch dimensions must be positive")
        if not 1 <= self.stride_rows <= self.patch_height:
            raise InvalidInputError(
                f"Row stride must be in [1, {self.patch_height}], got {self.stride_rows}"
            )
        if not 1 <= self.stride_cols <= self.patch_width:
            raise InvalidInputError(
                f"Column stride must be in [1, {self.patch_width}], got {self.stride_cols}"
            )
        if self.pad_policy not in PAD_POLICIES:
            raise InvalidInputError(f"Unknown pad policy '{self.pad_policy}'")

    @property
    def patch_shape(self) -> Tuple[int, int]:
        return self.patch_height, self.patch_width

    def fit(self, shape: Tuple[int, int]) -> "PatchGrid":
        """Clamp patch width (and column stride) to the number of columns."""
        width = min(self.patch_width, shape[1])
        return PatchGrid(
            patch_height=self.patch_height,
            patch_width=width,
            stride_rows=self.stride_rows,
            stride_cols=min(self.stride_cols, width),
            pad_policy=self.pad_policy,
        )


@dataclass(frozen=True)
class PatchScale:
    """Affine normalization of one patch: x_norm = (x - offset) / gain."""

    offset: float
    gain: float


def _axis_starts(length: int, size: int, stride: int) -> List[int]:
    if length <= size:
        return [0]
    count = -(-(length - size) // stride) + 1
    return [i * stride for i in range(count)]


def _pad_mode(grid: PatchGrid, shape: Tuple[int, int]) -> str:
    if grid.pad_policy == "zero":
        return "constant"
    return "reflect" if min(shape) > 1 else "edge"


def tile_patches(
    matrix: Union[RirMatrix, np.ndarray], grid: PatchGrid
) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """
    Split a matrix into overlapping patches.

    Args:
        matrix: RirMatrix or real 2-D array
        grid: Patch grid; the width is clamped to the number of columns

    Returns:
        (patches of shape (P, h, w), list of top-left (row, col) placements)
    """
    data = matrix.data if isinstance(matrix, RirMatrix) else np.asarray(matrix, dtype=np.float64)
    if data.ndim != 2 or data.size == 0:
        raise InvalidInputError(f"Cannot tile an empty or non-2-D matrix (shape {data.shape})")

    grid = grid.fit(data.shape)
    rows, cols = data.shape
    row_starts = _axis_starts(rows, grid.patch_height, grid.stride_rows)
    col_starts = _axis_starts(cols, grid.patch_width, grid.stride_cols)

    pad_rows = max(row_starts[-1] + grid.patch_height - rows, 0)
    pad_cols = max(col_starts[-1] + grid.patch_width - cols, 0)
    if pad_rows or pad_cols:
        canvas = np.pad(data, ((0, pad_rows), (0, pad_cols)), mode=_pad_mode(grid, data.shape))
    else:
        canvas = data

    placements = [(r, c) for r in row_starts for c in col_starts]
    patches = np.stack([
        canvas[r:r + grid.patch_height, c:c + grid.patch_width] for r, c in placements
    ])
    return patches, placements


def patch_column_flags(flags: np.ndarray, shape: Tuple[int, int], grid: PatchGrid) -> np.ndarray:
    """
    Measured-column flags of every patch `tile_patches` cuts from a matrix of
    `shape`, padded the same way as the data: reflected columns keep the flag
    of the column they mirror, zero-padded columns are unknown.

    Returns:
        Boolean array of shape (P, w), in placement order
    """
    flags = np.asarray(flags, dtype=bool).ravel()
    rows, cols = shape
    if flags.size != cols:
        raise ShapeMismatchError(f"{flags.size} column flags for a matrix with {cols} columns")

    grid = grid.fit(shape)
    row_starts = _axis_starts(rows, grid.patch_height, grid.stride_rows)
    col_starts = _axis_starts(cols, grid.patch_width, grid.stride_cols)
    pad_cols = max(col_starts[-1] + grid.patch_width - cols, 0)
    if pad_cols:
        flags = np.pad(flags, (0, pad_cols), mode=_pad_mode(grid, shape))
    return np.stack([flags[c:c + grid.patch_width] for _ in row_starts for c in col_starts])


def untile_patches(
    patches: np.ndarray,
    placements: Sequence[Tuple[int, int]],
    output_shape: Tuple[int, int],
) -> np.ndarray:
    """
    Reassemble patches by averaging every covered cell; padding is discarded.

    Args:
        patches: Array of shape (P, h, w)
        placements: Top-left (row, col) of each patch
        output_shape: (rows, cols) of the reassembled matrix

    Returns:
        Reassembled matrix
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 3 or len(placements) != patches.shape[0]:
        raise ShapeMismatchError(
            f"Got {len(placements)} placements for patches of shape {patches.shape}"
        )
    rows, cols = output_shape
    height, width = patches.shape[1:]
    for r, c in placements:
        if not (0 <= r < rows and 0 <= c < cols):
            raise InvalidInputError(f"Placement ({r}, {c}) outside output shape {output_shape}")

    canvas_rows = max(rows, max(r for r, _ in placements) + height)
    canvas_cols = max(cols, max(c for _, c in placements) + width)
    total = np.zeros((canvas_rows, canvas_cols))
    count = np.zeros((canvas_rows, canvas_cols))
    for patch, (r, c) in zip(patches, placements):
        total[r:r + height, c:c + width] += patch
        count[r:r + height, c:c + width] += 1.0

    total = total[:rows, :cols]
    count = count[:rows, :cols]
    if np.any(count == 0):
        raise InvalidInputError("Placements do not cover the output shape")
    return total / count


def normalize_patch(
    patch: np.ndarray, valid: Optional[np.ndarray] = None, gain_floor: float = GAIN_FLOOR
) -> Tuple[np.ndarray, PatchScale]:
    """
    Map a patch affinely into [-1, 1].

    Args:
        patch: Real array
        valid: Optional boolean array broadcastable to the patch; only these
            cells determine offset and gain
        gain_floor: Lower bound on the gain for constant patches

    Returns:
        (normalized patch, PatchScale)
    """
    patch = np.asarray(patch, dtype=np.float64)
    if valid is not None:
        reference = patch[np.broadcast_to(valid, patch.shape)]
        if reference.size == 0:
            reference = patch.ravel()
    else:
        reference = patch.ravel()

    high = float(reference.max())
    low = float(reference.min())
    offset = (high + low) / 2.0
    gain = max((high - low) / 2.0, gain_floor)
    return (patch - offset) / gain, PatchScale(offset=offset, gain=gain)


def denormalize_patch(patch: np.ndarray, scale: PatchScale) -> np.ndarray:
    """Undo `normalize_patch`."""
    return np.asarray(patch, dtype=np.float64) * scale.gain + scale.offset
