"""
Binary RIR archive: a fixed little-endian header followed by the RIR
matrix as column-major float32.

Layout:
    offset 0   magic "RIRA" (4 bytes)
    offset 4   version, uint16 (= 1)
    offset 6   reserved, uint16 (= 0)
    offset 8   sample rate, uint32
    offset 12  K (samples per RIR), uint32
    offset 16  N (microphones), uint32
    offset 20  microphone positions, N×3 float64
    ...        source position, 3 float64
    ...        payload, 4·K·N bytes: column 0 samples, then column 1, ...

Measured data can be converted by writing the per-microphone responses
and positions with `export_rir_archive`.
"""

import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .core import RirInpaintError, RirMatrix, ShapeMismatchError
from .logger import get_logger
from .roomsim import ArrayGeometry

MAGIC = b"RIRA"
VERSION = 1
_FIXED = struct.Struct("<4sHHIII")


class ArchiveFormatError(RirInpaintError):
    """Raised when an archive does not follow the format; `offset` is the failing byte offset."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"byte offset {offset}: {message}")


def header_size(num_mics: int) -> int:
    return _FIXED.size + 8 * 3 * num_mics + 8 * 3


def encode_rir_archive(rirs: RirMatrix, geometry: ArrayGeometry) -> bytes:
    """Serialize an RIR matrix and its geometry."""
    if geometry.num_mics != rirs.num_mics:
        raise ShapeMismatchError(
            f"Geometry has {geometry.num_mics} microphones, RIR matrix has {rirs.num_mics}"
        )
    header = _FIXED.pack(MAGIC, VERSION, 0, rirs.sample_rate, rirs.num_samples, rirs.num_mics)
    positions = geometry.mic_positions.astype("<f8").tobytes()
    source = geometry.source_position.astype("<f8").tobytes()
    payload = rirs.data.T.astype("<f4").tobytes()
    return header + positions + source + payload


def decode_rir_archive(raw: bytes) -> Tuple[RirMatrix, ArrayGeometry]:
    """Parse archive bytes; errors name the byte offset where parsing failed."""
    if len(raw) < _FIXED.size:
        raise ArchiveFormatError(f"header needs {_FIXED.size} bytes, file has {len(raw)}", len(raw))
    magic, version, _, sample_rate, num_samples, num_mics = _FIXED.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ArchiveFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise ArchiveFormatError(f"unsupported version {version}, expected {VERSION}", 4)
    if sample_rate == 0:
        raise ArchiveFormatError("sample rate must be positive", 8)
    if num_samples == 0 or num_mics == 0:
        raise ArchiveFormatError(f"empty matrix K={num_samples}, N={num_mics}", 12)

    offset = _FIXED.size
    positions_end = header_size(num_mics)
    if len(raw) < positions_end:
        raise ArchiveFormatError(
            f"positions need {positions_end - offset} bytes, found {max(len(raw) - offset, 0)}", offset
        )
    mics = np.frombuffer(raw, dtype="<f8", count=3 * num_mics, offset=offset).reshape(num_mics, 3)
    source = np.frombuffer(raw, dtype="<f8", count=3, offset=offset + 24 * num_mics)

    expected = 4 * num_samples * num_mics
    actual = len(raw) - positions_end
    if actual != expected:
        raise ArchiveFormatError(
            f"payload should be {expected} bytes (4·K·N), found {actual}", positions_end
        )
    payload = np.frombuffer(raw, dtype="<f4", offset=positions_end).reshape(num_mics, num_samples)
    rirs = RirMatrix(payload.T.astype(np.float64), int(sample_rate))
    return rirs, ArrayGeometry(mics.copy(), source.copy(), name="archive")


def export_rir_archive(path: Union[str, Path], rirs: RirMatrix, geometry: ArrayGeometry) -> Path:
    """
    Write an archive file.

    Args:
        path: Output file
        rirs: RIR matrix (stored as float32)
        geometry: Microphone and source positions

    Returns:
        Path of the written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_rir_archive(rirs, geometry))
    get_logger("archive").info(f"Archive written: {path} (K={rirs.num_samples}, N={rirs.num_mics})")
    return path


def import_rir_archive(path: Union[str, Path]) -> Tuple[RirMatrix, ArrayGeometry]:
    """Read an archive file written by `export_rir_archive`."""
    path = Path(path)
    rirs, geometry = decode_rir_archive(path.read_bytes())
    get_logger("archive").info(f"Archive read: {path} (K={rirs.num_samples}, N={rirs.num_mics})")
    return rirs, geometry
