"""
Utility functions for file handling: output directories, WAV I/O and
run manifests.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import soundfile as sf

from .core import InvalidInputError

WAV_SUBTYPES = {"pcm16": "PCM_16", "float32": "FLOAT"}


def ensure_output_directory(output_path: Union[str, Path]) -> Path:
    """
    Ensure output directory exists.

    Args:
        output_path: Path to output directory

    Returns:
        Path object for the directory
    """
    path = Path(output_path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def read_wav(path: Union[str, Path]) -> Tuple[np.ndarray, int]:
    """
    Read a mono WAV file (16-bit PCM or 32-bit float).

    Multichannel files are reduced to their first channel.

    Returns:
        (float64 signal, sample rate)
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"WAV file not found: {path}")
    data, sample_rate = sf.read(str(path), dtype="float64", always_2d=True)
    return data[:, 0], int(sample_rate)


def write_wav(
    path: Union[str, Path], signal: np.ndarray, sample_rate: int, subtype: str = "float32"
) -> Path:
    """
    Write a WAV file.

    Args:
        path: Output file
        signal: (T,) mono or (C, T) multichannel samples
        sample_rate: Sampling rate in Hz
        subtype: "float32" or "pcm16" (PCM input is clipped to [-1, 1])

    Returns:
        Path of the written file
    """
    if subtype not in WAV_SUBTYPES:
        raise InvalidInputError(f"Unknown WAV subtype '{subtype}', expected one of {tuple(WAV_SUBTYPES)}")
    data = np.asarray(signal, dtype=np.float64)
    if data.ndim == 2:
        data = data.T
    if subtype == "pcm16":
        data = np.clip(data, -1.0, 1.0)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), data.astype(np.float32), int(sample_rate), subtype=WAV_SUBTYPES[subtype])
    return path


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_json(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    """Write JSON with sorted keys and a trailing newline."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path
