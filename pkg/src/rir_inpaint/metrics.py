"""
Reconstruction and enhancement metrics: NMSE, cosine distance, SIR
improvement, SI-SDR, energy decay curves and T60.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.signal import correlate, correlation_lags

from .core import InvalidInputError, MicMask, RirMatrix, ShapeMismatchError
from .logger import get_logger

NMSE_FLOOR_DB = -120.0
SI_SDR_CLAMP_DB = 60.0
EDC_FLOOR_DB = -300.0


@dataclass
class CosineDistance:
    value: float
    degenerate_columns: List[int]


@dataclass
class T60Estimate:
    """
    Attributes:
        seconds: Reverberation time extrapolated to 60 dB
        reliable: False when the EDC never reaches the lower fit bound
        fit_start: First sample of the fit range
        fit_end: Last sample of the fit range (inclusive)
        slope: Fitted decay rate in dB/s
    """

    seconds: float
    reliable: bool
    fit_start: int
    fit_end: int
    slope: float


def _missing_pairs(true_rirs: RirMatrix, estimated_rirs: RirMatrix, mask: MicMask) -> Tuple[np.ndarray, np.ndarray]:
    if true_rirs.shape != estimated_rirs.shape:
        raise ShapeMismatchError(f"Shapes differ: {true_rirs.shape} vs {estimated_rirs.shape}")
    if mask.size != true_rirs.num_mics:
        raise ShapeMismatchError(f"Mask has {mask.size} entries for {true_rirs.num_mics} microphones")
    if mask.L == 0:
        raise InvalidInputError("No missing columns to score")
    return true_rirs.data[:, mask.missing], estimated_rirs.data[:, mask.missing]


def nmse(true_rirs: RirMatrix, estimated_rirs: RirMatrix, mask: MicMask) -> float:
    """
    Normalized MSE over the missing columns in dB, floored at -120 dB.

    Args:
        true_rirs: Ground truth (K, N)
        estimated_rirs: Reconstruction (K, N)
        mask: Measured/missing flags; only missing columns are scored

    Returns:
        NMSE in dB
    """
    h, h_est = _missing_pairs(true_rirs, estimated_rirs, mask)
    energy = np.sum(h ** 2, axis=0)
    if np.any(energy == 0):
        raise InvalidInputError("Ground-truth column with zero energy")
    ratio = float(np.mean(np.sum((h_est - h) ** 2, axis=0) / energy))
    if ratio <= 0:
        return NMSE_FLOOR_DB
    return max(10.0 * np.log10(ratio), NMSE_FLOOR_DB)


def cosine_distance(true_rirs: RirMatrix, estimated_rirs: RirMatrix, mask: MicMask) -> CosineDistance:
    """
    Mean of 1 - cos^2 between true and estimated missing columns.

    A zero estimate column counts as distance 1 and is reported.
    """
    h, h_est = _missing_pairs(true_rirs, estimated_rirs, mask)
    norm_h = np.linalg.norm(h, axis=0)
    norm_est = np.linalg.norm(h_est, axis=0)
    if np.any(norm_h == 0):
        raise InvalidInputError("Ground-truth column with zero energy")

    degenerate = norm_est == 0
    distances = np.ones(h.shape[1])
    ok = ~degenerate
    cos = np.sum(h[:, ok] * h_est[:, ok], axis=0) / (norm_h[ok] * norm_est[ok])
    distances[ok] = 1.0 - np.clip(cos ** 2, 0.0, 1.0)

    columns = [int(c) for c in mask.missing[degenerate]]
    if columns:
        get_logger("metrics").warning(f"Zero-energy estimate columns {columns} scored as distance 1")
    return CosineDistance(value=float(np.mean(distances)), degenerate_columns=columns)


def align_signals(reference: np.ndarray, estimate: np.ndarray, max_lag: int) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Align the estimate to the reference by the cross-correlation peak.

    Args:
        reference: Reference signal
        estimate: Signal to align
        max_lag: Largest delay searched in either direction

    Returns:
        (reference, estimate, lag) with equal-length overlapping parts; a
        positive lag means the estimate lags the reference
    """
    ref = np.asarray(reference, dtype=np.float64).ravel()
    est = np.asarray(estimate, dtype=np.float64).ravel()
    if max_lag > 0:
        corr = correlate(est, ref, mode="full")
        lags = correlation_lags(est.size, ref.size, mode="full")
        window = np.abs(lags) <= max_lag
        lag = int(lags[window][np.argmax(np.abs(corr[window]))])
    else:
        lag = 0

    if lag >= 0:
        est = est[lag:]
    else:
        ref = ref[-lag:]
    n = min(ref.size, est.size)
    return ref[:n], est[:n], lag


def si_sdr(reference: np.ndarray, estimate: np.ndarray, max_lag: int = 0) -> float:
    """
    Scale-invariant SDR in dB, clamped to [-60, 60].

    Args:
        reference: Clean target signal
        estimate: Enhanced signal
        max_lag: Integer-delay search range for alignment (0 disables it)

    Returns:
        SI-SDR in dB
    """
    ref, est, _ = align_signals(reference, estimate, max_lag)
    ref_energy = float(np.dot(ref, ref))
    if ref.size == 0 or ref_energy == 0:
        raise InvalidInputError("Reference signal is silent")

    target = (np.dot(est, ref) / ref_energy) * ref
    residual = est - target
    target_energy = float(np.dot(target, target))
    residual_energy = float(np.dot(residual, residual))
    if residual_energy <= 1e-20 * max(target_energy, 1e-300):
        return SI_SDR_CLAMP_DB
    if target_energy == 0:
        return -SI_SDR_CLAMP_DB
    value = 10.0 * np.log10(target_energy / residual_energy)
    return float(np.clip(value, -SI_SDR_CLAMP_DB, SI_SDR_CLAMP_DB))


def _energy(x: np.ndarray, name: str) -> float:
    e = float(np.mean(np.asarray(x, dtype=np.float64) ** 2))
    if e == 0:
        raise InvalidInputError(f"{name} segment is silent")
    return e


def sir_improvement(
    speech_out: np.ndarray,
    noise_out: np.ndarray,
    speech_in: np.ndarray,
    noise_in: np.ndarray,
) -> float:
    """
    Output SIR minus input SIR at the reference microphone, in dB.

    Args:
        speech_out: Beamformer output for the speech-only component
        noise_out: Beamformer output for the noise-only component
        speech_in: Speech-only signal at the reference microphone
        noise_in: Noise-only signal at the reference microphone

    Returns:
        SIR improvement in dB
    """
    out_sir = 10.0 * np.log10(_energy(speech_out, "Speech output") / _energy(noise_out, "Noise output"))
    in_sir = 10.0 * np.log10(_energy(speech_in, "Speech input") / _energy(noise_in, "Noise input"))
    return float(out_sir - in_sir)


def edc(rir: np.ndarray) -> np.ndarray:
    """
    Schroeder backward-integrated energy decay curve in dB (EDC(0) = 0).
    """
    h = np.asarray(rir, dtype=np.float64).ravel()
    energy = h ** 2
    total = energy.sum()
    if total == 0:
        raise InvalidInputError("Cannot compute the energy decay of an all-zero response")
    remaining = np.cumsum(energy[::-1])[::-1] / total
    with np.errstate(divide="ignore"):
        curve = 10.0 * np.log10(remaining)
    curve[0] = 0.0
    return np.maximum(curve, EDC_FLOOR_DB)


def estimate_t60(
    edc_db: np.ndarray, sample_rate: int, start_db: float = -5.0, end_db: float = -25.0
) -> T60Estimate:
    """
    T60 from a least-squares line fit on the EDC between start_db and end_db,
    extrapolated to a 60 dB decay.

    Args:
        edc_db: Energy decay curve in dB
        sample_rate: Sampling rate in Hz
        start_db: Upper bound of the fit range
        end_db: Lower bound of the fit range

    Returns:
        T60Estimate; `reliable` is False when the curve never reaches end_db
    """
    curve = np.asarray(edc_db, dtype=np.float64).ravel()
    if sample_rate <= 0:
        raise InvalidInputError(f"Sample rate must be positive, got {sample_rate}")
    below_start = np.flatnonzero(curve <= start_db)
    if below_start.size == 0:
        get_logger("metrics").warning(f"EDC never falls below {start_db} dB; T60 undefined")
        return T60Estimate(float("nan"), False, 0, 0, float("nan"))

    first = int(below_start[0])
    below_end = np.flatnonzero(curve <= end_db)
    reliable = below_end.size > 0
    if reliable:
        last = int(below_end[0])
    else:
        valid = np.flatnonzero(curve > EDC_FLOOR_DB)
        last = int(valid[-1]) if valid.size else curve.size - 1
        get_logger("metrics").warning(f"EDC never reaches {end_db} dB; T60 estimate unreliable")

    if last - first < 1:
        return T60Estimate(float("nan"), False, first, last, float("nan"))
    times = np.arange(first, last + 1) / sample_rate
    slope, _ = np.polyfit(times, curve[first:last + 1], 1)
    seconds = -60.0 / slope if slope < 0 else float("inf")
    return T60Estimate(float(seconds), reliable, first, last, float(slope))
