"""
STFT analysis/synthesis, ATF steering vectors, noise covariance estimation,
MVDR beamforming and the null-projection alignment distance.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.signal import check_COLA, get_window

from .core import InvalidInputError, RirInpaintError, RirMatrix, ShapeMismatchError
from .logger import get_logger

WINDOWS = ("sqrt-hann",)
DEFAULT_LOADING = 1e-4
NULL_STEERING_RATIO = 1e-8


class SingularCovarianceError(RirInpaintError):
    """Raised when a noise covariance is not positive definite after loading."""


@dataclass(frozen=True)
class StftConfig:
    """
    STFT parameters. The squared window must satisfy COLA at the given hop
    so that weighted overlap-add reconstructs the input.
    """

    frame_length: int = 512
    hop: int = 256
    fft_size: int = 512
    window: str = "sqrt-hann"

    def __post_init__(self):
        if self.window not in WINDOWS:
            raise InvalidInputError(f"Unknown window '{self.window}', expected one of {WINDOWS}")
        if not 1 <= self.hop <= self.frame_length:
            raise InvalidInputError(f"Hop must be in [1, {self.frame_length}], got {self.hop}")
        if self.fft_size < self.frame_length:
            raise InvalidInputError(
                f"FFT size {self.fft_size} is smaller than frame length {self.frame_length}"
            )
        if not check_COLA(self.window_array() ** 2, self.frame_length, self.frame_length - self.hop):
            raise InvalidInputError(
                f"Window '{self.window}' with frame {self.frame_length} and hop {self.hop} violates COLA"
            )

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def window_array(self) -> np.ndarray:
        return np.sqrt(get_window("hann", self.frame_length, fftbins=True))


@dataclass(frozen=True)
class SpectralField:
    """
    Per-bin complex vectors over N channels.

    Attributes:
        values: Complex array of shape (F, N)
        freqs: Bin centre frequencies in Hz, shape (F,)
    """

    values: np.ndarray
    freqs: np.ndarray

    @property
    def num_bins(self) -> int:
        return self.values.shape[0]

    @property
    def num_channels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NoiseCovariance:
    """Per-bin Hermitian N×N matrices, shape (F, N, N)."""

    matrices: np.ndarray

    @property
    def num_bins(self) -> int:
        return self.matrices.shape[0]

    @property
    def num_channels(self) -> int:
        return self.matrices.shape[1]

    def select(self, channels) -> "NoiseCovariance":
        idx = np.asarray(channels)
        return NoiseCovariance(self.matrices[:, idx[:, None], idx[None, :]])


@dataclass
class MvdrWeights:
    """
    Attributes:
        weights: Complex array (F, N); output = sum_n conj(w_n) y_n
        null_bins: True where the steering vector was negligible and the
            weights were set to zero
    """

    weights: np.ndarray
    null_bins: np.ndarray


@dataclass
class DistResult:
    """
    Attributes:
        total: Sum of per-bin terms over evaluated bins
        mean: total divided by the number of evaluated bins
        per_bin: Per-bin terms, NaN where a bin was skipped
        evaluated: True for bins included in the sum
    """

    total: float
    mean: float
    per_bin: np.ndarray
    evaluated: np.ndarray


def _padding(config: StftConfig) -> int:
    return config.frame_length - config.hop


def stft(signal: np.ndarray, config: StftConfig = StftConfig()) -> np.ndarray:
    """
    Short-time Fourier transform along the last axis.

    The signal is padded with frame_length - hop zeros at both ends so that
    every sample is covered by a full set of overlapping frames.

    Args:
        signal: Real array (..., T)
        config: STFT configuration

    Returns:
        Complex array (..., frames, F)
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[-1] < 1:
        raise InvalidInputError("Cannot transform an empty signal")
    pad = _padding(config)
    length = x.shape[-1] + 2 * pad
    extra = (-(length - config.frame_length)) % config.hop if length > config.frame_length else config.frame_length - length
    widths = [(0, 0)] * (x.ndim - 1) + [(pad, pad + extra)]
    padded = np.pad(x, widths)

    frames = np.lib.stride_tricks.sliding_window_view(padded, config.frame_length, axis=-1)
    frames = frames[..., ::config.hop, :] * config.window_array()
    return np.fft.rfft(frames, n=config.fft_size, axis=-1)


def istft(frames: np.ndarray, config: StftConfig = StftConfig(), length: Optional[int] = None) -> np.ndarray:
    """
    Weighted overlap-add inverse of `stft`.

    Args:
        frames: Complex array (..., frames, F)
        config: STFT configuration used for analysis
        length: Output length in samples (defaults to the full padded span)

    Returns:
        Real array (..., length)
    """
    spectra = np.asarray(frames)
    if spectra.shape[-1] != config.num_bins:
        raise ShapeMismatchError(f"Expected {config.num_bins} bins, got {spectra.shape[-1]}")
    window = config.window_array()
    num_frames = spectra.shape[-2]
    span = config.frame_length + config.hop * (num_frames - 1)

    segments = np.fft.irfft(spectra, n=config.fft_size, axis=-1)[..., :config.frame_length] * window
    out = np.zeros(spectra.shape[:-2] + (span,))
    envelope = np.zeros(span)
    for i in range(num_frames):
        start = i * config.hop
        out[..., start:start + config.frame_length] += segments[..., i, :]
        envelope[start:start + config.frame_length] += window ** 2

    covered = envelope > 1e-10
    out[..., covered] /= envelope[covered]

    pad = _padding(config)
    if length is None:
        length = span - 2 * pad
    result = out[..., pad:pad + length]
    if result.shape[-1] < length:
        widths = [(0, 0)] * (result.ndim - 1) + [(0, length - result.shape[-1])]
        result = np.pad(result, widths)
    return result


def atf_steering(rirs: RirMatrix, fft_size: int) -> SpectralField:
    """
    Full acoustic transfer function of each RIR column (no normalization).

    Columns longer than fft_size are truncated with a warning.
    """
    if fft_size < 1:
        raise InvalidInputError(f"FFT size must be positive, got {fft_size}")
    if rirs.num_samples > fft_size:
        get_logger("beamform").warning(
            f"RIR length {rirs.num_samples} exceeds FFT size {fft_size}; truncating"
        )
    values = np.fft.rfft(rirs.data, n=fft_size, axis=0)
    freqs = np.fft.rfftfreq(fft_size, d=1.0 / rirs.sample_rate)
    return SpectralField(values=values, freqs=freqs)


def steering_for_stft(
    rirs: RirMatrix, config: StftConfig = StftConfig(), dft_size: Optional[int] = None
) -> SpectralField:
    """
    ATF steering sampled on the STFT bin grid.

    The DFT is taken over the whole RIR with a size that is a multiple of
    the STFT FFT size, then every (dft_size / fft_size)-th bin is kept.

    Args:
        rirs: Impulse responses (K, N)
        config: STFT configuration
        dft_size: DFT length; defaults to the smallest valid multiple >= K

    Returns:
        SpectralField with F = fft_size / 2 + 1 bins
    """
    if dft_size is None:
        dft_size = config.fft_size * max(1, -(-rirs.num_samples // config.fft_size))
    if dft_size % config.fft_size:
        raise InvalidInputError(f"DFT size {dft_size} is not a multiple of FFT size {config.fft_size}")
    full = atf_steering(rirs, dft_size)
    step = dft_size // config.fft_size
    return SpectralField(values=full.values[::step], freqs=full.freqs[::step])


def estimate_noise_cov(noise_stft: np.ndarray, loading: float = DEFAULT_LOADING) -> NoiseCovariance:
    """
    Spatial noise covariance per bin with diagonal loading.

    Phi(f) = (1/T) sum_t y y^H + loading * tr(Phi)/N * I

    Args:
        noise_stft: Complex array (N, frames, F) of noise-only frames
        loading: Diagonal loading factor relative to the mean channel power

    Returns:
        NoiseCovariance with matrices of shape (F, N, N)
    """
    Y = np.asarray(noise_stft)
    if Y.ndim != 3:
        raise ShapeMismatchError(f"Expected (channels, frames, bins), got shape {Y.shape}")
    num_channels, num_frames, _ = Y.shape
    if num_frames == 0:
        raise InvalidInputError("Noise covariance needs at least one frame")
    if num_frames < num_channels:
        get_logger("beamform").warning(
            f"Only {num_frames} noise frames for {num_channels} channels; loading dominates"
        )

    phi = np.einsum("ntf,mtf->fnm", Y, Y.conj()) / num_frames
    trace = np.real(np.trace(phi, axis1=1, axis2=2))
    phi = phi + (loading * trace / num_channels)[:, None, None] * np.eye(num_channels)[None]
    phi = 0.5 * (phi + np.conj(np.swapaxes(phi, -1, -2)))
    return NoiseCovariance(phi)


def mvdr_weights(
    steering: Union[SpectralField, np.ndarray], covariance: NoiseCovariance
) -> MvdrWeights:
    """
    MVDR weights w = Phi^-1 d / (d^H Phi^-1 d) via a Hermitian solve.

    Bins whose steering norm is below 1e-8 of the largest get zero weights
    and are flagged.

    Args:
        steering: SpectralField or complex array (F, N)
        covariance: Noise covariance with matching F and N

    Returns:
        MvdrWeights
    """
    d = steering.values if isinstance(steering, SpectralField) else np.asarray(steering)
    phi = covariance.matrices
    if d.ndim != 2 or phi.shape != (d.shape[0], d.shape[1], d.shape[1]):
        raise ShapeMismatchError(f"Steering {d.shape} does not match covariance {phi.shape}")

    phi = 0.5 * (phi + np.conj(np.swapaxes(phi, -1, -2)))
    try:
        np.linalg.cholesky(phi)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("Noise covariance is not positive definite after loading") from exc

    norms = np.linalg.norm(d, axis=1)
    null_bins = norms < NULL_STEERING_RATIO * norms.max() if norms.max() > 0 else np.ones(d.shape[0], dtype=bool)
    if null_bins.any():
        get_logger("beamform").debug(f"{int(null_bins.sum())} bins with negligible steering set to zero")

    safe = np.where(null_bins[:, None], 1.0, d)
    numerator = np.linalg.solve(phi, safe[..., None])[..., 0]
    denominator = np.einsum("fn,fn->f", safe.conj(), numerator)
    weights = numerator / denominator[:, None]
    weights[null_bins] = 0.0
    return MvdrWeights(weights=weights, null_bins=null_bins)


def _weight_array(weights: Union[MvdrWeights, np.ndarray]) -> np.ndarray:
    return weights.weights if isinstance(weights, MvdrWeights) else np.asarray(weights)


def apply_beamformer(
    weights: Union[MvdrWeights, np.ndarray],
    multichannel_stft: np.ndarray,
    config: StftConfig = StftConfig(),
    length: Optional[int] = None,
) -> np.ndarray:
    """
    Filter-and-sum in the STFT domain, then resynthesize.

    Args:
        weights: Weights (F, N)
        multichannel_stft: Complex array (N, frames, F)
        config: STFT configuration
        length: Output length in samples

    Returns:
        Enhanced time signal
    """
    w = _weight_array(weights)
    Y = np.asarray(multichannel_stft)
    if Y.ndim != 3 or w.shape != (Y.shape[2], Y.shape[0]):
        raise ShapeMismatchError(f"Weights {w.shape} do not match STFT {Y.shape}")
    output = np.einsum("fn,ntf->tf", w.conj(), Y)
    return istft(output, config, length)


def noise_output_power(weights: Union[MvdrWeights, np.ndarray], covariance: NoiseCovariance) -> np.ndarray:
    """Per-bin output noise power w^H Phi w."""
    w = _weight_array(weights)
    return np.real(np.einsum("fn,fnm,fm->f", w.conj(), covariance.matrices, w))


def null_projection_dist(
    true_rirs: RirMatrix,
    estimated_rirs: RirMatrix,
    fft_size: Optional[int] = None,
    exclude_dc: bool = True,
) -> DistResult:
    """
    Alignment distance between true and estimated array responses.

    Per bin, h is projected onto the orthogonal complement of the estimate:
    d = (I - h_est h_est^H / ||h_est||^2) h, and the term is ||d|| / ||h||.
    Bins where either response vanishes are skipped and flagged.

    Args:
        true_rirs: Ground-truth RIRs (K, N)
        estimated_rirs: Estimated RIRs, same shape
        fft_size: DFT length (defaults to K)
        exclude_dc: Leave bin 0 out of the sum

    Returns:
        DistResult
    """
    if true_rirs.shape != estimated_rirs.shape:
        raise ShapeMismatchError(f"Shapes differ: {true_rirs.shape} vs {estimated_rirs.shape}")
    n = fft_size or true_rirs.num_samples
    h = np.fft.rfft(true_rirs.data, n=n, axis=0)
    h_est = np.fft.rfft(estimated_rirs.data, n=n, axis=0)

    norm_h = np.linalg.norm(h, axis=1)
    norm_est = np.linalg.norm(h_est, axis=1)
    evaluated = (norm_h > 1e-12 * max(norm_h.max(), 1e-300)) & (norm_est > 1e-12 * max(norm_est.max(), 1e-300))
    if exclude_dc:
        evaluated[0] = False
    if not evaluated.any():
        raise InvalidInputError("All frequency bins are degenerate; distance undefined")

    skipped = int((~evaluated).sum()) - int(exclude_dc)
    if skipped > 0:
        get_logger("beamform").warning(f"Skipped {skipped} degenerate bins in null-projection distance")

    per_bin = np.full(h.shape[0], np.nan)
    he, hh = h_est[evaluated], h[evaluated]
    coeff = np.einsum("fn,fn->f", he.conj(), hh) / norm_est[evaluated] ** 2
    residual = hh - coeff[:, None] * he
    per_bin[evaluated] = np.linalg.norm(residual, axis=1) / norm_h[evaluated]

    total = float(np.sum(per_bin[evaluated]))
    return DistResult(total=total, mean=total / int(evaluated.sum()), per_bin=per_bin, evaluated=evaluated)
