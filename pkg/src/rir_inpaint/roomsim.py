"""
Ground-truth RIR generation with the image-source method, noise generators
and multichannel scene rendering.
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import butter, fftconvolve, sosfiltfilt

from .core import InvalidInputError, RirMatrix
from .logger import get_logger
from .metrics import edc, estimate_t60

SPEED_OF_SOUND = 343.0
SINC_TAPS = 81
PINK_CORNER_HZ = 50.0
NOISE_KINDS = ("directional", "diffuse", "none")
NUM_WALLS = 6

# Calibration scene, as fractions of the room dimensions (receivers ~2 m from the source)
CALIBRATION_SOURCE = np.array([0.55, 0.6, 0.5])
CALIBRATION_RECEIVERS = np.array([[0.3, 0.25, 0.45], [0.75, 0.3, 0.55], [0.35, 0.8, 0.4]])
CALIBRATION_ITERATIONS = 4
CALIBRATION_TOLERANCE = 0.02


class GeometryError(InvalidInputError):
    """Raised when a source or microphone lies outside the room."""


class SimulationWarning(UserWarning):
    """Emitted when a simulation completes with degraded fidelity."""


@dataclass(frozen=True)
class RoomSpec:
    """
    Shoebox room description.

    Either `absorption` or `t60` must be given. `absorption` is one
    coefficient in (0, 1] for every wall or six, ordered (x=0, x=Lx, y=0,
    y=Ly, z=0, z=Lz). A `t60` target is converted to a uniform coefficient
    by `calibrate_absorption`. `max_reflection_order=None` keeps every image
    that arrives within the RIR length.
    """

    dimensions: Tuple[float, float, float] = (6.0, 5.5, 2.8)
    absorption: Optional[Union[float, Tuple[float, ...]]] = None
    t60: Optional[float] = 0.3
    speed_of_sound: float = SPEED_OF_SOUND
    max_reflection_order: Optional[int] = None

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dimensions)
        if len(dims) != 3 or min(dims) <= 0:
            raise InvalidInputError(f"Room dimensions must be three positive lengths, got {self.dimensions}")
        object.__setattr__(self, "dimensions", dims)
        if self.absorption is None and self.t60 is None:
            raise InvalidInputError("Room needs either an absorption coefficient or a target T60")
        if self.absorption is not None:
            values = np.atleast_1d(np.asarray(self.absorption, dtype=float)).ravel()
            if values.size not in (1, NUM_WALLS):
                raise InvalidInputError(
                    f"Absorption needs 1 or {NUM_WALLS} coefficients, got {values.size}"
                )
            if np.any(values <= 0.0) or np.any(values > 1.0):
                raise InvalidInputError(f"Absorption must be in (0, 1], got {self.absorption}")
            absorption = float(values[0]) if values.size == 1 else tuple(float(v) for v in values)
            object.__setattr__(self, "absorption", absorption)
        if self.t60 is not None and self.t60 <= 0:
            raise InvalidInputError(f"T60 must be positive, got {self.t60}")
        if self.speed_of_sound <= 0:
            raise InvalidInputError("Speed of sound must be positive")
        if self.max_reflection_order is not None and self.max_reflection_order < 0:
            raise InvalidInputError("Reflection order must be >= 0")

    @property
    def volume(self) -> float:
        lx, ly, lz = self.dimensions
        return lx * ly * lz

    @property
    def surface(self) -> float:
        lx, ly, lz = self.dimensions
        return 2.0 * (lx * ly + lx * lz + ly * lz)

    def wall_absorption(self, sample_rate: int = 8000) -> np.ndarray:
        """Absorption of the six walls, ordered (x=0, x=Lx, y=0, y=Ly, z=0, z=Lz)."""
        if self.absorption is not None:
            return np.broadcast_to(np.asarray(self.absorption, dtype=float), (NUM_WALLS,)).copy()
        alpha = calibrate_absorption(self.dimensions, float(self.t60), int(sample_rate), float(self.speed_of_sound))
        return np.full(NUM_WALLS, alpha)

    def contains(self, point: np.ndarray) -> bool:
        point = np.asarray(point, dtype=float)
        return bool(np.all(point > 0) and np.all(point < np.asarray(self.dimensions)))


@dataclass(frozen=True)
class ArrayGeometry:
    """
    Microphone positions (N×3, meters) and the source position (3, meters).
    """

    mic_positions: np.ndarray
    source_position: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        mics = np.atleast_2d(np.asarray(self.mic_positions, dtype=np.float64))
        source = np.asarray(self.source_position, dtype=np.float64).reshape(-1)
        if mics.shape[1] != 3 or mics.shape[0] < 1:
            raise InvalidInputError(f"Microphone positions must be N×3, got {mics.shape}")
        if source.shape != (3,):
            raise InvalidInputError(f"Source position must have 3 coordinates, got {source.shape}")
        object.__setattr__(self, "mic_positions", mics)
        object.__setattr__(self, "source_position", source)

    @property
    def num_mics(self) -> int:
        return self.mic_positions.shape[0]

    @property
    def center(self) -> np.ndarray:
        return self.mic_positions.mean(axis=0)

    def path_coordinates(self) -> np.ndarray:
        """Cumulative distance along the microphone ordering (interpolation axis)."""
        steps = np.linalg.norm(np.diff(self.mic_positions, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def with_source(self, source_position: Sequence[float]) -> "ArrayGeometry":
        return ArrayGeometry(self.mic_positions, np.asarray(source_position, dtype=float), self.name)

    def subset(self, indices: Sequence[int]) -> "ArrayGeometry":
        return ArrayGeometry(self.mic_positions[list(indices)], self.source_position, self.name)


@dataclass(frozen=True)
class SceneSignals:
    """
    Multichannel scene components, each of shape (N, T).

    The first `lead_in` samples contain noise only (the source is silent),
    providing noise-only frames for covariance estimation.
    """

    clean: np.ndarray
    noise: np.ndarray
    white: np.ndarray
    sample_rate: int
    noise_gain: float = 1.0
    white_gain: float = 1.0
    lead_in: int = 0
    reference_mic: int = 0

    def __post_init__(self):
        shapes = {self.clean.shape, self.noise.shape, self.white.shape}
        if len(shapes) != 1:
            raise InvalidInputError(f"Scene components differ in shape: {sorted(shapes)}")

    @property
    def noise_total(self) -> np.ndarray:
        return self.noise + self.white

    @property
    def mixture(self) -> np.ndarray:
        return self.clean + self.noise + self.white

    @property
    def num_samples(self) -> int:
        return self.clean.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """
    Structured noise description for `render_scene`.

    kind: "directional" (pink noise through `rirs`), "diffuse" (spherically
    isotropic pink field over `geometry`) or "none".
    """

    kind: str = "directional"
    rirs: Optional[RirMatrix] = None
    geometry: Optional[ArrayGeometry] = None
    num_waves: int = 256

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidInputError(f"Unknown noise kind '{self.kind}', expected one of {NOISE_KINDS}")
        if self.kind == "directional" and self.rirs is None:
            raise InvalidInputError("Directional noise needs the noise-source RIRs")
        if self.kind == "diffuse" and self.geometry is None:
            raise InvalidInputError("Diffuse noise needs the array geometry")


def eyring_absorption(dimensions: Sequence[float], t60: float) -> float:
    """Uniform wall absorption giving `t60` by Eyring's formula."""
    lx, ly, lz = (float(d) for d in dimensions)
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    alpha = 1.0 - np.exp(-0.161 * volume / (surface * t60))
    return float(np.clip(alpha, 1e-6, 1.0))


def eyring_t60(dimensions: Sequence[float], absorption: float) -> float:
    """Eyring reverberation time of a room with uniform absorption."""
    lx, ly, lz = (float(d) for d in dimensions)
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    if absorption >= 1.0:
        return 0.0
    return float(0.161 * volume / (-surface * np.log(1.0 - absorption)))


@lru_cache(maxsize=64)
def calibrate_absorption(
    dimensions: Tuple[float, float, float],
    t60: float,
    sample_rate: int = 8000,
    speed_of_sound: float = SPEED_OF_SOUND,
) -> float:
    """
    Uniform wall absorption whose image-source RIRs decay with `t60`.

    Image-source responses of a shoebox decay more slowly than Eyring's
    formula predicts, so the Eyring coefficient is only the starting point.
    Each iteration simulates RIRs at a few receivers spread over the room,
    measures the Schroeder T60 with `estimate_t60` and rescales the
    reflection coefficient: 1 - alpha' = (1 - alpha) ** (measured / t60).

    Args:
        dimensions: Room size (Lx, Ly, Lz) in meters
        t60: Target reverberation time in seconds
        sample_rate: Sampling rate of the calibration responses
        speed_of_sound: m/s

    Returns:
        Absorption coefficient in (0, 1]
    """
    logger = get_logger("roomsim")
    dims = np.asarray(dimensions, dtype=float)
    alpha = eyring_absorption(dims, t60)
    geometry = ArrayGeometry(CALIBRATION_RECEIVERS * dims, CALIBRATION_SOURCE * dims, name="calibration")
    # 0.75 * T60 reaches -45 dB, well past the -25 dB end of the fit range
    length = max(int(np.ceil(0.75 * t60 * sample_rate)), 256)

    measured = float("nan")
    for _ in range(CALIBRATION_ITERATIONS):
        if alpha >= 0.999:
            break
        room = RoomSpec(dims, absorption=alpha, t60=None, speed_of_sound=speed_of_sound)
        rirs = simulate_rir(room, geometry, length, sample_rate)
        estimates = [estimate_t60(edc(rirs.column(i)), sample_rate) for i in range(rirs.num_mics)]
        seconds = [e.seconds for e in estimates if e.reliable and np.isfinite(e.seconds)]
        if not seconds:
            logger.warning(f"No reliable T60 estimate while calibrating for {t60:.3f} s; keeping alpha {alpha:.3f}")
            break
        measured = float(np.mean(seconds))
        if abs(measured / t60 - 1.0) < CALIBRATION_TOLERANCE:
            break
        alpha = float(np.clip(1.0 - (1.0 - alpha) ** (measured / t60), 1e-6, 0.999))

    logger.info(
        f"Calibrated absorption {alpha:.3f} for T60 {t60:.3f} s "
        f"(Eyring {eyring_absorption(dims, t60):.3f}, last measured {measured:.3f} s)"
    )
    return alpha


def ula(
    num_mics: int = 16,
    spacing: float = 0.04,
    center: Sequence[float] = (3.0, 1.5, 1.5),
    source_distance: float = 2.0,
) -> ArrayGeometry:
    """
    Uniform linear array along x; the source sits at broadside (+y).
    """
    center = np.asarray(center, dtype=float)
    offsets = (np.arange(num_mics) - (num_mics - 1) / 2.0) * spacing
    mics = np.tile(center, (num_mics, 1))
    mics[:, 0] += offsets
    source = center + np.array([0.0, source_distance, 0.0])
    return ArrayGeometry(mics, source, name="ula16" if num_mics == 16 else "ula")


def _plane_points(rows: Sequence[int], cols: Sequence[int], pitch: float, corner: np.ndarray) -> np.ndarray:
    return np.array([corner + np.array([c * pitch, -r * pitch, 0.0]) for r, c in zip(rows, cols)])


def grid(
    size: int = 21,
    pitch: float = 0.05,
    corner: Sequence[float] = (2.5, 2.0, 1.5),
    source_distance: float = 2.0,
) -> ArrayGeometry:
    """Horizontal size×size grid in serpentine order; source 2 m in front."""
    corner = np.asarray(corner, dtype=float)
    rows, cols = [], []
    for r in range(size):
        order = range(size) if r % 2 == 0 else reversed(range(size))
        for c in order:
            rows.append(r)
            cols.append(c)
    mics = _plane_points(rows, cols, pitch, corner)
    source = corner + np.array([(size - 1) * pitch / 2.0, source_distance, 0.0])
    return ArrayGeometry(mics, source, name="grid")


def three_rows(
    size: int = 21,
    pitch: float = 0.05,
    corner: Sequence[float] = (2.5, 2.0, 1.5),
    source_distance: float = 2.0,
) -> ArrayGeometry:
    """First three rows of the planar grid (63 microphones for size 21)."""
    full = grid(size, pitch, corner, source_distance)
    mics = full.mic_positions[: 3 * size]
    return ArrayGeometry(mics, full.source_position, name="three_rows")


def frame(
    size: int = 21,
    pitch: float = 0.05,
    corner: Sequence[float] = (2.5, 2.0, 1.5),
    source_distance: float = 2.0,
) -> ArrayGeometry:
    """
    L-shaped boundary: the left column walked upwards, then the top row
    (41 microphones for size 21).
    """
    corner = np.asarray(corner, dtype=float)
    rows = [r for r in range(size - 1, 0, -1)] + [0] * size
    cols = [0] * (size - 1) + list(range(size))
    mics = _plane_points(rows, cols, pitch, corner)
    source = corner + np.array([(size - 1) * pitch / 2.0, source_distance, 0.0])
    return ArrayGeometry(mics, source, name="frame")


def noise_source_position(geometry: ArrayGeometry, distance: float = 2.0, angle_deg: float = 60.0) -> np.ndarray:
    """
    Directional interferer at `distance` from the array centre, `angle_deg`
    off broadside in the horizontal plane, at array height.
    """
    center = geometry.center
    broadside = geometry.source_position - center
    broadside[2] = 0.0
    norm = np.linalg.norm(broadside)
    broadside = broadside / norm if norm > 0 else np.array([0.0, 1.0, 0.0])
    angle = np.deg2rad(angle_deg)
    rotation = np.array([
        [np.cos(angle), -np.sin(angle), 0.0],
        [np.sin(angle), np.cos(angle), 0.0],
        [0.0, 0.0, 1.0],
    ])
    return center + distance * (rotation @ broadside)


def _check_inside(room: RoomSpec, geometry: ArrayGeometry):
    if not room.contains(geometry.source_position):
        raise GeometryError(f"Source {geometry.source_position.tolist()} lies outside room {room.dimensions}")
    for i, mic in enumerate(geometry.mic_positions):
        if not room.contains(mic):
            raise GeometryError(f"Microphone {i} at {mic.tolist()} lies outside room {room.dimensions}")


def _image_sources(room: RoomSpec, source: np.ndarray, max_distance: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Enumerate image sources within `max_distance` of the room.

    Along each axis an image (1 - 2q) * s + 2 m L reaches the receiver after
    |m - q| bounces on the wall at 0 and |m| on the wall at L.

    Returns:
        (positions of shape (I, 3), per-wall bounce counts of shape (I, 6)
        in the wall order of `RoomSpec.wall_absorption`)
    """
    dims = np.asarray(room.dimensions)
    reach = np.ceil(max_distance / (2.0 * dims)).astype(int) + 1
    axes_pos, axes_hits = [], []
    for axis in range(3):
        m = np.arange(-reach[axis], reach[axis] + 1)
        q = np.repeat([0, 1], m.size)
        m = np.tile(m, 2)
        axes_pos.append((1 - 2 * q) * source[axis] + 2.0 * m * dims[axis])
        axes_hits.append(np.stack([np.abs(m - q), np.abs(m)], axis=1))

    index = [i.ravel() for i in np.meshgrid(*(np.arange(p.size) for p in axes_pos), indexing="ij")]
    positions = np.stack([axes_pos[axis][index[axis]] for axis in range(3)], axis=1)
    hits = np.concatenate([axes_hits[axis][index[axis]] for axis in range(3)], axis=1)

    order = room.max_reflection_order
    keep = np.linalg.norm(positions - dims / 2.0, axis=1) <= max_distance + np.linalg.norm(dims)
    if order is not None:
        keep &= hits.sum(axis=1) <= order
    return positions[keep], hits[keep]


def simulate_rir(
    room: RoomSpec, geometry: ArrayGeometry, num_samples: int = 2048, sample_rate: int = 8000
) -> RirMatrix:
    """
    Simulate the source-to-microphone RIRs with the image-source method.

    Each image contributes the product of beta_w^k_w over the walls it
    bounced on (beta_w = sqrt(1 - alpha_w)), divided by 4*pi*d, at delay
    fs*d/c, realized with an 81-tap Hann-windowed sinc. Responses are
    truncated to `num_samples`.

    Args:
        room: Room description
        geometry: Microphone and source positions
        num_samples: RIR length K
        sample_rate: Sampling rate in Hz

    Returns:
        RirMatrix of shape (K, N)
    """
    logger = get_logger("roomsim")
    if num_samples < 1:
        raise InvalidInputError(f"RIR length must be >= 1, got {num_samples}")
    _check_inside(room, geometry)

    c = room.speed_of_sound
    alpha = room.wall_absorption(sample_rate)
    beta = np.sqrt(np.clip(1.0 - alpha, 0.0, None))
    half = SINC_TAPS // 2
    max_distance = (num_samples + half) * c / sample_rate

    images, hits = _image_sources(room, geometry.source_position, max_distance)
    # 0 ** 0 = 1: a fully absorbing wall only removes the images that bounce on it
    attenuation = np.prod(np.power(beta[None, :], hits), axis=1)
    logger.debug(f"{len(images)} image sources, wall absorption {np.round(alpha, 3).tolist()}")

    if room.t60 is not None and room.max_reflection_order is not None:
        mean_free_path = 4.0 * room.volume / room.surface
        needed = int(np.ceil(min(room.t60, num_samples / sample_rate) * c / mean_free_path))
        if room.max_reflection_order < needed:
            message = (
                f"Reflection order {room.max_reflection_order} is below the ~{needed} reflections "
                f"needed to reach the T60 target of {room.t60:.2f} s"
            )
            logger.warning(message)
            warnings.warn(message, SimulationWarning)

    taps = np.arange(-half, half + 1)
    window = 0.5 * (1.0 + np.cos(np.pi * taps / (half + 1)))
    rirs = np.zeros((num_samples, geometry.num_mics))
    for i, mic in enumerate(geometry.mic_positions):
        distance = np.linalg.norm(images - mic, axis=1)
        delay = distance * sample_rate / c
        valid = (delay < num_samples + half) & (attenuation > 0)
        delay, gain = delay[valid], attenuation[valid] / (4.0 * np.pi * distance[valid])

        centre = np.round(delay).astype(int)
        index = centre[:, None] + taps[None, :]
        values = gain[:, None] * np.sinc(index - delay[:, None]) * window[None, :]
        inside = (index >= 0) & (index < num_samples)
        rirs[:, i] = np.bincount(index[inside], weights=values[inside], minlength=num_samples)

    logger.info(
        f"Simulated {geometry.num_mics} RIRs ({num_samples} samples @ {sample_rate} Hz, "
        f"{len(images)} images)"
    )
    return RirMatrix(rirs, sample_rate)


def generate_pink_noise(
    length: int, seed: Optional[int] = None, sample_rate: int = 8000, corner_hz: float = PINK_CORNER_HZ
) -> np.ndarray:
    """
    Unit-variance pink noise with a 1/f power spectrum above `corner_hz`
    (flat below it).

    Args:
        length: Number of samples
        seed: Random seed
        sample_rate: Sampling rate in Hz
        corner_hz: Frequency below which the spectrum is flat

    Returns:
        Signal of shape (length,)
    """
    if length < 1:
        raise InvalidInputError(f"Noise length must be >= 1, got {length}")
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(length)
    if length < 2:
        return white
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(length, d=1.0 / sample_rate)
    shaping = 1.0 / np.sqrt(np.maximum(freqs, corner_hz))
    shaping[0] = 0.0
    pink = np.fft.irfft(spectrum * shaping, n=length)
    std = pink.std()
    return pink / std if std > 0 else pink


def fibonacci_directions(count: int) -> np.ndarray:
    """Near-uniform unit vectors on the sphere (Fibonacci lattice)."""
    index = np.arange(count) + 0.5
    polar = np.arccos(1.0 - 2.0 * index / count)
    azimuth = np.pi * (1.0 + np.sqrt(5.0)) * index
    return np.stack([
        np.cos(azimuth) * np.sin(polar),
        np.sin(azimuth) * np.sin(polar),
        np.cos(polar),
    ], axis=1)


def generate_diffuse_noise(
    geometry: Union[ArrayGeometry, np.ndarray],
    length: int,
    sample_rate: int = 8000,
    seed: Optional[int] = None,
    num_waves: int = 256,
    speed_of_sound: float = SPEED_OF_SOUND,
) -> np.ndarray:
    """
    Spherically isotropic noise field as a superposition of independent
    pink-noise plane waves arriving from near-uniform 3-D directions.

    Each wave is applied as a circular fractional delay in the frequency
    domain, exact at every bin below Nyquist; the Nyquist bin is zeroed.
    The delay phase wraps at Nyquist, so Welch coherence estimates in the
    last few analysis bins below it are biased by leakage.

    Args:
        geometry: ArrayGeometry or N×3 microphone positions
        length: Number of samples
        sample_rate: Sampling rate in Hz
        seed: Random seed
        num_waves: Number of plane waves
        speed_of_sound: m/s

    Returns:
        Signals of shape (N, length), unit average power per channel
    """
    positions = geometry.mic_positions if isinstance(geometry, ArrayGeometry) else np.atleast_2d(geometry)
    if num_waves < 1:
        raise InvalidInputError("At least one plane wave is required")
    directions = fibonacci_directions(num_waves)
    freqs = np.fft.rfftfreq(length, d=1.0 / sample_rate)
    rng = np.random.default_rng(seed)
    wave_seeds = rng.integers(0, 2**63 - 1, size=num_waves)

    field = np.zeros((positions.shape[0], freqs.size), dtype=np.complex128)
    for direction, wave_seed in zip(directions, wave_seeds):
        spectrum = np.fft.rfft(generate_pink_noise(length, int(wave_seed), sample_rate))
        delays = positions @ direction / speed_of_sound
        field += spectrum[None, :] * np.exp(-2j * np.pi * freqs[None, :] * delays[:, None])

    if length % 2 == 0:
        # a real signal cannot carry a delayed phase at Nyquist
        field[:, -1] = 0.0
    signals = np.fft.irfft(field, n=length, axis=1) / np.sqrt(num_waves)
    get_logger("roomsim").debug(f"Generated diffuse field from {num_waves} plane waves")
    return signals


def make_source_signal(
    duration: float, sample_rate: int = 8000, seed: Optional[int] = None,
    burst: float = 0.4, gap: float = 0.1,
) -> np.ndarray:
    """
    Bandlimited pink-noise bursts standing in for an anechoic utterance.
    """
    length = int(round(duration * sample_rate))
    noise = generate_pink_noise(length, seed, sample_rate)
    high = min(0.45 * sample_rate, 0.5 * sample_rate - 1.0)
    sos = butter(4, [100.0, high], btype="bandpass", fs=sample_rate, output="sos")
    signal = sosfiltfilt(sos, noise)
    period = int(round((burst + gap) * sample_rate))
    on = int(round(burst * sample_rate))
    gate = (np.arange(length) % period) < on
    return signal * gate


def _energy(x: np.ndarray) -> float:
    return float(np.sum(np.asarray(x, dtype=np.float64) ** 2))


def render_scene(
    rirs: RirMatrix,
    source_signal: np.ndarray,
    noise_spec: NoiseSpec,
    snr_db: float = 0.0,
    white_snr_db: Optional[float] = 10.0,
    seed: Optional[int] = None,
    reference_mic: int = 0,
    lead_in: int = 0,
) -> SceneSignals:
    """
    Convolve the source with every RIR and add scaled noise.

    Structured noise is scaled so that clean/noise energy at the reference
    microphone equals `snr_db`; independent white noise is added at
    `white_snr_db` relative to the clean reference (None disables it). The
    source is preceded by `lead_in` samples of silence.

    Returns:
        SceneSignals with components of shape (N, lead_in + len(source))
    """
    logger = get_logger("roomsim")
    source = np.asarray(source_signal, dtype=np.float64).reshape(-1)
    if not np.isfinite(snr_db) or (white_snr_db is not None and not np.isfinite(white_snr_db)):
        raise InvalidInputError("SNR values must be finite")
    if source.size < rirs.num_samples:
        raise InvalidInputError(
            f"Source signal ({source.size} samples) is shorter than the RIRs ({rirs.num_samples})"
        )
    if _energy(source) == 0.0:
        raise InvalidInputError("Source signal is silent; SNR is undefined")
    if not 0 <= reference_mic < rirs.num_mics:
        raise InvalidInputError(f"Reference microphone {reference_mic} out of range")

    source = np.concatenate([np.zeros(lead_in), source])
    length = source.size
    clean = fftconvolve(source[None, :], rirs.data.T, axes=1)[:, :length]
    clean_ref = _energy(clean[reference_mic])
    if clean_ref == 0.0:
        raise InvalidInputError("Clean signal at the reference microphone is silent")

    rng = np.random.default_rng(seed)
    noise_seed, white_seed = (int(s) for s in rng.integers(0, 2**63 - 1, size=2))

    if noise_spec.kind == "directional":
        pink = generate_pink_noise(length, noise_seed, rirs.sample_rate)
        if noise_spec.rirs.num_mics != rirs.num_mics:
            raise InvalidInputError("Noise RIRs and target RIRs have different microphone counts")
        noise = fftconvolve(pink[None, :], noise_spec.rirs.data.T, axes=1)[:, :length]
    elif noise_spec.kind == "diffuse":
        noise = generate_diffuse_noise(
            noise_spec.geometry, length, rirs.sample_rate, noise_seed, noise_spec.num_waves
        )
    else:
        noise = np.zeros_like(clean)

    noise_gain = 0.0
    noise_ref = _energy(noise[reference_mic])
    if noise_ref > 0.0:
        noise_gain = float(np.sqrt(clean_ref / (noise_ref * 10.0 ** (snr_db / 10.0))))
    noise = noise * noise_gain

    white = np.zeros_like(clean)
    white_gain = 0.0
    if white_snr_db is not None:
        white = np.random.default_rng(white_seed).standard_normal(clean.shape)
        white_gain = float(np.sqrt(clean_ref / (_energy(white[reference_mic]) * 10.0 ** (white_snr_db / 10.0))))
        white = white * white_gain

    logger.debug(
        f"Rendered scene: {noise_spec.kind} noise at {snr_db:+.1f} dB, "
        f"white at {white_snr_db} dB, {length} samples"
    )
    return SceneSignals(
        clean=clean,
        noise=noise,
        white=white,
        sample_rate=rirs.sample_rate,
        noise_gain=noise_gain,
        white_gain=white_gain,
        lead_in=lead_in,
        reference_mic=reference_mic,
    )
