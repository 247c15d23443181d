"""
Experiment configuration: a flat `key = value` text file with typed keys.

Example:

    # ULA experiment
    room.dimensions = 6.0, 5.5, 2.8
    room.t60 = 0.3
    snr.list = -10, -5, 0, 5, 10
    recon.backends = sci, diffusion
    recon.model_path = run/model.rdm
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

from .beamform import StftConfig
from .core import InvalidInputError, PatchGrid, RirInpaintError
from .diffusion import SCHEDULE_KINDS, DenoiserConfig, NoiseSchedule, TrainConfig, make_schedule

ARRAY_PRESETS = ("ula16", "ula", "three_rows", "frame", "grid")
# Microphone counts of the fixed-size presets ("ula" uses array.num_mics)
ARRAY_SIZES = {"ula16": 16, "three_rows": 63, "frame": 41, "grid": 441}
BACKENDS = ("sci", "diffusion")
MASK_PRESETS = ("mask0", "mask1", "mask2", "mask3", "all", "random")
DENOISER_KEYS = ("diffusion.channels", "diffusion.depth", "diffusion.time_dim")
PATCH_KEYS = (
    "diffusion.patch_height", "diffusion.patch_width", "diffusion.stride_rows",
    "diffusion.stride_cols", "diffusion.pad_policy",
)


class ConfigError(RirInpaintError):
    """Raised for malformed or inconsistent configuration; `line` is 1-based (0 = not line-specific)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class DiffusionSettings:
    """Schedule, patch grid, architecture and training knobs of the diffusion backend."""

    timesteps: int = 50
    schedule: str = "linear"
    patch_height: int = 64
    patch_width: int = 16
    stride_rows: int = 32
    stride_cols: int = 8
    pad_policy: str = "reflect"
    channels: int = 32
    depth: int = 4
    time_dim: int = 64
    mask_conditioning: bool = True
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 2e-4
    num_rooms: int = 8
    t60_min: float = 0.2
    t60_max: float = 0.5
    resample_jumps: int = 1
    inference_batch: int = 64

    def make_schedule(self) -> NoiseSchedule:
        return make_schedule(self.timesteps, self.schedule)

    def patch_grid(self) -> PatchGrid:
        return PatchGrid(self.patch_height, self.patch_width, self.stride_rows, self.stride_cols, self.pad_policy)

    def denoiser_config(self, patch_width: Optional[int] = None) -> DenoiserConfig:
        return DenoiserConfig(
            channels=self.channels,
            depth=self.depth,
            time_dim=self.time_dim,
            mask_conditioning=self.mask_conditioning,
            patch_height=self.patch_height,
            patch_width=patch_width or self.patch_width,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=seed,
            num_rooms=self.num_rooms,
            t60_min=self.t60_min,
            t60_max=self.t60_max,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run needs. Defaults reproduce the ULA setup."""

    room_dimensions: Tuple[float, float, float] = (6.0, 5.5, 2.8)
    room_t60: Optional[float] = 0.3
    room_absorption: Optional[Union[float, Tuple[float, ...]]] = None
    room_max_order: Optional[int] = None
    array_preset: str = "ula16"
    array_num_mics: int = 16
    array_spacing: float = 0.04
    array_center: Tuple[float, float, float] = (3.0, 1.5, 1.5)
    source_distance: float = 2.0
    noise_distance: float = 2.0
    noise_angle_deg: float = 60.0
    noise_types: Tuple[str, ...] = ("directional", "diffuse")
    snr_list: Tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0)
    white_snr_db: Optional[float] = 10.0
    mask_presets: Tuple[str, ...] = ("mask0", "mask1", "mask2", "mask3")
    random_ratios: Tuple[float, ...] = (0.3, 0.5, 0.7, 0.9)
    random_seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)
    mask_preset: str = "mask0"
    mask_ratio: float = 0.5
    mask_seed: int = 0
    mask_missing: Tuple[int, ...] = ()
    backends: Tuple[str, ...] = ("sci",)
    model_path: str = ""
    rir_length: int = 2048
    sample_rate: int = 8000
    stft: StftConfig = field(default_factory=StftConfig)
    signal_duration: float = 4.0
    source_wav: str = ""
    lead_in: float = 4.5
    diffusion: DiffusionSettings = field(default_factory=DiffusionSettings)
    output_dir: str = "out"
    seed: int = 0
    reference_mic: int = 0

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None) -> "ExperimentConfig":
        """Apply command-line overrides; None leaves the value unchanged."""
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if output_dir is not None:
            changes["output_dir"] = str(output_dir)
        return replace(self, **changes) if changes else self

    @property
    def lead_in_samples(self) -> int:
        return int(round(self.lead_in * self.sample_rate))

    @property
    def num_mics(self) -> int:
        return ARRAY_SIZES.get(self.array_preset, self.array_num_mics)

    def require_model(self) -> Path:
        """Path of the diffusion model; raises ConfigError when it does not exist."""
        if not self.model_path:
            raise ConfigError("recon.model_path is required for the diffusion backend")
        path = Path(self.model_path)
        if not path.is_file():
            raise ConfigError(f"Model file not found: {path}")
        return path

    def to_dict(self) -> Dict[str, Any]:
        """Flat key -> value view, used for manifests."""
        out = {}
        for key, (attr, _) in SCHEMA.items():
            value = _get_attr(self, attr)
            out[key] = list(value) if isinstance(value, tuple) else value
        return out


def _parse_float(text: str) -> float:
    return float(text)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _optional(parser: Callable) -> Callable:
    def parse(text: str):
        return None if text.lower() in ("none", "") else parser(text)
    return parse


def _list_of(parser: Callable) -> Callable:
    def parse(text: str):
        return tuple(parser(item.strip()) for item in text.split(",") if item.strip())
    return parse


def _triple(text: str) -> Tuple[float, float, float]:
    values = _list_of(float)(text)
    if len(values) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {len(values)}")
    return values


def _absorption(text: str) -> Union[float, Tuple[float, ...]]:
    values = _list_of(float)(text)
    if len(values) == 1:
        return values[0]
    if len(values) != 6:
        raise ValueError(f"expected one coefficient or six (one per wall), got {len(values)}")
    return values


# key -> (attribute path, parser)
SCHEMA: Dict[str, Tuple[str, Callable]] = {
    "room.dimensions": ("room_dimensions", _triple),
    "room.t60": ("room_t60", _optional(_parse_float)),
    "room.absorption": ("room_absorption", _optional(_absorption)),
    "room.max_order": ("room_max_order", _optional(int)),
    "array.preset": ("array_preset", str),
    "array.num_mics": ("array_num_mics", int),
    "array.spacing": ("array_spacing", _parse_float),
    "array.center": ("array_center", _triple),
    "source.distance": ("source_distance", _parse_float),
    "noise.distance": ("noise_distance", _parse_float),
    "noise.angle_deg": ("noise_angle_deg", _parse_float),
    "noise.types": ("noise_types", _list_of(str)),
    "snr.list": ("snr_list", _list_of(float)),
    "snr.white_db": ("white_snr_db", _optional(_parse_float)),
    "mask.presets": ("mask_presets", _list_of(str)),
    "mask.random_ratios": ("random_ratios", _list_of(float)),
    "mask.random_seeds": ("random_seeds", _list_of(int)),
    "mask.preset": ("mask_preset", str),
    "mask.ratio": ("mask_ratio", _parse_float),
    "mask.seed": ("mask_seed", int),
    "mask.missing": ("mask_missing", _list_of(int)),
    "recon.backends": ("backends", _list_of(str)),
    "recon.model_path": ("model_path", str),
    "rir.length": ("rir_length", int),
    "fs": ("sample_rate", int),
    "stft.frame_length": ("stft.frame_length", int),
    "stft.hop": ("stft.hop", int),
    "stft.fft_size": ("stft.fft_size", int),
    "stft.window": ("stft.window", str),
    "signal.duration": ("signal_duration", _parse_float),
    "signal.source_wav": ("source_wav", str),
    "signal.lead_in": ("lead_in", _parse_float),
    "diffusion.timesteps": ("diffusion.timesteps", int),
    "diffusion.schedule": ("diffusion.schedule", str),
    "diffusion.patch_height": ("diffusion.patch_height", int),
    "diffusion.patch_width": ("diffusion.patch_width", int),
    "diffusion.stride_rows": ("diffusion.stride_rows", int),
    "diffusion.stride_cols": ("diffusion.stride_cols", int),
    "diffusion.pad_policy": ("diffusion.pad_policy", str),
    "diffusion.channels": ("diffusion.channels", int),
    "diffusion.depth": ("diffusion.depth", int),
    "diffusion.time_dim": ("diffusion.time_dim", int),
    "diffusion.mask_conditioning": ("diffusion.mask_conditioning", _parse_bool),
    "diffusion.epochs": ("diffusion.epochs", int),
    "diffusion.batch_size": ("diffusion.batch_size", int),
    "diffusion.learning_rate": ("diffusion.learning_rate", _parse_float),
    "diffusion.num_rooms": ("diffusion.num_rooms", int),
    "diffusion.t60_min": ("diffusion.t60_min", _parse_float),
    "diffusion.t60_max": ("diffusion.t60_max", _parse_float),
    "diffusion.resample_jumps": ("diffusion.resample_jumps", int),
    "diffusion.inference_batch": ("diffusion.inference_batch", int),
    "output.dir": ("output_dir", str),
    "seed": ("seed", int),
    "reference_mic": ("reference_mic", int),
}


def _get_attr(config: ExperimentConfig, attr: str) -> Any:
    obj: Any = config
    for part in attr.split("."):
        obj = getattr(obj, part)
    return obj


def _validate(config: ExperimentConfig, lines: Dict[str, int]):
    def fail(key: str, message: str):
        raise ConfigError(f"{key}: {message}", lines.get(key, 0))

    def last_set(keys: Tuple[str, ...]) -> str:
        present = [k for k in keys if k in lines]
        return max(present, key=lines.get) if present else keys[0]

    if not config.snr_list:
        fail("snr.list", "SNR list must not be empty")
    if config.array_preset not in ARRAY_PRESETS:
        fail("array.preset", f"unknown preset '{config.array_preset}', expected one of {ARRAY_PRESETS}")
    for backend in config.backends:
        if backend not in BACKENDS:
            fail("recon.backends", f"unknown backend '{backend}', expected one of {BACKENDS}")
    for kind in config.noise_types:
        if kind not in ("directional", "diffuse"):
            fail("noise.types", f"unknown noise type '{kind}'")
    for ratio in config.random_ratios:
        if not 0.0 < ratio < 1.0:
            fail("mask.random_ratios", f"ratio {ratio} must lie in (0, 1)")
    if not 0.0 < config.mask_ratio < 1.0:
        fail("mask.ratio", f"ratio {config.mask_ratio} must lie in (0, 1)")
    if config.rir_length < 1 or config.sample_rate < 1:
        fail("rir.length" if config.rir_length < 1 else "fs", "must be positive")
    if config.signal_duration * config.sample_rate < config.rir_length:
        fail("signal.duration", "source signal must be at least as long as the RIRs")
    if config.lead_in < 0:
        fail("signal.lead_in", "must be >= 0")
    if config.diffusion.schedule not in SCHEDULE_KINDS:
        fail("diffusion.schedule", f"unknown schedule '{config.diffusion.schedule}'")
    if config.room_t60 is None and config.room_absorption is None:
        fail("room.t60", "either room.t60 or room.absorption is required")
    if config.room_absorption is not None:
        walls = config.room_absorption if isinstance(config.room_absorption, tuple) else (config.room_absorption,)
        if any(not 0.0 < alpha <= 1.0 for alpha in walls):
            fail("room.absorption", "coefficients must lie in (0, 1]")

    fixed = tuple(p for p in MASK_PRESETS if p != "random")
    for preset in config.mask_presets:
        if preset not in fixed:
            fail(
                "mask.presets",
                f"unknown preset '{preset}', expected one of {fixed} (random masks use mask.random_ratios)",
            )
    if config.mask_preset not in MASK_PRESETS:
        fail("mask.preset", f"unknown preset '{config.mask_preset}', expected one of {MASK_PRESETS}")
    if any(index < 0 for index in config.mask_missing):
        fail("mask.missing", "microphone indices must be >= 0")
    if not 0 <= config.reference_mic < config.num_mics:
        fail("reference_mic", f"{config.reference_mic} is outside the {config.num_mics}-microphone array")

    try:
        config.diffusion.patch_grid()
    except InvalidInputError as exc:
        fail(last_set(PATCH_KEYS), str(exc))
    try:
        config.diffusion.denoiser_config()
    except InvalidInputError as exc:
        fail(last_set(DENOISER_KEYS), str(exc))


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """
    Parse configuration text into an ExperimentConfig.

    Args:
        text: File contents
        source: Name used in error messages

    Returns:
        ExperimentConfig with defaults for every absent key
    """
    top: Dict[str, Any] = {}
    nested: Dict[str, Dict[str, Any]] = {"stft": {}, "diffusion": {}}
    lines: Dict[str, int] = {}

    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'key = value', got '{raw.strip()}'", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}: unknown key '{key}'", number)
        if key in lines:
            raise ConfigError(f"{source}: duplicate key '{key}' (first set on line {lines[key]})", number)
        attr, parser = SCHEMA[key]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for '{key}': {exc}", number) from exc
        lines[key] = number
        if "." in attr:
            group, name = attr.split(".", 1)
            nested[group][name] = parsed
        else:
            top[attr] = parsed

    try:
        config = ExperimentConfig(
            stft=StftConfig(**nested["stft"]),
            diffusion=DiffusionSettings(**nested["diffusion"]),
            **top,
        )
    except InvalidInputError as exc:
        key = next((k for k in lines if k.startswith("stft.")), "")
        raise ConfigError(f"{source}: {exc}", lines.get(key, 0)) from exc

    _validate(config, lines)
    return config


def load_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """Read a configuration file; None returns the defaults."""
    if path is None:
        return parse_config("")
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))

