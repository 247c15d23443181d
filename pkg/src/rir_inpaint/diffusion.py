"""
DDPM machinery: noise schedules, the convolutional noise predictor,
training, reverse sampling and masked (RePaint) inpainting of RIR patches.
"""

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import (
    InvalidInputError,
    MicMask,
    PatchGrid,
    RirInpaintError,
    RirMatrix,
    ShapeMismatchError,
    denormalize_patch,
    normalize_patch,
    patch_column_flags,
    tile_patches,
    untile_patches,
)
from .logger import get_logger

SCHEDULE_KINDS = ("linear", "cosine")
MODEL_MAGIC = b"RDM1"

# (x_t, t, mask) -> predicted noise, all (B, 1, H, W) except t: (B,)
NoisePredictor = Callable[[torch.Tensor, torch.Tensor, torch.Tensor], torch.Tensor]


class TrainingDivergedError(RirInpaintError):
    """Raised when the training loss becomes non-finite."""


@dataclass(frozen=True)
class NoiseSchedule:
    """
    DDPM variance schedule. Step t in 1..T uses index t-1 of each array.
    """

    betas: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64).reshape(-1)
        if betas.size < 1:
            raise InvalidInputError("Schedule needs at least one step")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise InvalidInputError("Every beta must lie in (0, 1)")
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)

    @classmethod
    def from_betas(cls, betas, kind: str = "custom") -> "NoiseSchedule":
        return cls(np.asarray(betas, dtype=np.float64), kind)

    @property
    def T(self) -> int:
        return self.betas.size

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def alpha_bar(self, t: int) -> float:
        """Cumulative product up to step t; alpha_bar(0) = 1."""
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])

    def beta(self, t: int) -> float:
        return float(self.betas[t - 1])

    def posterior_variance(self, t: int) -> float:
        """Variance of q(x_{t-1} | x_t, x_0)."""
        return self.beta(t) * (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t))

    def check_step(self, t: int):
        if not 1 <= t <= self.T:
            raise InvalidInputError(f"Step {t} outside [1, {self.T}]")


def make_schedule(T: int, kind: str = "linear") -> NoiseSchedule:
    """
    Build a linear or cosine schedule with T steps.

    The linear schedule spans [1e-4, 0.02] scaled by 1000/T (capped at 0.999)
    so that short chains still end close to pure noise.
    """
    if T < 2:
        raise InvalidInputError(f"Schedule needs T >= 2, got {T}")
    if kind == "linear":
        scale = 1000.0 / T
        betas = np.linspace(1e-4 * scale, min(0.02 * scale, 0.999), T)
    elif kind == "cosine":
        s = 0.008
        steps = np.arange(T + 1, dtype=np.float64) / T
        f = np.cos((steps + s) / (1 + s) * math.pi / 2) ** 2
        alpha_bar = f / f[0]
        betas = np.clip(1.0 - alpha_bar[1:] / alpha_bar[:-1], 1e-8, 0.999)
    else:
        raise InvalidInputError(f"Unknown schedule kind '{kind}', expected one of {SCHEDULE_KINDS}")
    return NoiseSchedule(betas, kind)


def forward_diffuse(x0, t: int, eps, schedule: NoiseSchedule):
    """
    Sample q(x_t | x_0) = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.

    Works on numpy arrays and torch tensors alike.
    """
    schedule.check_step(t)
    if tuple(np.shape(eps)) != tuple(np.shape(x0)):
        raise ShapeMismatchError(f"Noise shape {np.shape(eps)} differs from data shape {np.shape(x0)}")
    a = schedule.alpha_bar(t)
    return math.sqrt(a) * x0 + math.sqrt(1.0 - a) * eps


class SinusoidalTimeEmbedding(nn.Module):
    """Sinusoidal embedding of integer timesteps."""

    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        half = self.dim // 2
        scale = math.log(10000) / max(half - 1, 1)
        freqs = torch.exp(torch.arange(half, device=t.device, dtype=torch.float32) * -scale)
        args = t.float()[:, None] * freqs[None, :]
        emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
        if self.dim % 2 == 1:
            emb = F.pad(emb, (0, 1))
        return emb


class ResidualBlock(nn.Module):
    """GroupNorm → SiLU → conv, twice, with the time embedding added in between."""

    def __init__(self, channels: int, time_dim: int):
        super().__init__()
        groups = min(8, channels)
        while channels % groups:
            groups -= 1
        self.norm1 = nn.GroupNorm(groups, channels)
        self.conv1 = nn.Conv2d(channels, channels, kernel_size=3, padding=1)
        self.time_proj = nn.Sequential(nn.SiLU(), nn.Linear(time_dim, channels))
        self.norm2 = nn.GroupNorm(groups, channels)
        self.conv2 = nn.Conv2d(channels, channels, kernel_size=3, padding=1)

    def forward(self, x: torch.Tensor, t_emb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(t_emb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return x + h


@dataclass(frozen=True)
class DenoiserConfig:
    """Architecture of the noise predictor."""

    channels: int = 32
    depth: int = 4
    time_dim: int = 64
    mask_conditioning: bool = True
    patch_height: int = 64
    patch_width: int = 16

    def __post_init__(self):
        if self.channels < 1 or self.depth < 1 or self.time_dim < 2:
            raise InvalidInputError("Denoiser channels, depth and time_dim must be positive")

    @property
    def patch_shape(self) -> Tuple[int, int]:
        return self.patch_height, self.patch_width


class DenoiserModel(nn.Module):
    """
    Small residual convolutional noise predictor eps_theta(x_t, t, M).

    When mask conditioning is enabled the column mask is appended as a
    second input channel.
    """

    def __init__(self, config: DenoiserConfig = DenoiserConfig()):
        super().__init__()
        self.config = config
        in_channels = 2 if config.mask_conditioning else 1
        self.time_embedding = nn.Sequential(
            SinusoidalTimeEmbedding(config.time_dim),
            nn.Linear(config.time_dim, config.time_dim),
            nn.SiLU(),
            nn.Linear(config.time_dim, config.time_dim),
        )
        self.stem = nn.Conv2d(in_channels, config.channels, kernel_size=3, padding=1)
        self.blocks = nn.ModuleList(
            [ResidualBlock(config.channels, config.time_dim) for _ in range(config.depth)]
        )
        groups = min(8, config.channels)
        while config.channels % groups:
            groups -= 1
        self.head = nn.Sequential(
            nn.GroupNorm(groups, config.channels),
            nn.SiLU(),
            nn.Conv2d(config.channels, 1, kernel_size=3, padding=1),
        )

    def forward(self, x: torch.Tensor, t: torch.Tensor, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
        if self.config.mask_conditioning:
            if mask is None:
                mask = torch.zeros_like(x)
            x = torch.cat([x, mask.to(x.dtype)], dim=1)
        t_emb = self.time_embedding(t)
        h = self.stem(x)
        for block in self.blocks:
            h = block(h, t_emb)
        return self.head(h)


@dataclass(frozen=True)
class TrainConfig:
    """
    Training knobs. The dataset fields describe the simulated training set
    built by the experiment runner.
    """

    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 2e-4
    seed: int = 0
    num_rooms: int = 8
    t60_min: float = 0.2
    t60_max: float = 0.5
    grad_clip: float = 1.0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.num_rooms < 1:
            raise InvalidInputError("Epochs, batch size and room count must be positive")
        if self.learning_rate <= 0:
            raise InvalidInputError("Learning rate must be positive")
        if not 0 < self.t60_min <= self.t60_max:
            raise InvalidInputError("T60 range must satisfy 0 < min <= max")


@dataclass
class TrainResult:
    model: DenoiserModel
    loss_trace: List[float] = field(default_factory=list)


def random_column_masks(
    count: int, width: int, generator: torch.Generator, height: int = 1
) -> torch.Tensor:
    """
    Random per-example column masks (1 = known) with a uniformly drawn
    missing ratio; at least one column stays known.

    Returns:
        Tensor of shape (count, 1, height, width)
    """
    ratios = torch.rand(count, 1, generator=generator)
    scores = torch.rand(count, width, generator=generator)
    known = (scores >= ratios).float()
    keep = torch.argmax(scores, dim=1)
    known[torch.arange(count), keep] = 1.0
    return known[:, None, None, :].expand(count, 1, height, width).contiguous()


def train_denoiser(
    patches: np.ndarray,
    schedule: NoiseSchedule,
    config: TrainConfig = TrainConfig(),
    model_config: Optional[DenoiserConfig] = None,
) -> TrainResult:
    """
    Fit eps_theta by minimizing E||eps - eps_theta(x_t, t, M)||^2.

    Args:
        patches: Normalized patches of shape (P, H, W) in [-1, 1]
        schedule: Noise schedule
        config: Training configuration; its seed fixes all randomness
        model_config: Architecture; defaults to the patch shape of the data

    Returns:
        TrainResult with the model and the mean loss of each epoch
    """
    logger = get_logger("diffusion")
    data = np.asarray(patches, dtype=np.float32)
    if data.ndim != 3 or data.shape[0] == 0:
        raise InvalidInputError(f"Training set must be a non-empty (P, H, W) array, got {data.shape}")
    if model_config is None:
        model_config = DenoiserConfig(patch_height=data.shape[1], patch_width=data.shape[2])
    elif model_config.patch_shape != data.shape[1:]:
        raise ShapeMismatchError(
            f"Model patch shape {model_config.patch_shape} differs from data {data.shape[1:]}"
        )

    torch.manual_seed(config.seed)
    generator = torch.Generator().manual_seed(config.seed)
    model = DenoiserModel(model_config)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    dataset = torch.from_numpy(data)[:, None]
    alpha_bars = torch.tensor(schedule.alpha_bars, dtype=torch.float32)

    logger.info(
        f"Training denoiser on {len(dataset)} patches {data.shape[1:]} for {config.epochs} epochs "
        f"(T={schedule.T}, lr={config.learning_rate})"
    )
    loss_trace = []
    last_finite = float("nan")
    model.train()
    for epoch in range(1, config.epochs + 1):
        order = torch.randperm(len(dataset), generator=generator)
        total, batches = 0.0, 0
        for batch_idx, start in enumerate(range(0, len(dataset), config.batch_size), 1):
            x0 = dataset[order[start:start + config.batch_size]]
            count = x0.shape[0]
            t = torch.randint(1, schedule.T + 1, (count,), generator=generator)
            eps = torch.randn(x0.shape, generator=generator)
            a = alpha_bars[t - 1][:, None, None, None]
            x_t = a.sqrt() * x0 + (1.0 - a).sqrt() * eps
            mask = random_column_masks(count, x0.shape[-1], generator, x0.shape[-2])

            optimizer.zero_grad()
            loss = F.mse_loss(model(x_t, t, mask), eps)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"Non-finite loss at epoch {epoch}, batch {batch_idx} "
                    f"(lr={config.learning_rate}, last finite loss={last_finite:.6f})"
                )
            loss.backward()
            if config.grad_clip > 0:
                nn.utils.clip_grad_norm_(model.parameters(), max_norm=config.grad_clip)
            optimizer.step()
            last_finite = loss.item()
            total += last_finite
            batches += 1

        loss_trace.append(total / batches)
        logger.info(f"Epoch {epoch}/{config.epochs} - loss {loss_trace[-1]:.6f}")

    model.eval()
    return TrainResult(model=model, loss_trace=loss_trace)


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x.float()
    return torch.as_tensor(np.asarray(x), dtype=torch.float32)


def _predict(model: NoisePredictor, x_t: torch.Tensor, t: int, mask: torch.Tensor) -> torch.Tensor:
    steps = torch.full((x_t.shape[0],), t, dtype=torch.long)
    with torch.no_grad():
        return model(x_t, steps, mask)


def reverse_step(
    x_t,
    t: int,
    model: NoisePredictor,
    schedule: NoiseSchedule,
    z=None,
    mask=None,
) -> torch.Tensor:
    """
    One ancestral DDPM step x_t -> x_{t-1}.

    mean = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_theta) / sqrt(alpha_t),
    plus sigma_t * z with sigma_t^2 the posterior variance. z is ignored at t = 1.

    Args:
        x_t: Batch of shape (B, 1, H, W)
        t: Current step in 1..T
        model: Noise predictor
        schedule: Noise schedule
        z: Gaussian noise of x_t's shape (zeros when omitted)
        mask: Column mask passed to the predictor

    Returns:
        x_{t-1} as a tensor
    """
    schedule.check_step(t)
    x_t = _as_tensor(x_t)
    mask = torch.zeros_like(x_t) if mask is None else _as_tensor(mask).expand_as(x_t)
    eps = _predict(model, x_t, t, mask)

    beta = schedule.beta(t)
    alpha_bar = schedule.alpha_bar(t)
    mean = (x_t - beta / math.sqrt(1.0 - alpha_bar) * eps) / math.sqrt(1.0 - beta)
    if t == 1 or z is None:
        return mean
    return mean + math.sqrt(schedule.posterior_variance(t)) * _as_tensor(z)


@dataclass
class InpaintResult:
    patch: np.ndarray
    unconditional: bool = False


def repaint_inpaint(
    patch: np.ndarray,
    column_mask: np.ndarray,
    model: NoisePredictor,
    schedule: NoiseSchedule,
    resample_jumps: int = 1,
    generator: Optional[torch.Generator] = None,
) -> InpaintResult:
    """
    Inpaint the unknown columns of one or more normalized patches.

    At every step the known columns are replaced by the measured data
    forward-diffused to level t-1 with fresh noise, and the unknown columns
    by the reverse step. With `resample_jumps` r > 1 each step is repeated r
    times, re-noising x_{t-1} back to x_t in between. Known columns of the
    output are exact copies of the input.

    Args:
        patch: (H, W) or (B, H, W) normalized patch(es)
        column_mask: Boolean (W,) or (B, W), True = known
        model: Noise predictor
        schedule: Noise schedule
        resample_jumps: Repeats per step (1 = plain masked DDPM)
        generator: torch generator for all sampling noise

    Returns:
        InpaintResult with the patch(es) as float64 and the unconditional flag
    """
    if resample_jumps < 1:
        raise InvalidInputError("resample_jumps must be >= 1")
    data = np.asarray(patch, dtype=np.float64)
    single = data.ndim == 2
    if single:
        data = data[None]
    known = np.asarray(column_mask, dtype=bool)
    if known.ndim == 1:
        known = np.broadcast_to(known, (data.shape[0], known.size))
    if known.shape != (data.shape[0], data.shape[2]):
        raise ShapeMismatchError(f"Column mask {known.shape} does not match patches {data.shape}")

    unconditional = not known.any()
    if known.all():
        out = data.copy()
        return InpaintResult(out[0] if single else out, False)
    if unconditional:
        get_logger("diffusion").warning("Inpainting with no known columns: unconditional generation")

    generator = generator if generator is not None else torch.Generator().manual_seed(0)
    known_cells = np.broadcast_to(known[:, None, :], data.shape)
    m = torch.from_numpy(known_cells.astype(np.float32))[:, None]
    x0 = torch.from_numpy(data.astype(np.float32))[:, None]

    x = torch.randn(x0.shape, generator=generator)
    for t in range(schedule.T, 0, -1):
        for jump in range(resample_jumps):
            a_prev = schedule.alpha_bar(t - 1)
            eps_known = torch.randn(x0.shape, generator=generator)
            x_known = math.sqrt(a_prev) * x0 + math.sqrt(1.0 - a_prev) * eps_known
            z = torch.randn(x0.shape, generator=generator)
            x_unknown = reverse_step(x, t, model, schedule, z=z, mask=m)
            x_prev = m * x_known + (1.0 - m) * x_unknown
            if jump < resample_jumps - 1 and t > 1:
                beta = schedule.beta(t)
                x = math.sqrt(1.0 - beta) * x_prev + math.sqrt(beta) * torch.randn(x0.shape, generator=generator)
            else:
                x = x_prev

    generated = x[:, 0].double().numpy()
    out = np.where(known_cells, data, generated)
    return InpaintResult(out[0] if single else out, unconditional)


@dataclass
class Reconstruction:
    rirs: RirMatrix
    num_patches: int
    unconditional: bool = False


def reconstruct_rir(
    measured: RirMatrix,
    mask: MicMask,
    model: NoisePredictor,
    schedule: NoiseSchedule,
    grid: PatchGrid,
    seed: int = 0,
    resample_jumps: int = 1,
    batch_size: int = 64,
) -> Reconstruction:
    """
    Reconstruct missing RIR columns: tile → normalize → inpaint →
    denormalize → untile. Measured columns are copied back exactly.

    Args:
        measured: Matrix whose measured columns hold data
        mask: Measured/missing flags
        model: Trained noise predictor
        schedule: Noise schedule the model was trained with
        grid: Patch grid (width clamped to the array)
        seed: Sampling seed
        resample_jumps: RePaint repeats per step
        batch_size: Patches inpainted together

    Returns:
        Reconstruction with the full matrix
    """
    logger = get_logger("diffusion")
    if mask.size != measured.num_mics:
        raise ShapeMismatchError(f"Mask has {mask.size} entries for {measured.num_mics} microphones")
    if mask.all_measured:
        return Reconstruction(RirMatrix(measured.data.copy(), measured.sample_rate), 0)

    fitted = grid.fit(measured.shape)
    config = getattr(model, "config", None)
    if isinstance(config, DenoiserConfig) and config.patch_shape != fitted.patch_shape:
        raise ShapeMismatchError(
            f"Model was trained on {config.patch_shape} patches, grid yields {fitted.patch_shape}"
        )

    data = measured.data.copy()
    data[:, mask.missing] = 0.0
    patches, placements = tile_patches(data, fitted)
    column_masks = patch_column_flags(mask.flags, data.shape, fitted)

    normalized, scales = [], []
    for patch, cols in zip(patches, column_masks):
        norm, scale = normalize_patch(patch, valid=cols[None, :])
        normalized.append(norm)
        scales.append(scale)
    normalized = np.stack(normalized)

    logger.info(
        f"Inpainting {len(placements)} patches {fitted.patch_shape} "
        f"({mask.L} of {mask.size} microphones missing, T={schedule.T})"
    )
    generator = torch.Generator().manual_seed(seed)
    restored = np.empty_like(normalized)
    unconditional = False
    for start in range(0, len(normalized), batch_size):
        stop = start + batch_size
        result = repaint_inpaint(
            normalized[start:stop], column_masks[start:stop], model, schedule,
            resample_jumps=resample_jumps, generator=generator,
        )
        restored[start:stop] = result.patch
        unconditional |= result.unconditional
        logger.debug(f"Inpainted patches {start}-{min(stop, len(normalized))}")

    denormalized = np.stack([denormalize_patch(p, s) for p, s in zip(restored, scales)])
    full = untile_patches(denormalized, placements, measured.shape)
    full[:, mask.measured] = measured.data[:, mask.measured]
    return Reconstruction(RirMatrix(full, measured.sample_rate), len(placements), unconditional)


def save_model(
    path: Union[str, Path],
    model: DenoiserModel,
    schedule: NoiseSchedule,
    metadata: Optional[Dict] = None,
) -> Path:
    """
    Write a model file: magic, uint32 header length, JSON header, then the
    parameters as one little-endian float32 blob in state-dict order.
    """
    path = Path(path)
    state = model.state_dict()
    header = {
        "format": 1,
        "config": asdict(model.config),
        "schedule": {"kind": schedule.kind, "T": schedule.T, "betas": schedule.betas.tolist()},
        "parameters": [{"name": name, "shape": list(tensor.shape)} for name, tensor in state.items()],
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(
        tensor.detach().cpu().numpy().astype("<f4").tobytes() for tensor in state.values()
    )
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        f.write(blob)
    get_logger("diffusion").info(f"Model saved to: {path}")
    return path


def load_model(path: Union[str, Path]) -> Tuple[DenoiserModel, NoiseSchedule, Dict]:
    """Read a model file written by `save_model`."""
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC:
        raise InvalidInputError(f"{path}: not a denoiser model file (bad magic at offset 0)")
    (length,) = struct.unpack_from("<I", raw, 4)
    header = json.loads(raw[8:8 + length].decode("utf-8"))
    blob = raw[8 + length:]

    model = DenoiserModel(DenoiserConfig(**header["config"]))
    state = {}
    offset = 0
    for entry in header["parameters"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        size = 4 * count
        if offset + size > len(blob):
            raise InvalidInputError(
                f"{path}: parameter blob truncated at '{entry['name']}' "
                f"(need {offset + size} bytes, have {len(blob)})"
            )
        values = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(values.astype(np.float32))
        offset += size
    model.load_state_dict(state)
    model.eval()
    schedule = NoiseSchedule(np.asarray(header["schedule"]["betas"]), header["schedule"]["kind"])
    return model, schedule, header.get("metadata", {})
