"""
Pytest configuration and shared fixtures.
"""

import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Add src to Python path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from rir_inpaint.beamform import StftConfig
from rir_inpaint.config import DiffusionSettings, ExperimentConfig
from rir_inpaint.core import MicMask, RirMatrix
from rir_inpaint.diffusion import DenoiserConfig, DenoiserModel, make_schedule

from tests.fixtures.sample_data import SAMPLE_RATE


@pytest.fixture
def temp_dir():
    """Create temporary directory for testing."""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir)


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def toy_rirs(rng):
    """Random 48×6 RIR matrix."""
    return RirMatrix(rng.standard_normal((48, 6)), SAMPLE_RATE)


@pytest.fixture
def toy_mask():
    """Mask with columns 1 and 4 missing out of 6."""
    return MicMask.from_missing(6, [1, 4])


@pytest.fixture
def tiny_model():
    """Untrained denoiser for 16×8 patches."""
    import torch

    torch.manual_seed(0)
    model = DenoiserModel(DenoiserConfig(channels=8, depth=1, time_dim=8, patch_height=16, patch_width=8))
    model.eval()
    return model


@pytest.fixture
def tiny_schedule():
    """Four-step linear schedule."""
    return make_schedule(4, "linear")


@pytest.fixture
def small_config(temp_dir):
    """Desk-scale configuration: 8-mic ULA, short RIRs and signals, tiny diffusion settings."""
    return ExperimentConfig(
        room_t60=0.2,
        array_preset="ula",
        array_num_mics=8,
        noise_types=("directional",),
        snr_list=(0.0,),
        mask_presets=("mask0", "mask3"),
        random_ratios=(0.5,),
        random_seeds=(0,),
        rir_length=256,
        sample_rate=SAMPLE_RATE,
        stft=StftConfig(frame_length=128, hop=64, fft_size=128),
        signal_duration=0.5,
        lead_in=0.25,
        diffusion=DiffusionSettings(
            timesteps=4,
            patch_height=16,
            patch_width=8,
            stride_rows=16,
            stride_cols=8,
            channels=8,
            depth=1,
            time_dim=8,
            epochs=1,
            batch_size=16,
            num_rooms=1,
            inference_batch=32,
        ),
        output_dir=str(temp_dir / "out"),
    )
