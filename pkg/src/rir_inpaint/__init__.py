"""
Room impulse response reconstruction for microphone arrays.

This package fills in the RIRs of unmeasured microphones with a
diffusion-model inpainter or a cubic-spline baseline, and evaluates the
reconstructions directly and through ATF-steered MVDR beamforming.
"""

from .core import MicMask, PatchGrid, RirInpaintError, RirMatrix
from .diffusion import DenoiserModel, make_schedule, reconstruct_rir
from .experiments import ExperimentRunner, make_mask
from .interp import sci_interpolate

__version__ = "1.0.0"
__all__ = [
    "ExperimentRunner",
    "DenoiserModel",
    "MicMask",
    "PatchGrid",
    "RirInpaintError",
    "RirMatrix",
    "make_mask",
    "make_schedule",
    "reconstruct_rir",
    "sci_interpolate",
]
