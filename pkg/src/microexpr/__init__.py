"""Micro-expression spotting and recognition."""

from .classify import LinearSVM, loso_evaluate
from .config import PipelineConfig
from .features.descriptors import HigoTop, HogTop, LbpTop
from .geometry import register_clip, track_points
from .magnify import MotionMagnifier, magnify
from .media import FrameSequence, load_sequence, save_sequence
from .spotting import FeatureDifferenceSpotter
from .tim import TemporalInterpolator

__version__ = "0.1.0"

__all__ = [
    "FeatureDifferenceSpotter",
    "FrameSequence",
    "HigoTop",
    "HogTop",
    "LbpTop",
    "LinearSVM",
    "MotionMagnifier",
    "PipelineConfig",
    "TemporalInterpolator",
    "load_sequence",
    "loso_evaluate",
    "magnify",
    "register_clip",
    "save_sequence",
    "track_points",
]
