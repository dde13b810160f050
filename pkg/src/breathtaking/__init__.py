"""Breathing detection and rate estimation from multi-link RSS measurements."""
from .detect import calibrate_threshold, network_detect, single_link_detect
from .estimate import estimate, estimate_amp_phase, estimate_frequency, psd_objective
from .model import (
    BreathingEstimate,
    DetectionResult,
    EstimatorConfig,
    EvaluationReport,
    Hypothesis,
    LinkId,
    LinkTrace,
    NetworkWindow,
)
from .preprocess import FilterSpec, design_highpass, iter_windows, prepare, segment
from .simulate import SimScenario, generate, preset

__all__ = [
    "BreathingEstimate",
    "DetectionResult",
    "EstimatorConfig",
    "EvaluationReport",
    "FilterSpec",
    "Hypothesis",
    "LinkId",
    "LinkTrace",
    "NetworkWindow",
    "SimScenario",
    "calibrate_threshold",
    "design_highpass",
    "estimate",
    "estimate_amp_phase",
    "estimate_frequency",
    "generate",
    "iter_windows",
    "network_detect",
    "prepare",
    "preset",
    "psd_objective",
    "segment",
    "single_link_detect",
]
