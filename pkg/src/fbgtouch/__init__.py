"""Simulation, calibration and learning toolkit for an FBG-instrumented tactile fingertip."""
from .geometry import NormalizedPoint, SensorGeometry, SurfacePoint
from .fbgsim import FbgLayout, SimConfig, WavelengthStream, default_layout, simulate_stream
from .calib import ContactEvent, ScanPlan, run_scan
from .nn import ModelConfig, ModelParams, forward, predict, train
from .pipeline import PrepConfig, localization_run

__version__ = "0.1.0"

__all__ = [
    "NormalizedPoint", "SensorGeometry", "SurfacePoint",
    "FbgLayout", "SimConfig", "WavelengthStream", "default_layout", "simulate_stream",
    "ContactEvent", "ScanPlan", "run_scan",
    "ModelConfig", "ModelParams", "forward", "predict", "train",
    "PrepConfig", "localization_run",
]
