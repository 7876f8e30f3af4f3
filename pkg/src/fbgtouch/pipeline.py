"""End-to-end contact localization runs on simulated calibration data."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import calib, nn
from .evaluation import LocalizationReport, evaluate_localization
from .fbgsim import FbgLayout, SimConfig, default_layout, perturb_layout
from .geometry import SensorGeometry

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrepConfig:
    """Labeling and windowing parameters (sample counts at the stream rate)."""

    w_p: int = 400
    w_d: int = 64
    stride: int = 8
    train_stride: int = 32
    negative_ratio: float = 1.0
    test_fraction: float = 0.2

    def __post_init__(self):
        if min(self.w_p, self.w_d, self.stride, self.train_stride) < 1:
            raise ValueError("window sizes and strides must be positive")
        if self.train_stride % self.stride:
            raise ValueError("train_stride must be a multiple of stride")


@dataclass
class CalibrationData:
    stream: object
    events: list
    baseline: np.ndarray
    scale: np.ndarray
    train: calib.WindowSet
    test: calib.WindowSet
    test_events: np.ndarray


def prepare(stream, events, prep: PrepConfig, seed, baseline, test_events=None) -> CalibrationData:
    """Label, window, balance, normalize and split a recorded calibration scan.

    ``baseline`` is the per-channel rest wavelength (the layout's nominal
    values). Test windows keep ``prep.stride``; training windows are thinned
    to ``prep.train_stride``. ``test_events`` fixes the held-out events
    (otherwise drawn from ``seed``).
    """
    labels = calib.label_stream(stream, events, prep.w_p)
    windows = calib.make_windows(stream, labels, prep.w_d, prep.stride, events)
    windows = calib.balance_windows(windows, prep.negative_ratio, seed)
    baseline = np.asarray(baseline, dtype=float)
    scale = calib.channel_range(stream)
    windows = calib.normalize_signals(windows, baseline, scale)
    if test_events is None:
        test_events = calib.split_events(len(events), prep.test_fraction, seed)
    test_events = np.asarray(test_events, dtype=int)
    in_test = np.isin(windows.event, test_events)
    train = windows.subset(np.flatnonzero(~in_test))
    test = windows.subset(np.flatnonzero(in_test))
    keep = (train.ends - prep.w_d) % prep.train_stride == 0
    train = train.subset(np.flatnonzero(keep))
    return CalibrationData(stream, events, baseline, scale, train, test, test_events)


@dataclass
class LocalizationRun:
    params: nn.ModelParams
    history: list
    report: LocalizationReport
    data: CalibrationData = field(repr=False)


def localization_run(geom: SensorGeometry | None = None, layout: FbgLayout | None = None,
                     sim: SimConfig | None = None, plan: calib.ScanPlan | None = None,
                     prep: PrepConfig | None = None, model: nn.ModelConfig | None = None,
                     seed=0) -> LocalizationRun:
    """Scan, preprocess, train and evaluate one sensor."""
    geom = geom or SensorGeometry()
    layout = layout or default_layout()
    sim = sim or SimConfig()
    plan = plan or calib.ScanPlan()
    prep = prep or PrepConfig()
    model = model or nn.ModelConfig(input_dim=layout.count, window_len=prep.w_d)
    stream, events = calib.run_scan(geom, layout, sim, plan, seed)
    data = prepare(stream, events, prep, seed, layout.nominal)
    log.info("windows: %d train, %d test", len(data.train), len(data.test))
    params, history = nn.train(data.train, model)
    report = evaluate_localization(params, data.test, geom)
    return LocalizationRun(params, history, report, data)


def sensor_instance(base_layout: FbgLayout, layout_seed: int, placement_sigma_mm: float = 0.5,
                    wavelength_sigma_nm: float = 0.1, geom: SensorGeometry | None = None,
                    attempts: int = 20) -> FbgLayout:
    """Perturbed copy of ``base_layout``; retries with derived seeds on invalid draws."""
    for n in range(attempts):
        try:
            return perturb_layout(base_layout, placement_sigma_mm, wavelength_sigma_nm,
                                  [layout_seed, n], geom)
        except ValueError:
            continue
    raise RuntimeError("could not draw a valid perturbed layout")


def consistency_runner(geom=None, base_layout=None, sim=None, plan=None, prep=None, model=None,
                       run_seed: int = 0, placement_sigma_mm: float = 0.5,
                       wavelength_sigma_nm: float = 0.1):
    """Callable ``layout_seed -> LocalizationReport`` for one fabricated instance.

    Each instance gets its own perturbed layout and its own calibration data
    seed; the model configuration is shared.
    """
    base_layout = base_layout or default_layout()

    def run(layout_seed):
        layout = sensor_instance(base_layout, layout_seed, placement_sigma_mm,
                                 wavelength_sigma_nm, geom)
        return localization_run(geom, layout, sim, plan, prep, model,
                                seed=[run_seed, layout_seed]).report

    return run
