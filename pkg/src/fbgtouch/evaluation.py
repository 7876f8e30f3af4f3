"""Sensor and localization metrics: accuracy, sensitivity, response times,
wear degradation and consistency across sensor instances."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .fbgsim import (ContactStimulus, FbgLayout, SimConfig, kernel_weights,
                     simulate_stream)
from .geometry import NormalizedPoint, SensorGeometry, chord_distance_mm


@dataclass
class LocalizationReport:
    mean_error_mm: float
    median_error_mm: float
    errors_mm: list
    contact_accuracy: float
    confusion: dict  # tp / fp / tn / fn counts

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "LocalizationReport":
        return cls(**rec)


@dataclass
class SensorCharacterization:
    sensitivity_threshold_N: float = 0.0
    rise_time_ms: float = 0.0
    fall_time_ms: float = 0.0
    degradation_fraction: float = 0.0

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "SensorCharacterization":
        return cls(**rec)


def localization_from_predictions(geom: SensorGeometry, pred_pos, pred_prob, truth_pos,
                                  contact, threshold: float = 0.5) -> LocalizationReport:
    contact = np.asarray(contact, dtype=bool)
    pred_pos = np.asarray(pred_pos, dtype=float).reshape(-1, 2)
    truth_pos = np.asarray(truth_pos, dtype=float).reshape(-1, 2)
    decided = np.asarray(pred_prob) >= threshold
    err = chord_distance_mm(geom, pred_pos[contact, 0], pred_pos[contact, 1],
                            truth_pos[contact, 0], truth_pos[contact, 1])
    err = np.atleast_1d(err)
    confusion = {
        "tp": int(np.sum(decided & contact)), "fp": int(np.sum(decided & ~contact)),
        "tn": int(np.sum(~decided & ~contact)), "fn": int(np.sum(~decided & contact)),
    }
    return LocalizationReport(
        mean_error_mm=float(err.mean()) if err.size else float("nan"),
        median_error_mm=float(np.median(err)) if err.size else float("nan"),
        errors_mm=err.tolist(),
        contact_accuracy=float(np.mean(decided == contact)),
        confusion=confusion,
    )


def evaluate_localization(params, test_set, geom: SensorGeometry, chunk: int = 4096) -> LocalizationReport:
    """Chord error on contact windows and contact accuracy on all windows.

    ``params`` is a :class:`~fbgtouch.nn.ModelParams` or any callable mapping
    a ``(B, T, K)`` batch to ``(positions, probabilities)``.
    """
    n = len(test_set)
    if n == 0:
        raise ValueError("empty test set")
    predictor = params if callable(params) else (lambda X: nn.predict_batch(params, X))
    pos, prob = [], []
    for at in range(0, n, chunk):
        X, _, _ = test_set.batch(np.arange(at, min(at + chunk, n)))
        p, q = predictor(X)
        pos.append(p)
        prob.append(q)
    return localization_from_predictions(geom, np.concatenate(pos), np.concatenate(prob),
                                         test_set.positions, test_set.contact)


def detection_threshold_nm(config: SimConfig) -> float:
    return 3.0 * config.noise_sigma_nm


def measure_sensitivity(layout: FbgLayout, sim_config: SimConfig, geom: SensorGeometry,
                        probe_position: NormalizedPoint, resolution: float = 1e-4,
                        max_force: float = 100.0) -> float:
    """Smallest force (N) whose peak steady-state shift exceeds 3 sigma of the baseline.

    Bisection on force to ``resolution``; returns the upper bracket, the
    lowest tested force that was detected.
    """
    thresh = detection_threshold_nm(sim_config)
    if thresh <= 0:
        return 0.0
    peak = float(np.max(kernel_weights(layout, sim_config, geom, probe_position.u, probe_position.v)))
    response = sim_config.force_sensitivity_nm_per_N * peak

    def detected(force):
        return force * response > thresh

    lo, hi = 0.0, max_force
    if not detected(hi):
        return math.inf
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if detected(mid):
            hi = mid
        else:
            lo = mid
    return hi


def measure_response_times(frames, onset_idx: int, offset_idx: int, channel=None,
                           sample_rate_hz: float | None = None):
    """Rise (to 90% of the step) and fall (back to 10%) times in ms.

    ``frames`` is a :class:`WavelengthStream` or an (N, K) array (then
    ``sample_rate_hz`` is required). ``channel`` defaults to the one with the
    largest excursion. The baseline is the value just before onset and the
    steady state the value just before offset.
    """
    data = getattr(frames, "wavelengths_nm", frames)
    rate = sample_rate_hz or getattr(frames, "sample_rate_hz")
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    if channel is None:
        channel = int(np.argmax(np.abs(data[offset_idx - 1] - data[max(onset_idx - 1, 0)])))
    x = data[:, channel]
    base = x[max(onset_idx - 1, 0)]
    steady = x[offset_idx - 1]
    span = steady - base
    if span == 0:
        raise ValueError("no response to the step")
    frac = (x - base) / span
    # steady state must be essentially reached before the step is released
    if abs(frac[offset_idx - 1] - frac[max(offset_idx - 11, onset_idx)]) > 1e-3:
        raise ValueError("steady state not reached before offset")
    up = np.flatnonzero(frac[onset_idx:offset_idx] >= 0.9)
    down = np.flatnonzero(frac[offset_idx:] <= 0.1)
    if not len(up) or not len(down):
        raise ValueError("response never crossed the 90% / 10% levels")
    dt = 1e3 / rate
    return float(up[0] * dt), float(down[0] * dt)


def step_response_times(layout: FbgLayout, sim_config: SimConfig, geom: SensorGeometry,
                        position: NormalizedPoint | None = None, force: float = 1.0,
                        hold_s: float = 1.0):
    """Simulate a clean force step at ``position`` and time the response."""
    position = position or layout.positions[0]
    quiet = SimConfig(**{**asdict(sim_config), "noise_sigma_nm": 0.0})
    rate = quiet.sample_rate_hz
    start = 0.25
    stim = ContactStimulus(position, force, start, start + hold_s)
    stream = simulate_stream(layout, quiet, geom, [stim], start + 2 * hold_s)
    onset = int(round(start * rate))
    offset = int(round((start + hold_s) * rate))
    return measure_response_times(stream, onset, offset)


def _smooth(x, width):
    if width <= 1:
        return x
    kernel = np.ones(width) / width
    return np.convolve(x, kernel, mode="valid")


def contact_range(layout, sim_config, geom, point: NormalizedPoint, cycles, repeats: int = 10,
                  force: float = 1.0, seed=0, smooth: int = 20) -> float:
    """max - min of the peak channel over ``repeats`` contacts at ``point``.

    A ``smooth``-sample moving average is applied first so the range follows
    the response rather than the noise extremes.
    """
    dwell, gap = 0.5, 0.5
    stimuli = [ContactStimulus(point, force, gap + n * (dwell + gap), gap + n * (dwell + gap) + dwell)
               for n in range(repeats)]
    stream = simulate_stream(layout, sim_config, geom, stimuli, gap + repeats * (dwell + gap),
                             seed=seed, cycles=cycles)
    w = kernel_weights(layout, sim_config, geom, point.u, point.v)
    x = _smooth(stream.wavelengths_nm[:, int(np.argmax(w))], smooth)
    return float(x.max() - x.min())


def measure_degradation(layout: FbgLayout, sim_config: SimConfig, geom: SensorGeometry,
                        fixed_point: NormalizedPoint, cycles, repeats: int = 10, seed=0) -> float:
    """``1 - R_initial / R_after`` for wear of ``cycles`` contact cycles."""
    seeds = np.random.SeedSequence(seed).spawn(2)
    r0 = contact_range(layout, sim_config, geom, fixed_point, 0, repeats, seed=seeds[0])
    r1 = contact_range(layout, sim_config, geom, fixed_point, cycles, repeats, seed=seeds[1])
    return 1.0 - r0 / r1


@dataclass
class ConsistencyReport:
    seeds: list
    mean_errors_mm: list
    contact_accuracies: list = field(default_factory=list)

    @property
    def spread_mm(self) -> float:
        return float(max(self.mean_errors_mm) - min(self.mean_errors_mm))

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["spread_mm"] = self.spread_mm
        return rec

    def table(self) -> str:
        names = [f"Sensor {n + 1}" for n in range(len(self.seeds))]
        head = "".ljust(16) + "".join(s.rjust(11) for s in names)
        row = "Accuracy (mm)".ljust(16) + "".join(f"{e:11.2f}" for e in self.mean_errors_mm)
        return "\n".join([head, row, f"spread: {self.spread_mm:.2f} mm"])


def cross_sensor_consistency(base_layout: FbgLayout, seeds, runner) -> ConsistencyReport:
    """Run ``runner(layout_seed)`` per sensor instance and collect mean errors.

    ``runner`` perturbs ``base_layout``, regenerates calibration data,
    retrains and returns a :class:`LocalizationReport`.
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("need at least two sensor instances")
    reports = [runner(s) for s in seeds]
    return ConsistencyReport(seeds, [r.mean_error_mm for r in reports],
                             [r.contact_accuracy for r in reports])
