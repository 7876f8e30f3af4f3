"""Simulated calibration rig, stream labeling and window construction.

The rig probes every grid cell on the front of the sensor, several times with
a small random displacement, then rotates the sensor and repeats until a full
turn is covered. The recorded stream is labeled around each contact midpoint
and cut into fixed-length history windows whose label is taken at the right
edge (the prediction instant).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fbgsim import (ContactStimulus, FbgLayout, SimConfig, WavelengthStream,
                     sample_span, simulate_stream)
from .geometry import NormalizedPoint, SensorGeometry, grid_angle


@dataclass(frozen=True)
class ScanPlan:
    attempts_per_point: int = 3
    jitter_sigma_mm: float = 0.5
    dwell_s: float = 0.4
    gap_s: float = 0.6
    probe_force_N: float = 1.0
    rotations: int | None = None  # None: a full turn at the geometry's increment

    def __post_init__(self):
        if self.attempts_per_point < 1:
            raise ValueError("attempts_per_point must be at least 1")
        if self.dwell_s <= 0 or self.gap_s < 0 or self.jitter_sigma_mm < 0 or self.probe_force_N < 0:
            raise ValueError("invalid scan timing, jitter or force")

    def rotation_count(self, geom: SensorGeometry) -> int:
        return geom.rotations if self.rotations is None else int(self.rotations)

    def contact_count(self, geom: SensorGeometry) -> int:
        return geom.grid_cols * geom.grid_rows * self.rotation_count(geom) * self.attempts_per_point


@dataclass(frozen=True)
class ContactEvent:
    idx_mid: int
    truth: NormalizedPoint
    force_N: float
    clamped: bool = False


def scan_targets(geom: SensorGeometry, plan: ScanPlan):
    """Nominal (theta, y) of every contact, in scan order: rotation, row, column, attempt."""
    out = []
    for k in range(plan.rotation_count(geom)):
        for j in range(geom.grid_rows):
            for i in range(geom.grid_cols):
                theta = float(grid_angle(geom, i, k))
                out += [(theta, j * geom.spacing_y_mm)] * plan.attempts_per_point
    return out


def run_scan(geom: SensorGeometry, layout: FbgLayout, sim_config: SimConfig,
             plan: ScanPlan, seed: int, cycles: float = 0):
    """Simulate a complete calibration scan.

    Returns the recorded :class:`WavelengthStream` and the list of
    :class:`ContactEvent` (one per contact, sorted by midpoint).
    """
    jitter_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(jitter_seq)
    targets = scan_targets(geom, plan)
    n = len(targets)
    if plan.jitter_sigma_mm > 0:
        jitter = rng.normal(0.0, plan.jitter_sigma_mm, size=(n, 2))
    else:
        jitter = np.zeros((n, 2))

    rate = sim_config.sample_rate_hz
    period = plan.dwell_s + plan.gap_s
    stimuli, events = [], []
    for c, ((theta, y), (d_arc, d_y)) in enumerate(zip(targets, jitter)):
        theta = theta + d_arc / geom.radius_mm
        y = y + d_y
        clamped = not 0.0 <= y <= geom.height_mm
        y = min(max(y, 0.0), geom.height_mm)
        truth = NormalizedPoint(theta / (2.0 * math.pi), y / geom.height_mm)
        start = plan.gap_s + c * period
        stim = ContactStimulus(truth, plan.probe_force_N, start, start + plan.dwell_s)
        n0, n1 = sample_span(stim.start_time_s, stim.end_time_s, rate)
        stimuli.append(stim)
        events.append(ContactEvent((n0 + n1 - 1) // 2, truth, plan.probe_force_N, clamped))
    duration = plan.gap_s + n * period
    stream = simulate_stream(layout, sim_config, geom, stimuli, duration,
                             seed=noise_seq, cycles=cycles)
    return stream, events


@dataclass
class StreamLabels:
    """Per-sample labels: ``contact`` flag and ``event`` (nearest event index)."""

    contact: np.ndarray
    event: np.ndarray

    def __len__(self):
        return len(self.contact)


def _length(frames) -> int:
    if isinstance(frames, (int, np.integer)):
        return int(frames)
    return len(frames)


def label_stream(frames, events, w_p: int) -> StreamLabels:
    """Mark samples within ``w_p`` of any contact midpoint as positive.

    Every sample is also tied to its nearest event (ties go to the earlier
    one). Positive samples take that event's position.
    """
    if w_p <= 0:
        raise ValueError("w_p must be positive")
    n = _length(frames)
    idx = np.arange(n)
    if not events:
        return StreamLabels(np.zeros(n, dtype=bool), np.full(n, -1, dtype=np.int64))
    mids = np.array([e.idx_mid for e in events])
    if np.any(np.diff(mids) < 0):
        raise ValueError("events must be sorted by idx_mid")
    right = np.clip(np.searchsorted(mids, idx, side="left"), 0, len(mids) - 1)
    left = np.clip(right - 1, 0, len(mids) - 1)
    d_left = np.abs(idx - mids[left])
    d_right = np.abs(mids[right] - idx)
    nearest = np.where(d_left <= d_right, left, right)
    dist = np.minimum(d_left, d_right)
    return StreamLabels(dist <= w_p, nearest.astype(np.int64))


@dataclass(frozen=True)
class LabeledWindow:
    signal: np.ndarray  # (T, K)
    contact: bool
    position: NormalizedPoint | None


class WindowSet:
    """Windows over a shared sample matrix, stored as right-edge indices.

    Window ``n`` covers samples ``[ends[n] - window_len, ends[n])`` of
    ``data`` and carries the label of sample ``ends[n] - 1``.
    """

    def __init__(self, data, ends, window_len, contact, positions, event):
        self.data = np.asarray(data, dtype=np.float64)
        self.ends = np.asarray(ends, dtype=np.int64)
        self.window_len = int(window_len)
        self.contact = np.asarray(contact, dtype=bool)
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        self.event = np.asarray(event, dtype=np.int64)

    def __len__(self):
        return len(self.ends)

    def __getitem__(self, n) -> LabeledWindow:
        pos = NormalizedPoint(*self.positions[n]) if self.contact[n] else None
        return LabeledWindow(self.signals([n])[0], bool(self.contact[n]), pos)

    def signals(self, idx=None) -> np.ndarray:
        ends = self.ends if idx is None else self.ends[np.asarray(idx)]
        rows = ends[:, None] + np.arange(-self.window_len, 0)
        return self.data[rows]

    def batch(self, idx):
        idx = np.asarray(idx)
        return self.signals(idx), self.positions[idx], self.contact[idx]

    def subset(self, idx) -> "WindowSet":
        idx = np.asarray(idx)
        return WindowSet(self.data, self.ends[idx], self.window_len, self.contact[idx],
                         self.positions[idx], self.event[idx])

    def with_data(self, data) -> "WindowSet":
        return WindowSet(data, self.ends, self.window_len, self.contact, self.positions, self.event)


def make_windows(frames, labels: StreamLabels, w_d: int, stride: int, events=None) -> WindowSet:
    """Slide a ``w_d``-sample window over the stream in steps of ``stride``."""
    data = frames.wavelengths_nm if isinstance(frames, WavelengthStream) else np.asarray(frames)
    n = len(data)
    if n < w_d:
        raise ValueError("stream shorter than one window")
    ends = np.arange(w_d, n + 1, stride)
    last = ends - 1
    contact = labels.contact[last]
    event = labels.event[last]
    positions = np.full((len(ends), 2), np.nan)
    if events:
        uv = np.array([[e.truth.u, e.truth.v] for e in events])
        positions[contact] = uv[event[contact]]
    return WindowSet(data, ends, w_d, contact, positions, event)


def channel_range(stream) -> np.ndarray:
    """Per-channel max - min over a stream (the normalization scale)."""
    data = stream.wavelengths_nm if isinstance(stream, WavelengthStream) else np.asarray(stream)
    return data.max(axis=0) - data.min(axis=0)


def _safe_scale(scale) -> np.ndarray:
    scale = np.asarray(scale, dtype=float).copy()
    bad = ~(scale > np.finfo(float).eps)
    if np.any(bad):
        warnings.warn(f"zero-range channels {np.flatnonzero(bad).tolist()}; scale clamped to eps")
        scale[bad] = np.finfo(float).eps
    return scale


def normalize_signals(windows, baseline, scale):
    """``(x - baseline) / scale`` per channel.

    Accepts a :class:`WindowSet` (its sample matrix is normalized) or a raw
    array whose last axis is the channel axis.
    """
    scale = _safe_scale(scale)
    baseline = np.asarray(baseline, dtype=float)
    if isinstance(windows, WindowSet):
        return windows.with_data((windows.data - baseline) / scale)
    return (np.asarray(windows, dtype=float) - baseline) / scale


def denormalize_signals(x, baseline, scale):
    return np.asarray(x) * _safe_scale(scale) + np.asarray(baseline, dtype=float)


def balance_windows(windows: WindowSet, ratio: float = 1.0, seed=0) -> WindowSet:
    """Keep every positive window and ``ratio`` negatives per positive."""
    pos = np.flatnonzero(windows.contact)
    neg = np.flatnonzero(~windows.contact)
    want = min(len(neg), int(round(len(pos) * ratio)))
    rng = np.random.default_rng(seed)
    keep_neg = rng.choice(neg, size=want, replace=False) if want else np.array([], dtype=np.int64)
    return windows.subset(np.sort(np.concatenate([pos, keep_neg])))


def split_events(n_events: int, test_fraction: float, seed) -> np.ndarray:
    """Indices of the events held out for testing."""
    if n_events < 2:
        raise ValueError("need at least two contact events to split")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n_test = min(max(int(round(n_events * test_fraction)), 1), n_events - 1)
    perm = np.random.default_rng(seed).permutation(n_events)
    return np.sort(perm[:n_test])


def split_dataset(windows: WindowSet, events, test_fraction: float, seed):
    """Split windows by owning event so no event straddles train and test."""
    test_events = split_events(len(events), test_fraction, seed)
    in_test = np.isin(windows.event, test_events)
    return windows.subset(np.flatnonzero(~in_test)), windows.subset(np.flatnonzero(in_test))
