"""Fiber Bragg grating fingertip simulator.

Each grating responds to a point contact through a Gaussian kernel in chord
distance, so shifts are local, symmetric and decay with distance. The
steady-state shift is tracked by an asymmetric first-order filter (separate
rise and fall time constants), scaled by a wear gain that grows linearly with
contact cycles, and corrupted by white baseline noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import NormalizedPoint, SensorGeometry, chord_distance_mm

BAND_NM = (1525.0, 1565.0)
MIN_SEPARATION_NM = 1.0

# 10%-90% style step timing of a first-order lag: t = tau * ln(10)
RISE_TIME_MS = 87.0
FALL_TIME_MS = 92.0

# wear gain per cycle giving 1 - 1/gain = 3.74% after 1760 cycles
DEFAULT_DEGRADATION = (1.0 / (1.0 - 0.0374) - 1.0) / 1760.0
# 14% after 100 touches (the camera-based comparison sensor)
DIGIT_DEGRADATION = (1.0 / (1.0 - 0.14) - 1.0) / 100.0


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class FbgLayout:
    """Ordered gratings on one fiber: nominal wavelengths and surface positions."""

    wavelengths_nm: tuple
    positions: tuple  # of NormalizedPoint
    fiber_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "wavelengths_nm", tuple(float(w) for w in self.wavelengths_nm))
        object.__setattr__(self, "positions", tuple(self.positions))
        self.validate()

    def validate(self):
        wl = np.asarray(self.wavelengths_nm)
        if len(wl) == 0 or len(wl) != len(self.positions):
            raise LayoutError("need one position per grating and at least one grating")
        if wl.min() < BAND_NM[0] or wl.max() > BAND_NM[1]:
            raise LayoutError(f"nominal wavelengths must lie in {BAND_NM} nm")
        if np.any(np.diff(wl) < MIN_SEPARATION_NM):
            raise LayoutError("nominal wavelengths must increase by at least 1 nm")
        for p in self.positions:
            if not 0.0 <= p.v <= 1.0:
                raise LayoutError("grating positions must lie on the cylindrical band")

    @property
    def count(self) -> int:
        return len(self.wavelengths_nm)

    @property
    def nominal(self) -> np.ndarray:
        return np.asarray(self.wavelengths_nm)

    @property
    def uv(self) -> np.ndarray:
        return np.array([[p.u, p.v] for p in self.positions])

    @property
    def gratings(self):
        return list(zip(self.wavelengths_nm, self.positions))


def default_layout(rings=(0.15, 0.45), per_ring: int = 4, fiber_id: int = 0) -> FbgLayout:
    """Gratings evenly spread in angle on fixed-height rings.

    Successive rings are staggered by half the angular pitch.
    """
    positions = []
    for r, v in enumerate(rings):
        offset = 0.5 * r / per_ring
        positions += [NormalizedPoint(offset + q / per_ring, v) for q in range(per_ring)]
    k = len(positions)
    pitch = (BAND_NM[1] - BAND_NM[0]) / k
    wavelengths = BAND_NM[0] + pitch * (np.arange(k) + 0.5)
    return FbgLayout(tuple(wavelengths), tuple(positions), fiber_id)


@dataclass(frozen=True)
class SimConfig:
    kernel_sigma_mm: float = 4.0
    force_sensitivity_nm_per_N: float = 0.1071
    noise_sigma_nm: float = 0.001
    rise_tau_ms: float = RISE_TIME_MS / math.log(10.0)
    fall_tau_ms: float = FALL_TIME_MS / math.log(10.0)
    sample_rate_hz: float = 2000.0
    degradation_gain_per_cycle: float = DEFAULT_DEGRADATION
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("kernel_sigma_mm", "force_sensitivity_nm_per_N", "rise_tau_ms",
                     "fall_tau_ms", "sample_rate_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_sigma_nm < 0 or self.degradation_gain_per_cycle < 0:
            raise ValueError("noise and degradation gain must be non-negative")

    @classmethod
    def digit_profile(cls, **kw) -> "SimConfig":
        return cls(degradation_gain_per_cycle=DIGIT_DEGRADATION, **kw)


@dataclass(frozen=True)
class ContactStimulus:
    position: NormalizedPoint
    force_N: float
    start_time_s: float
    end_time_s: float

    def __post_init__(self):
        if self.force_N < 0:
            raise ValueError("force must be non-negative")
        if not self.end_time_s > self.start_time_s:
            raise ValueError("stimulus must end after it starts")


@dataclass(frozen=True)
class WavelengthFrame:
    timestamp_ns: int
    wavelengths_nm: np.ndarray


@dataclass
class WavelengthStream:
    """A block of frames stored column-wise: ``timestamps_ns`` (N,) and
    ``wavelengths_nm`` (N, K)."""

    timestamps_ns: np.ndarray
    wavelengths_nm: np.ndarray
    sample_rate_hz: float = 2000.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.timestamps_ns = np.asarray(self.timestamps_ns, dtype=np.uint64)
        self.wavelengths_nm = np.asarray(self.wavelengths_nm, dtype=np.float64)
        if self.wavelengths_nm.ndim != 2 or len(self.timestamps_ns) != len(self.wavelengths_nm):
            raise ValueError("timestamps and wavelength matrix disagree in length")

    def __len__(self):
        return len(self.timestamps_ns)

    def __getitem__(self, n) -> WavelengthFrame:
        return WavelengthFrame(int(self.timestamps_ns[n]), self.wavelengths_nm[n].copy())

    def __iter__(self):
        for n in range(len(self)):
            yield self[n]

    @property
    def channels(self) -> int:
        return self.wavelengths_nm.shape[1]


def kernel_weights(layout: FbgLayout, config: SimConfig, geom: SensorGeometry, u, v) -> np.ndarray:
    """Kernel attenuation of every grating for contacts at (u, v); shape (..., K)."""
    uv = layout.uv
    u = np.asarray(u, dtype=float)[..., None]
    v = np.asarray(v, dtype=float)[..., None]
    g = chord_distance_mm(geom, u, v, uv[:, 0], uv[:, 1])
    return np.exp(-0.5 * (g / config.kernel_sigma_mm) ** 2)


def steady_state_shift(layout: FbgLayout, config: SimConfig, geom: SensorGeometry,
                       contact: ContactStimulus) -> np.ndarray:
    """Settled wavelength shift (nm) of each grating under ``contact``."""
    w = kernel_weights(layout, config, geom, contact.position.u, contact.position.v)
    return config.force_sensitivity_nm_per_N * contact.force_N * w


def apply_degradation(config: SimConfig, cycles) -> float:
    """Response gain after ``cycles`` wear cycles."""
    if cycles < 0:
        raise ValueError("cycle count must be non-negative")
    return 1.0 + config.degradation_gain_per_cycle * cycles


def sample_span(t0: float, t1: float, rate: float) -> tuple[int, int]:
    """Half-open sample range [n0, n1) with t0 <= n / rate < t1."""
    n0 = int(math.ceil(t0 * rate - 1e-9))
    n1 = int(math.ceil(t1 * rate - 1e-9))
    return n0, n1


def target_matrix(layout, config, geom, stimuli, n_samples: int) -> np.ndarray:
    """Per-sample steady-state targets; overlapping stimuli add."""
    target = np.zeros((n_samples, layout.count))
    for s in stimuli:
        n0, n1 = sample_span(s.start_time_s, s.end_time_s, config.sample_rate_hz)
        target[max(n0, 0):min(n1, n_samples)] += steady_state_shift(layout, config, geom, s)
    return target


def first_order_response(target: np.ndarray, rise_tau_s: float, fall_tau_s: float,
                         dt: float, initial=None) -> np.ndarray:
    """Run s[t] = a*s[t-1] + (1-a)*target[t] with a direction-dependent ``a``.

    The target is piecewise constant, and within a constant stretch the state
    approaches it monotonically from one side, so each stretch is evaluated in
    closed form instead of sample by sample.
    """
    n, k = target.shape
    out = np.empty_like(target, dtype=float)
    a_rise = math.exp(-dt / rise_tau_s)
    a_fall = math.exp(-dt / fall_tau_s)
    state = np.zeros(k) if initial is None else np.asarray(initial, dtype=float).copy()
    if n == 0:
        return out
    change = np.flatnonzero(np.any(target[1:] != target[:-1], axis=1)) + 1
    bounds = np.concatenate([[0], change, [n]])
    for a, b in zip(bounds[:-1], bounds[1:]):
        tgt = target[a]
        alpha = np.where(tgt > state, a_rise, a_fall)
        steps = np.arange(1, b - a + 1)[:, None]
        out[a:b] = tgt + (state - tgt) * alpha ** steps
        state = out[b - 1]
    return out


def simulate_stream(layout: FbgLayout, config: SimConfig, geom: SensorGeometry,
                    stimuli, duration_s: float, seed=None, cycles: float = 0,
                    start_timestamp_ns: int = 0) -> WavelengthStream:
    """Sampled wavelengths of every grating over ``duration_s`` seconds.

    ``seed`` defaults to ``config.rng_seed``. Identical inputs give
    bit-identical streams.
    """
    stimuli = list(stimuli)
    if stimuli and duration_s < max(s.end_time_s for s in stimuli):
        raise ValueError("duration ends before the last stimulus")
    rate = config.sample_rate_hz
    n = int(round(duration_s * rate))
    target = target_matrix(layout, config, geom, stimuli, n)
    shift = first_order_response(target, config.rise_tau_ms * 1e-3,
                                 config.fall_tau_ms * 1e-3, 1.0 / rate)
    wl = layout.nominal + shift * apply_degradation(config, cycles)
    if config.noise_sigma_nm > 0:
        rng = np.random.default_rng(config.rng_seed if seed is None else seed)
        wl = wl + rng.normal(0.0, config.noise_sigma_nm, size=wl.shape)
    ts = np.uint64(start_timestamp_ns) + np.round(np.arange(n) * (1e9 / rate)).astype(np.uint64)
    return WavelengthStream(ts, wl, rate)


def perturb_layout(layout: FbgLayout, placement_sigma_mm: float, wavelength_sigma_nm: float,
                   seed, geom: SensorGeometry | None = None) -> FbgLayout:
    """Fabrication variant of ``layout``: jittered positions and nominal wavelengths.

    Raises :class:`LayoutError` if the jitter breaks the layout invariants;
    callers retry with another seed.
    """
    geom = geom or SensorGeometry()
    rng = np.random.default_rng(seed)
    k = layout.count
    uv = layout.uv
    arc = rng.normal(0.0, placement_sigma_mm, k) if placement_sigma_mm > 0 else np.zeros(k)
    dy = rng.normal(0.0, placement_sigma_mm, k) if placement_sigma_mm > 0 else np.zeros(k)
    dw = rng.normal(0.0, wavelength_sigma_nm, k) if wavelength_sigma_nm > 0 else np.zeros(k)
    u = uv[:, 0] + arc / (2.0 * math.pi * geom.radius_mm)
    v = uv[:, 1] + dy / geom.height_mm
    if np.any((v < 0) | (v > 1)):
        raise LayoutError("perturbed grating left the band")
    positions = tuple(NormalizedPoint(a, b) for a, b in zip(u, v))
    return replace(layout, wavelengths_nm=tuple(layout.nominal + dw), positions=positions)


def simulate_force_profile(layout: FbgLayout, config: SimConfig, geom: SensorGeometry,
                           position: NormalizedPoint, forces, seed=None, cycles: float = 0,
                           start_timestamp_ns: int = 0) -> WavelengthStream:
    """Stream for one contact point whose force is given per sample.

    Same response model as :func:`simulate_stream`, with the target held
    constant over each sample.
    """
    forces = np.asarray(forces, dtype=float)
    if np.any(forces < 0):
        raise ValueError("force must be non-negative")
    unit = kernel_weights(layout, config, geom, position.u, position.v) * config.force_sensitivity_nm_per_N
    target = forces[:, None] * unit
    rate = config.sample_rate_hz
    shift = first_order_response(target, config.rise_tau_ms * 1e-3, config.fall_tau_ms * 1e-3, 1.0 / rate)
    wl = layout.nominal + shift * apply_degradation(config, cycles)
    if config.noise_sigma_nm > 0:
        rng = np.random.default_rng(config.rng_seed if seed is None else seed)
        wl = wl + rng.normal(0.0, config.noise_sigma_nm, size=wl.shape)
    n = len(forces)
    ts = np.uint64(start_timestamp_ns) + np.round(np.arange(n) * (1e9 / rate)).astype(np.uint64)
    return WavelengthStream(ts, wl, rate)
