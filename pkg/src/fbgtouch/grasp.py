"""Synthetic grasp episodes and a tactile / proprioception stability classifier.

An episode is a scripted approach, contact, squeeze and lift of an object by
three instrumented fingers at 30 Hz. Stable episodes hold their grip force
through the lift. Failures either slip (grip force decays after the lift
starts) or never close properly (grip force stays small). Joint angles follow
the same scripted closure regardless of outcome, so stability is visible only
through touch.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import nn
from .fbgsim import FbgLayout, SimConfig, WavelengthStream, default_layout, simulate_force_profile
from .geometry import NormalizedPoint, SensorGeometry

log = logging.getLogger(__name__)

N_JOINTS = 16
STABLE, FAILURE = "stable", "failure"


@dataclass(frozen=True)
class EpisodeConfig:
    object_width_range_mm: tuple = (40.0, 90.0)
    squeeze_force_range_N: tuple = (1.5, 3.0)
    weak_force_range_N: tuple = (0.0, 0.3)
    slip_fraction: float = 0.5  # share of failures that slip rather than under-close
    slip_delay_range_s: tuple = (0.2, 1.0)
    slip_tau_s: float = 0.3
    slip_residual_range: tuple = (0.0, 0.2)
    episode_length_s: float = 10.0
    frame_rate_hz: float = 30.0
    fingers: int = 3
    joint_noise_rad: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name in ("object_width_range_mm", "squeeze_force_range_N", "weak_force_range_N",
                     "slip_delay_range_s", "slip_residual_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} must be a non-negative ordered range")
        if self.object_width_range_mm[0] <= 0 or self.squeeze_force_range_N[0] <= 0:
            raise ValueError("object widths and squeeze forces must be positive")
        if not 0.0 <= self.slip_fraction <= 1.0:
            raise ValueError("slip_fraction must lie in [0, 1]")
        if self.fingers < 1 or self.episode_length_s <= 0 or self.frame_rate_hz <= 0:
            raise ValueError("invalid finger count, length or frame rate")


@dataclass
class GraspEpisode:
    tactile: list  # one WavelengthStream per finger
    proprio: np.ndarray  # (N, 16) joint angles, rad
    label: str
    frame_rate_hz: float = 30.0
    failure_mode: str | None = None
    forces: np.ndarray | None = field(default=None, repr=False)  # (N, fingers) applied

    def __post_init__(self):
        if self.label not in (STABLE, FAILURE):
            raise ValueError(f"label must be {STABLE!r} or {FAILURE!r}")
        n = len(self.proprio)
        if any(len(s) != n for s in self.tactile):
            raise ValueError("all episode streams must have equal length")

    def __len__(self):
        return len(self.proprio)

    @property
    def stable(self) -> bool:
        return self.label == STABLE


def finger_layouts(fingers: int = 3) -> list:
    return [replace(default_layout(), fiber_id=f) for f in range(fingers)]


_OPEN_POSE = np.linspace(0.05, 0.3, N_JOINTS)
_CLOSE_DIR = np.tile([0.2, 1.0, 0.9, 0.7], N_JOINTS // 4)


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _episode(config, label, mode, rng, layouts, sim, geom, noise_seed):
    rate = config.frame_rate_hz
    n = int(round(config.episode_length_s * rate))
    t = np.arange(n) / rate
    t_contact = rng.uniform(1.5, 2.5)
    t_lift = t_contact + rng.uniform(1.0, 1.5)
    width = rng.uniform(*config.object_width_range_mm)

    # joint closure depends on object width only
    lo, hi = config.object_width_range_mm
    closure = 1.0 - 0.5 * (width - lo) / max(hi - lo, 1e-9)
    reach = _smoothstep((t - (t_contact - 1.0)) / 1.0)
    proprio = _OPEN_POSE + np.outer(reach * closure, _CLOSE_DIR)
    proprio = proprio + rng.normal(0.0, config.joint_noise_rad, proprio.shape)

    if mode == "weak":
        grip = rng.uniform(*config.weak_force_range_N)
    else:
        grip = rng.uniform(*config.squeeze_force_range_N)
    profile = grip * np.clip((t - t_contact) / 0.5, 0.0, 1.0)
    if mode == "slip":
        t_slip = t_lift + rng.uniform(*config.slip_delay_range_s)
        residual = rng.uniform(*config.slip_residual_range)
        after = np.maximum(t - t_slip, 0.0)
        decay = residual + (1.0 - residual) * np.exp(-after / config.slip_tau_s)
        profile = profile * np.where(t >= t_slip, decay, 1.0)

    seeds = noise_seed.spawn(len(layouts))
    streams, forces = [], []
    for f, layout in enumerate(layouts):
        share = rng.uniform(0.8, 1.2)
        ripple = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(0.3, 1.0) * t + rng.uniform(0, 2 * np.pi))
        force = np.maximum(profile * share * ripple, 0.0)
        where = NormalizedPoint(rng.uniform(0.4, 0.6), rng.uniform(0.2, 0.5))
        streams.append(simulate_force_profile(layout, sim, geom, where, force, seed=seeds[f]))
        forces.append(force)
    return GraspEpisode(streams, proprio, label, rate, None if label == STABLE else mode,
                        np.stack(forces, axis=1))


def episode_sim_config(config: EpisodeConfig, sim: SimConfig | None = None) -> SimConfig:
    sim = sim or SimConfig()
    return replace(sim, sample_rate_hz=config.frame_rate_hz)


def generate_episodes(config: EpisodeConfig, count: int, seed=None, stable_fraction: float = 0.5,
                      sim: SimConfig | None = None, geom: SensorGeometry | None = None) -> list:
    """``count`` episodes with exactly ``round(count * stable_fraction)`` stable ones.

    Failure episodes alternate between slip and weak closure in the ratio
    ``config.slip_fraction``. Deterministic in ``seed`` (default ``config.seed``).
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    seed = config.seed if seed is None else seed
    label_seq, episode_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(label_seq)
    n_stable = int(round(count * stable_fraction))
    n_fail = count - n_stable
    n_slip = int(round(n_fail * config.slip_fraction))
    modes = ["hold"] * n_stable + ["slip"] * n_slip + ["weak"] * (n_fail - n_slip)
    modes = [modes[i] for i in rng.permutation(count)]
    sim = episode_sim_config(config, sim)
    geom = geom or SensorGeometry()
    layouts = finger_layouts(config.fingers)
    out = []
    for mode, child in zip(modes, episode_seq.spawn(count)):
        ep_seq, noise_seq = child.spawn(2)
        label = STABLE if mode == "hold" else FAILURE
        out.append(_episode(config, label, mode, np.random.default_rng(ep_seq), layouts, sim, geom, noise_seq))
    return out


@dataclass
class GraspNormalizer:
    """Per-channel offsets and scales for tactile and joint features."""

    tactile_baseline: np.ndarray
    tactile_scale: np.ndarray
    joint_mean: np.ndarray
    joint_scale: np.ndarray

    @classmethod
    def fit(cls, episodes, layouts=None) -> "GraspNormalizer":
        """Baseline from the nominal wavelengths, scale from the largest shift seen."""
        layouts = layouts or finger_layouts(len(episodes[0].tactile))
        tac = np.concatenate([np.hstack([s.wavelengths_nm for s in ep.tactile]) for ep in episodes])
        nominal = np.concatenate([lay.nominal for lay in layouts])
        span = (tac - nominal).max(axis=0)
        span = np.where(span > 1e-9, span, 1.0)
        q = np.concatenate([ep.proprio for ep in episodes])
        std = q.std(axis=0)
        return cls(nominal, span, q.mean(axis=0), np.where(std > 1e-9, std, 1.0))

    def to_record(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in asdict(self).items()}

    @classmethod
    def from_record(cls, rec) -> "GraspNormalizer":
        return cls(**{k: np.asarray(v, dtype=float) for k, v in rec.items()})


@dataclass
class GraspWindows:
    X: np.ndarray  # (N, window, fingers*K + 16)
    stable: np.ndarray  # (N,) bool
    episode: np.ndarray  # (N,) index into the source episode list
    tactile_channels: int

    def __len__(self):
        return len(self.X)

    def subset(self, idx) -> "GraspWindows":
        return GraspWindows(self.X[idx], self.stable[idx], self.episode[idx], self.tactile_channels)


def episode_features(ep: GraspEpisode, norm: GraspNormalizer | None) -> np.ndarray:
    tac = np.hstack([s.wavelengths_nm for s in ep.tactile])
    q = ep.proprio
    if norm is not None:
        tac = (tac - norm.tactile_baseline) / norm.tactile_scale
        q = (q - norm.joint_mean) / norm.joint_scale
    return np.hstack([tac, q])


def preprocess_episodes(episodes, normalizer: GraspNormalizer | None = None, downsample: int = 3,
                        window: int = 30, stride: int = 1) -> GraspWindows:
    """Downsample, concatenate fingers and joints per frame, and cut windows."""
    xs, ys, eps = [], [], []
    tactile = None
    for n, ep in enumerate(episodes):
        if len(ep) < downsample * window:
            warnings.warn(f"episode {n} has {len(ep)} frames, fewer than {downsample * window}; skipped")
            continue
        feats = episode_features(ep, normalizer)[::downsample]
        tactile = sum(s.channels for s in ep.tactile)
        starts = np.arange(0, len(feats) - window + 1, stride)
        xs.append(feats[starts[:, None] + np.arange(window)])
        ys.append(np.full(len(starts), ep.stable))
        eps.append(np.full(len(starts), n))
    if not xs:
        raise ValueError("no episode long enough to window")
    return GraspWindows(np.concatenate(xs), np.concatenate(ys), np.concatenate(eps), tactile)


def _inputs(windows: GraspWindows, use_tactile: bool) -> np.ndarray:
    X = windows.X
    if not use_tactile:
        X = X.copy()
        X[..., :windows.tactile_channels] = 0.0
    return X


def stability_model_config(windows: GraspWindows, **kw) -> nn.ModelConfig:
    base = dict(input_dim=windows.X.shape[2], window_len=windows.X.shape[1], feature_dim=32,
                epochs=15, seed=0)
    base.update(kw)
    return nn.ModelConfig(**base)


def train_stability(windows: GraspWindows, config: nn.ModelConfig, use_tactile: bool = True):
    """Fit the contact head of the network as a stability classifier.

    The position head is left untrained. Tactile channels are zeroed when
    ``use_tactile`` is false; nothing else differs between the two arms.
    """
    if windows.stable.all() or not windows.stable.any():
        raise ValueError("stability training needs both stable and failure windows")
    data = nn.ArrayDataset(_inputs(windows, use_tactile), np.zeros((len(windows), 2)),
                           windows.stable, use_positions=False)
    params, history = nn.train(data, config)
    return params


@dataclass
class StabilityReport:
    accuracy: float
    window_accuracy: float
    confusion: dict
    stable_rate: float  # recall on stable episodes
    failure_rate: float  # recall on failure episodes
    episodes: int

    def to_record(self) -> dict:
        return asdict(self)


def evaluate_stability(params, windows: GraspWindows, use_tactile: bool = True,
                       predictor=None) -> StabilityReport:
    """Episode-level accuracy by majority vote of window decisions."""
    if len(windows) == 0:
        raise ValueError("empty held-out set")
    if predictor is None:
        _, prob = nn.predict_batch(params, _inputs(windows, use_tactile))
    else:
        prob = np.asarray(predictor(_inputs(windows, use_tactile)), dtype=float)
    vote = prob >= 0.5
    ids = np.unique(windows.episode)
    pred, truth = [], []
    for e in ids:
        sel = windows.episode == e
        share = vote[sel].mean()
        pred.append(share > 0.5 or (share == 0.5 and prob[sel].mean() >= 0.5))
        truth.append(bool(windows.stable[sel][0]))
    pred, truth = np.array(pred), np.array(truth)
    conf = {"tp": int(np.sum(pred & truth)), "fp": int(np.sum(pred & ~truth)),
            "tn": int(np.sum(~pred & ~truth)), "fn": int(np.sum(~pred & truth))}
    return StabilityReport(
        accuracy=float(np.mean(pred == truth)),
        window_accuracy=float(np.mean(vote == windows.stable)),
        confusion=conf,
        stable_rate=float(np.mean(pred[truth])) if truth.any() else float("nan"),
        failure_rate=float(np.mean(~pred[~truth])) if (~truth).any() else float("nan"),
        episodes=len(ids),
    )


def split_episodes(episodes, test_fraction: float = 0.25, seed=0):
    """Stratified episode-level split; returns (train_idx, test_idx)."""
    rng = np.random.default_rng(seed)
    labels = np.array([ep.stable for ep in episodes])
    test = []
    for cls in (True, False):
        idx = np.flatnonzero(labels == cls)
        k = int(round(len(idx) * test_fraction))
        test += list(rng.permutation(idx)[:k])
    test = np.sort(np.array(test, dtype=int))
    train = np.setdiff1d(np.arange(len(episodes)), test)
    return train, test


@dataclass
class AblationResult:
    with_tactile: StabilityReport
    without_tactile: StabilityReport
    manifests: dict

    @property
    def gap(self) -> float:
        return self.with_tactile.accuracy - self.without_tactile.accuracy

    def to_record(self) -> dict:
        return {"with_tactile": self.with_tactile.to_record(),
                "without_tactile": self.without_tactile.to_record(),
                "gap": self.gap, "manifests": self.manifests}


def run_ablation(config: EpisodeConfig | None = None, count: int = 200, seed: int = 0,
                 model_overrides: dict | None = None, test_fraction: float = 0.25,
                 episodes=None) -> AblationResult:
    """Train and score the classifier with and without tactile input on one split."""
    config = config or EpisodeConfig()
    episodes = generate_episodes(config, count, seed) if episodes is None else episodes
    train_idx, test_idx = split_episodes(episodes, test_fraction, seed)
    norm = GraspNormalizer.fit([episodes[i] for i in train_idx])
    train_w = preprocess_episodes([episodes[i] for i in train_idx], norm)
    test_w = preprocess_episodes([episodes[i] for i in test_idx], norm)
    mcfg = stability_model_config(train_w, seed=seed, **(model_overrides or {}))
    reports, manifests = {}, {}
    for use_tactile in (True, False):
        params = train_stability(train_w, mcfg, use_tactile)
        reports[use_tactile] = evaluate_stability(params, test_w, use_tactile)
        manifests["with_tactile" if use_tactile else "without_tactile"] = {
            "episode_config": asdict(config), "count": count, "seed": seed,
            "model": asdict(mcfg), "train_episodes": train_idx.tolist(),
            "test_episodes": test_idx.tolist(), "use_tactile": use_tactile,
        }
    return AblationResult(reports[True], reports[False], manifests)
