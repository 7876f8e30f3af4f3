"""Binary stream files, event logs, model checkpoints and result records.

Stream file (little-endian)::

    magic    4s   b"TCAP"
    version  u16  1
    K        u16  gratings per frame
    rate     f64  sample rate, Hz
    t0       u64  start timestamp, ns
    frames   N x (u64 timestamp_ns, K x f64 wavelength_nm)

Checkpoint file (little-endian)::

    magic    4s   b"TCKP"
    version  u16  1
    input_dim, window_len, feature_dim, batch_size, epochs   5 x u32
    seed     u64
    alpha, learning_rate                                     2 x f64
    has_norm u8
    parameters in declaration order, f64
    baseline (K x f64), scale (K x f64)   only when has_norm
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .calib import ContactEvent
from .fbgsim import WavelengthStream
from .geometry import NormalizedPoint
from .nn import PARAM_NAMES, ModelConfig, ModelParams

STREAM_MAGIC = b"TCAP"
STREAM_VERSION = 1
STREAM_HEADER = struct.Struct("<4sHHdQ")

CKPT_MAGIC = b"TCKP"
CKPT_VERSION = 1
CKPT_HEADER = struct.Struct("<4sH5IQ2dB")


class CorruptFileError(ValueError):
    """File content does not match its declared format."""


def _frame_dtype(k: int) -> np.dtype:
    return np.dtype([("t", "<u8"), ("wl", "<f8", (k,))])


def encode_stream(stream: WavelengthStream) -> bytes:
    k = stream.channels
    if not 1 <= k <= 0xFFFF:
        raise ValueError("grating count must fit in u16 and be at least 1")
    t0 = int(stream.timestamps_ns[0]) if len(stream) else 0
    frames = np.empty(len(stream), dtype=_frame_dtype(k))
    frames["t"] = stream.timestamps_ns
    frames["wl"] = stream.wavelengths_nm
    return STREAM_HEADER.pack(STREAM_MAGIC, STREAM_VERSION, k, float(stream.sample_rate_hz), t0) \
        + frames.tobytes()


def decode_stream(buf: bytes) -> WavelengthStream:
    if len(buf) < STREAM_HEADER.size:
        raise CorruptFileError("truncated stream: file shorter than its header")
    magic, version, k, rate, t0 = STREAM_HEADER.unpack_from(buf)
    if magic != STREAM_MAGIC:
        raise CorruptFileError(f"bad stream magic {magic!r}")
    if version != STREAM_VERSION:
        raise CorruptFileError(f"unsupported stream version {version}")
    if k < 1:
        raise CorruptFileError("stream declares zero gratings")
    dt = _frame_dtype(k)
    body = len(buf) - STREAM_HEADER.size
    if body % dt.itemsize:
        raise CorruptFileError(f"truncated stream: {body} body bytes is not a whole number "
                               f"of {dt.itemsize}-byte frames")
    frames = np.frombuffer(buf, dtype=dt, offset=STREAM_HEADER.size)
    if len(frames) and int(frames["t"][0]) != t0:
        raise CorruptFileError("first frame timestamp disagrees with header")
    if np.any(np.diff(frames["t"].astype(np.int64)) <= 0):
        raise CorruptFileError("frame timestamps are not strictly increasing")
    return WavelengthStream(frames["t"].copy(), frames["wl"].copy(), rate)


def write_stream(path, stream: WavelengthStream):
    Path(path).write_bytes(encode_stream(stream))


def read_stream(path) -> WavelengthStream:
    return decode_stream(Path(path).read_bytes())


def encode_events(events) -> str:
    lines = []
    for e in events:
        rec = {"idx_mid": int(e.idx_mid), "u": float(e.truth.u), "v": float(e.truth.v),
               "force_N": float(e.force_N), "clamped": bool(e.clamped)}
        lines.append(json.dumps(rec))
    return "".join(line + "\n" for line in lines)


def decode_events(text: str) -> list:
    events = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            events.append(ContactEvent(int(rec["idx_mid"]), NormalizedPoint(rec["u"], rec["v"]),
                                       float(rec["force_N"]), bool(rec.get("clamped", False))))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptFileError(f"bad event record on line {n}: {exc}") from exc
    return events


def write_events(path, events):
    Path(path).write_text(encode_events(events))


def read_events(path) -> list:
    return decode_events(Path(path).read_text())


def encode_checkpoint(params: ModelParams, config: ModelConfig, baseline=None, scale=None) -> bytes:
    has_norm = baseline is not None
    head = CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, config.input_dim, config.window_len,
                            config.feature_dim, config.batch_size, config.epochs, config.seed,
                            config.alpha, config.learning_rate, int(has_norm))
    if params.input_dim != config.input_dim or params.feature_dim != config.feature_dim:
        raise ValueError("parameter shapes disagree with the model config")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.arrays())
    if has_norm:
        for arr in (baseline, scale):
            arr = np.asarray(arr, dtype="<f8")
            if arr.shape != (config.input_dim,):
                raise ValueError("normalization vectors must have one entry per input channel")
            body += arr.tobytes()
    return head + body


def decode_checkpoint(buf: bytes):
    """Returns ``(params, config, baseline, scale)``; the last two may be None."""
    if len(buf) < CKPT_HEADER.size:
        raise CorruptFileError("checkpoint shorter than its header")
    (magic, version, input_dim, window_len, feature_dim, batch_size, epochs, seed,
     alpha, lr, has_norm) = CKPT_HEADER.unpack_from(buf)
    if magic != CKPT_MAGIC:
        raise CorruptFileError(f"bad checkpoint magic {magic!r}")
    if version != CKPT_VERSION:
        raise CorruptFileError(f"unsupported checkpoint version {version}")
    try:
        config = ModelConfig(input_dim, window_len, feature_dim, alpha, lr, batch_size, epochs, seed)
    except ValueError as exc:
        raise CorruptFileError(f"invalid model config in checkpoint: {exc}") from exc
    shapes = ModelParams.shapes(input_dim, feature_dim)
    sizes = [int(np.prod(shapes[n])) for n in PARAM_NAMES]
    expected = CKPT_HEADER.size + 8 * (sum(sizes) + (2 * input_dim if has_norm else 0))
    if len(buf) != expected:
        raise CorruptFileError(f"checkpoint is {len(buf)} bytes, expected {expected}")
    flat = np.frombuffer(buf, dtype="<f8", offset=CKPT_HEADER.size).astype(np.float64)
    arrays, at = {}, 0
    for name, size in zip(PARAM_NAMES, sizes):
        arrays[name] = flat[at:at + size].reshape(shapes[name]).copy()
        at += size
    baseline = scale = None
    if has_norm:
        baseline = flat[at:at + input_dim].copy()
        scale = flat[at + input_dim:at + 2 * input_dim].copy()
    return ModelParams(**arrays), config, baseline, scale


def write_checkpoint(path, params, config, baseline=None, scale=None):
    Path(path).write_bytes(encode_checkpoint(params, config, baseline, scale))


def read_checkpoint(path):
    return decode_checkpoint(Path(path).read_bytes())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def append_records(path, records):
    """Append line-delimited JSON records."""
    with open(path, "a") as fh:
        for rec in records:
            fh.write(canonical_json(rec) + "\n")


def read_records(path) -> list:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p


# Grasp episode archive: <dir>/manifest.json plus, per episode, a directory
# ep_NNNN/ holding finger_F.tcap (one per instrumented finger) and
# proprio.tcap (16 joint angles in rad, stored in the stream frame layout).

def write_episode_archive(directory, episodes, manifest: dict):
    root = ensure_dir(directory)
    labels, modes = [], []
    for n, ep in enumerate(episodes):
        ep_dir = ensure_dir(root / f"ep_{n:04d}")
        for f, stream in enumerate(ep.tactile):
            write_stream(ep_dir / f"finger_{f}.tcap", stream)
        ts = ep.tactile[0].timestamps_ns if ep.tactile else \
            np.round(np.arange(len(ep)) * (1e9 / ep.frame_rate_hz)).astype(np.uint64)
        write_stream(ep_dir / "proprio.tcap", WavelengthStream(ts, ep.proprio, ep.frame_rate_hz))
        labels.append(ep.label)
        modes.append(ep.failure_mode)
    record = dict(manifest)
    record.update({"episodes": len(episodes), "labels": labels, "failure_modes": modes,
                   "fingers": len(episodes[0].tactile) if episodes else 0})
    write_json(root / "manifest.json", record)
    return record


def read_episode_archive(directory):
    """Returns ``(episodes, manifest)``."""
    from .grasp import GraspEpisode

    root = Path(directory)
    path = root / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"episode manifest not found: {path}")
    manifest = json.loads(path.read_text())
    episodes = []
    for n in range(manifest["episodes"]):
        ep_dir = root / f"ep_{n:04d}"
        tactile = [read_stream(ep_dir / f"finger_{f}.tcap") for f in range(manifest["fingers"])]
        proprio = read_stream(ep_dir / "proprio.tcap")
        episodes.append(GraspEpisode(tactile, proprio.wavelengths_nm, manifest["labels"][n],
                                     proprio.sample_rate_hz, manifest["failure_modes"][n]))
    return episodes, manifest
