"""Contact-prediction network in plain numpy.

Per-timestep ReLU encoder, one residual self-attention layer over time,
then a linear position head (u, v) and a linear contact head (logit) reading
the refined feature at the window's last timestep. Gradients are written out by hand and checked against central
finite differences in :func:`gradient_check`.

Shapes: a batch of windows is ``(B, T, dim_s)``; features are ``(B, T, dim_f)``.
Weight matrices act on row vectors (``x @ W``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

PARAM_NAMES = ("enc_w", "enc_b", "w_q", "w_k", "w_v", "pos_w", "pos_b", "con_w", "con_b")


class TrainingError(FloatingPointError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 8
    window_len: int = 64
    feature_dim: int = 64
    alpha: float = 1.0
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0

    def __post_init__(self):
        for name in ("input_dim", "window_len", "feature_dim", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.alpha < 0 or self.learning_rate < 0 or self.epochs < 0:
            raise ValueError("alpha, learning_rate and epochs must be non-negative")


@dataclass
class ModelParams:
    enc_w: np.ndarray  # (dim_s, dim_f)
    enc_b: np.ndarray  # (dim_f,)
    w_q: np.ndarray  # (dim_f, dim_f)
    w_k: np.ndarray
    w_v: np.ndarray
    pos_w: np.ndarray  # (dim_f, 2)
    pos_b: np.ndarray  # (2,)
    con_w: np.ndarray  # (dim_f,)
    con_b: np.ndarray  # (1,)

    @classmethod
    def shapes(cls, input_dim: int, feature_dim: int) -> dict:
        s, f = input_dim, feature_dim
        return {"enc_w": (s, f), "enc_b": (f,), "w_q": (f, f), "w_k": (f, f), "w_v": (f, f),
                "pos_w": (f, 2), "pos_b": (2,), "con_w": (f,), "con_b": (1,)}

    @classmethod
    def init(cls, config: ModelConfig, rng=None) -> "ModelParams":
        """Uniform in +-1/sqrt(fan_in), seeded from ``config.seed`` by default."""
        rng = np.random.default_rng(config.seed) if rng is None else rng
        fan_in = {"enc_w": config.input_dim, "enc_b": config.input_dim}
        arrays = {}
        for name, shape in cls.shapes(config.input_dim, config.feature_dim).items():
            bound = 1.0 / math.sqrt(fan_in.get(name, config.feature_dim))
            arrays[name] = rng.uniform(-bound, bound, size=shape)
        return cls(**arrays)

    @classmethod
    def zeros(cls, input_dim: int, feature_dim: int) -> "ModelParams":
        return cls(**{n: np.zeros(s) for n, s in cls.shapes(input_dim, feature_dim).items()})

    @property
    def input_dim(self) -> int:
        return self.enc_w.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.enc_w.shape[1]

    def arrays(self):
        return [getattr(self, n) for n in PARAM_NAMES]

    def copy(self) -> "ModelParams":
        return ModelParams(*(a.copy() for a in self.arrays()))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec) -> "ModelParams":
        out, at = [], 0
        for a in self.arrays():
            out.append(np.asarray(vec[at:at + a.size], dtype=float).reshape(a.shape))
            at += a.size
        return ModelParams(*out)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def equals(self, other: "ModelParams") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


@dataclass(frozen=True)
class Prediction:
    position: np.ndarray  # (u, v) with u wrapped and v clamped
    contact_prob: float

    @property
    def contact(self) -> bool:
        return self.contact_prob >= 0.5


def _check_input(params: ModelParams, S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim not in (2, 3) or S.shape[-1] != params.input_dim:
        raise ValueError(f"expected (..., T, {params.input_dim}) input, got {S.shape}")
    return S


def encode(params: ModelParams, S) -> np.ndarray:
    """ReLU(S @ W_e + b_e), applied independently at each timestep."""
    S = _check_input(params, S)
    return np.maximum(S @ params.enc_w + params.enc_b, 0.0)


def _softmax(x, axis=-1):
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def attention_weights(params: ModelParams, F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    q = F @ params.w_q
    k = F @ params.w_k
    return _softmax(q @ np.swapaxes(k, -1, -2) / math.sqrt(params.feature_dim))


def self_attention(params: ModelParams, F) -> np.ndarray:
    """Single-head scaled dot-product attention over time, plus residual."""
    F = np.asarray(F, dtype=float)
    return attention_weights(params, F) @ (F @ params.w_v) + F


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def forward(params: ModelParams, X, cache: bool = False):
    """Raw position outputs (B, 2) and contact logits (B,) for a batch.

    The heads read the attention output at the last timestep, the window's
    right edge. Only that row of the attention matrix is formed.
    """
    X = _check_input(params, X)
    if X.ndim == 2:
        X = X[None]
    B, T, _ = X.shape
    D = params.feature_dim
    z = (X.reshape(B * T, -1) @ params.enc_w + params.enc_b).reshape(B, T, D)
    F = np.maximum(z, 0.0)
    kv = F.reshape(B * T, D) @ np.hstack([params.w_k, params.w_v])
    k = kv[:, :D].reshape(B, T, D)
    v = kv[:, D:].reshape(B, T, D)
    last = F[:, -1]
    q = last @ params.w_q
    scale = 1.0 / math.sqrt(D)
    a = _softmax(np.einsum("btd,bd->bt", k, q) * scale)
    pooled = np.einsum("bt,btd->bd", a, v) + last
    pos = pooled @ params.pos_w + params.pos_b
    logit = pooled @ params.con_w + params.con_b[0]
    if not cache:
        return pos, logit
    return pos, logit, dict(X=X, z=z, F=F, q=q, k=k, v=v, a=a, pooled=pooled, scale=scale)


def wrap_positions(pos) -> np.ndarray:
    pos = np.array(pos, dtype=float, copy=True)
    pos[..., 0] = np.mod(pos[..., 0], 1.0)
    pos[..., 0] = np.where(pos[..., 0] >= 1.0, 0.0, pos[..., 0])
    pos[..., 1] = np.clip(pos[..., 1], 0.0, 1.0)
    return pos


def predict_batch(params: ModelParams, X, chunk: int = 2048):
    """Wrapped positions (B, 2) and contact probabilities (B,)."""
    X = _check_input(params, X)
    if X.ndim == 2:
        X = X[None]
    pos, logit = [], []
    for at in range(0, len(X), chunk):
        p, l = forward(params, X[at:at + chunk])
        pos.append(p)
        logit.append(l)
    return wrap_positions(np.concatenate(pos)), sigmoid(np.concatenate(logit))


def predict(params: ModelParams, S) -> Prediction:
    """Prediction for a single (T, dim_s) window."""
    pos, prob = predict_batch(params, np.asarray(S)[None] if np.ndim(S) == 2 else S)
    return Prediction(pos[0], float(prob[0]))


# ---------------------------------------------------------------- losses

def _angular_residual(pu, tu):
    """Candidate u-residual with the smallest square among {0, +1, -1} shifts."""
    d = np.asarray(pu, dtype=float) - np.asarray(tu, dtype=float)
    cands = np.stack([d, d + 1.0, d - 1.0])
    pick = np.argmin(cands ** 2, axis=0)
    return np.take_along_axis(cands, pick[None], axis=0)[0]


def positional_loss(pred_positions, target_positions, contact_mask=None) -> float:
    """Mean over contact samples and both components of the squared residual,
    with the angular residual taken along the shortest way round."""
    p = np.asarray(pred_positions, dtype=float).reshape(-1, 2)
    t = np.asarray(target_positions, dtype=float).reshape(-1, 2)
    m = np.ones(len(p), dtype=bool) if contact_mask is None else np.asarray(contact_mask, dtype=bool)
    if not m.any():
        return 0.0
    du = _angular_residual(p[m, 0], t[m, 0])
    dv = p[m, 1] - t[m, 1]
    return float(np.mean(0.5 * (du ** 2 + dv ** 2)))


def bce_with_logits(logits, labels) -> float:
    z = np.asarray(logits, dtype=float)
    y = np.asarray(labels, dtype=float)
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def binary_cross_entropy(probs, labels, eps: float = 1e-12) -> float:
    p = np.clip(np.asarray(probs, dtype=float), eps, 1.0 - eps)
    y = np.asarray(labels, dtype=float)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def total_loss(positions, contact_logits, target_positions, contact_labels, alpha: float = 1.0) -> float:
    """Positional loss on contact samples plus ``alpha`` times BCE on all samples."""
    contact = np.asarray(contact_labels, dtype=bool)
    l_pos = positional_loss(positions, target_positions, contact)
    return l_pos + alpha * bce_with_logits(contact_logits, contact)


def loss_and_grad(params: ModelParams, X, target_positions, contact, alpha: float = 1.0,
                  position_mask=None):
    """Total loss on a batch and its gradient as a :class:`ModelParams`.

    ``position_mask`` selects the samples entering the positional term and
    defaults to ``contact``.
    """
    pos, logit, c = forward(params, X, cache=True)
    contact = np.asarray(contact, dtype=bool)
    mask = contact if position_mask is None else np.asarray(position_mask, dtype=bool)
    B = len(logit)
    tgt = np.asarray(target_positions, dtype=float).reshape(-1, 2)

    dpos = np.zeros_like(pos)
    n = int(mask.sum())
    l_pos = 0.0
    if n:
        du = _angular_residual(pos[mask, 0], tgt[mask, 0])
        dv = pos[mask, 1] - tgt[mask, 1]
        l_pos = float(np.mean(0.5 * (du ** 2 + dv ** 2)))
        dpos[mask, 0] = du / n
        dpos[mask, 1] = dv / n
    y = contact.astype(float)
    l_con = float(np.mean(np.logaddexp(0.0, logit) - y * logit))
    dlogit = alpha * (sigmoid(logit) - y) / B
    loss = l_pos + alpha * l_con

    pooled = c["pooled"]
    g = {}
    g["pos_w"] = pooled.T @ dpos
    g["pos_b"] = dpos.sum(axis=0)
    g["con_w"] = pooled.T @ dlogit
    g["con_b"] = np.array([dlogit.sum()])
    dpooled = dpos @ params.pos_w.T + dlogit[:, None] * params.con_w

    a, v, q, k, F = c["a"], c["v"], c["q"], c["k"], c["F"]
    D = params.feature_dim
    dF = np.zeros_like(F)
    dF[:, -1] = dpooled
    da = np.einsum("btd,bd->bt", v, dpooled)
    dv_ = a[:, :, None] * dpooled[:, None, :]
    ds = a * (da - np.sum(a * da, axis=1, keepdims=True)) * c["scale"]
    dq = np.einsum("bt,btd->bd", ds, k)
    dk = ds[:, :, None] * q[:, None, :]
    g["w_q"] = F[:, -1].T @ dq
    dF[:, -1] += dq @ params.w_q.T
    F2 = F.reshape(-1, D)
    dkv = np.hstack([dk.reshape(-1, D), dv_.reshape(-1, D)])
    gw = F2.T @ dkv
    g["w_k"], g["w_v"] = gw[:, :D], gw[:, D:]
    dF += (dkv @ np.hstack([params.w_k, params.w_v]).T).reshape(dF.shape)
    dz = dF * (c["z"] > 0)
    X = c["X"]
    g["enc_w"] = X.reshape(-1, X.shape[-1]).T @ dz.reshape(-1, D)
    g["enc_b"] = dz.sum(axis=(0, 1))
    return loss, ModelParams(**g)


def batch_loss(params: ModelParams, X, target_positions, contact, alpha: float = 1.0) -> float:
    pos, logit = forward(params, X)
    return total_loss(pos, logit, target_positions, contact, alpha)


# ---------------------------------------------------------------- gradient check

def gradient_check(params: ModelParams, batch, epsilon: float = 1e-5, alpha: float = 1.0,
                   loss_fn=None, grad_fn=None, floor: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``batch`` is ``(X, target_positions, contact)``. Relative error per
    parameter is ``|a - n| / max(|a| + |n|, floor)``; the floor keeps
    components far below it, where the difference quotient is dominated by
    rounding (about 1e-11 at epsilon 1e-5), from reading as large relative
    errors. Parameters whose two probes land on different sides of a ReLU
    kink or of a wraparound switch are skipped. ``loss_fn(theta)`` / ``grad_fn(theta)`` override the model
    loss for checking other functions of a flat vector.
    """
    if loss_fn is None:
        X, tgt, contact = batch

        def loss_fn(theta):
            return batch_loss(params.with_flat(theta), X, tgt, contact, alpha)

        def grad_fn(theta):
            return loss_and_grad(params.with_flat(theta), X, tgt, contact, alpha)[1].flat()

        def regime(theta):
            p = params.with_flat(theta)
            pos, _, c = forward(p, X, cache=True)
            t = np.asarray(tgt, dtype=float).reshape(-1, 2)
            d = pos[:, 0] - t[:, 0]
            pick = np.argmin(np.stack([d, d + 1, d - 1]) ** 2, axis=0)
            return np.concatenate([(c["z"] > 0).ravel(), pick])
    else:
        def regime(theta):
            return np.zeros(0)

    theta = params.flat() if params is not None else np.asarray(batch, dtype=float)
    analytic = grad_fn(theta)
    worst = 0.0
    for n in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[n] += epsilon
        dn[n] -= epsilon
        if not np.array_equal(regime(up), regime(dn)):
            continue
        numeric = (loss_fn(up) - loss_fn(dn)) / (2.0 * epsilon)
        rel = abs(analytic[n] - numeric) / max(abs(analytic[n]) + abs(numeric), floor)
        worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------- training

class ArrayDataset:
    """In-memory windows: ``X`` (N, T, dim_s), ``positions`` (N, 2), ``contact`` (N,).

    With ``use_positions=False`` the position head receives no loss and
    training reduces to the weighted classification term.
    """

    def __init__(self, X, positions=None, contact=None, use_positions: bool = True):
        self.use_positions = use_positions
        self.X = np.asarray(X, dtype=float)
        n = len(self.X)
        self.positions = np.full((n, 2), np.nan) if positions is None else np.asarray(positions, dtype=float)
        self.contact = np.zeros(n, dtype=bool) if contact is None else np.asarray(contact, dtype=bool)

    def __len__(self):
        return len(self.X)

    def batch(self, idx):
        return self.X[idx], self.positions[idx], self.contact[idx]


class Adam:
    def __init__(self, params: ModelParams, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in params.arrays()]
        self.v = [np.zeros_like(a) for a in params.arrays()]
        self.t = 0

    def step(self, params: ModelParams, grads: ModelParams):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params.arrays(), grads.arrays(), self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(train_set, config: ModelConfig, params: ModelParams | None = None, callback=None):
    """Minibatch Adam on the combined loss.

    ``train_set`` needs ``__len__`` and ``batch(idx) -> (X, positions, contact)``.
    Shuffling and initialization are drawn from ``config.seed``. Returns the
    trained parameters and the per-epoch mean training loss.
    """
    n = len(train_set)
    if n == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(config.seed)
    params = ModelParams.init(config, rng) if params is None else params.copy()
    opt = Adam(params, config.learning_rate)
    use_positions = getattr(train_set, "use_positions", True)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for at in range(0, n, config.batch_size):
            idx = np.sort(order[at:at + config.batch_size])
            X, tgt, contact = train_set.batch(idx)
            mask = None if use_positions else np.zeros(len(idx), dtype=bool)
            loss, grads = loss_and_grad(params, X, tgt, contact, config.alpha, mask)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch starting {at}")
            opt.step(params, grads)
            total += loss * len(idx)
        history.append(total / n)
        log.info("epoch %d loss %.6f", epoch, history[-1])
        if callback is not None:
            callback(epoch, history[-1])
    if not params.all_finite():
        raise TrainingError("parameters became non-finite")
    return params, history
