"""Plain-Python reference implementations used as test oracles."""
import math


def pos_loss_scalar(pred, target, mask):
    """Loop form of the wraparound positional loss."""
    total, count = 0.0, 0
    for (pu, pv), (tu, tv), m in zip(pred, target, mask):
        if not m:
            continue
        du = min((pu - tu) ** 2, (pu + 1 - tu) ** 2, (pu - 1 - tu) ** 2)
        total += 0.5 * (du + (pv - tv) ** 2)
        count += 1
    return total / count if count else 0.0


def bce_scalar(logits, labels):
    total = 0.0
    for z, y in zip(logits, labels):
        p = 1.0 / (1.0 + math.exp(-z))
        total += -(y * math.log(p) + (1 - y) * math.log(1 - p))
    return total / len(logits)


def matmul(A, B):
    return [[sum(a * b for a, b in zip(row, col)) for col in zip(*B)] for row in A]


def attention_scalar(F, wq, wk, wv):
    """Single-head attention plus residual, by explicit loops."""
    Q, K, V = matmul(F, wq), matmul(F, wk), matmul(F, wv)
    d = len(F[0])
    out = []
    for t in range(len(F)):
        logits = [sum(q * k for q, k in zip(Q[t], K[s])) / math.sqrt(d) for s in range(len(F))]
        top = max(logits)
        w = [math.exp(x - top) for x in logits]
        z = sum(w)
        w = [x / z for x in w]
        out.append([sum(w[s] * V[s][c] for s in range(len(F))) + F[t][c] for c in range(d)])
    return out


def grid_formula(r, n, dx, dy, dtheta, i, j, k):
    return math.asin((n - 2 * i) / (2 * r) * dx) + k * dtheta, j * dy
