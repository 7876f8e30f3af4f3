"""
The contact network on a toy problem
====================================

Per-timestep encoder, one self-attention layer with a residual, and two
linear heads: contact position (u, v) and contact probability. Gradients are
written out by hand and checked against finite differences.
"""
import numpy as np

from fbgtouch import nn

rng = np.random.default_rng(0)
cfg = nn.ModelConfig(input_dim=3, window_len=6, feature_dim=5, epochs=150, batch_size=32,
                     learning_rate=3e-3)
params = nn.ModelParams.init(cfg, rng)

S = rng.normal(size=(6, 3))
F = nn.encode(params, S)
print("attention rows sum to", nn.attention_weights(params, F).sum(axis=1))

X = rng.normal(size=(8, 6, 3))
contact = np.arange(8) % 2 == 0
target = np.where(contact[:, None], rng.uniform(size=(8, 2)), np.nan)
print("max gradient relative error:", nn.gradient_check(params, (X, target, contact)))

# positions wrap: predicting 0.05 for a target at 0.95 is a small miss
print("wraparound loss:", nn.positional_loss([[0.05, 0.5]], [[0.95, 0.5]]))

# the contact flag is whether channel 0 ends high; the position is read off channels 1 and 2
X = rng.normal(size=(64, 6, 3))
contact = X[:, -1, 0] > 0
pos = np.mod(X[:, -1, 1:] * 0.2 + 0.5, 1.0)
params, history = nn.train(nn.ArrayDataset(X, pos, contact), cfg)
print(f"loss {history[0]:.3f} -> {history[-1]:.4f}")
pred_pos, prob = nn.predict_batch(params, X)
print(f"training contact accuracy {np.mean((prob >= 0.5) == contact):.2f}")
