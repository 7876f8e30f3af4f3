"""
Grasp stability with and without touch
======================================

Three instrumented fingers close on an object and lift it. Some grasps hold,
some slip after the lift and some never squeeze hard enough. Joint angles
look the same either way, so a classifier that cannot feel the contact is
left guessing.
"""
import numpy as np

from fbgtouch import grasp

episodes = grasp.generate_episodes(grasp.EpisodeConfig(), 200, seed=0)
modes = [ep.failure_mode or "held" for ep in episodes]
print({m: modes.count(m) for m in sorted(set(modes))})

ep = next(e for e in episodes if e.failure_mode == "slip")
peak = ep.forces.max(axis=1)
print("slip episode grip force every second (N):", np.round(peak[::30], 2))

windows = grasp.preprocess_episodes(episodes[:1])
print("windows per episode:", len(windows), "features per frame:", windows.X.shape[2])

res = grasp.run_ablation(count=200, seed=0, episodes=episodes)
print(f"with touch    {res.with_tactile.accuracy:.3f}")
print(f"without touch {res.without_tactile.accuracy:.3f}")
print(f"gap {100 * res.gap:.0f} points")
