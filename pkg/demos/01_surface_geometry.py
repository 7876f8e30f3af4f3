"""
Calibration grid and surface distances
======================================

The fingertip's contact band is a cylinder. The calibration stage probes a
grid of columns and rows, then rotates the sensor and probes again.
"""
import math

import numpy as np

from fbgtouch.geometry import (NormalizedPoint, SensorGeometry, circular_delta, grid_to_surface,
                               normalize, surface_distance_mm)

geom = SensorGeometry()
print(geom)
print("stage rotations per turn:", geom.rotations)

# each column sits at a fixed angle; rows step up the band
for i in range(geom.grid_cols + 1):
    p = grid_to_surface(geom, i, 0, 0)
    print(f"column {i}: angle {math.degrees(p.angle_rad):7.2f} deg")

# a quarter turn later the same cell has moved round the band
p = grid_to_surface(geom, 2, 3, 3)
q = normalize(geom, p)
print(f"cell (2, 3) after 3 rotations: u={q.u:.4f} v={q.v:.3f}")

# u is circular: 0.95 and 0.05 are a tenth of a turn apart, not nine tenths
print("circular_delta(0.95, 0.05) =", circular_delta(0.95, 0.05))

# distances are straight lines through the cylinder (chords)
a, b = NormalizedPoint(0.0, 0.0), NormalizedPoint(0.25, 0.5)
print(f"chord distance {surface_distance_mm(geom, a, b):.4f} mm (sqrt(300) = {np.sqrt(300):.4f})")
print(f"across the seam: {surface_distance_mm(geom, NormalizedPoint(0.98, 0.5), NormalizedPoint(0.02, 0.5)):.3f} mm")
