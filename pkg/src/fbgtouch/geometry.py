"""Cylindrical sensor surface: grid indexing, coordinates and distances.

Contacts live on the cylindrical band of the fingertip cap. A point is an
angle around the axis plus a height measured from the base of the band.
Normalized coordinates map the angle to ``u`` in ``[0, 1)`` (circular) and
the height to ``v`` in ``[0, 1]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
MIN_BEND_RADIUS_MM = 8.0


class GeometryError(ValueError):
    """Raised for invalid geometry or out-of-domain grid indices."""


def _wrap_angle(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    # fmod of a tiny negative can round up to exactly 2*pi
    if t >= TWO_PI:
        t = 0.0
    return t


def _wrap_unit(u: float) -> float:
    w = u % 1.0
    return 0.0 if w >= 1.0 else w


@dataclass(frozen=True)
class SensorGeometry:
    radius_mm: float = 10.0
    height_mm: float = 20.0
    grid_cols: int = 5
    grid_rows: int = 5
    spacing_x_mm: float = 2.0
    spacing_y_mm: float = 3.0
    rotation_increment_rad: float = math.pi / 6

    def __post_init__(self):
        if self.radius_mm < MIN_BEND_RADIUS_MM:
            raise GeometryError(
                f"radius {self.radius_mm} mm is below the fiber bend limit "
                f"of {MIN_BEND_RADIUS_MM} mm")
        if self.height_mm <= 0 or self.spacing_x_mm <= 0 or self.spacing_y_mm <= 0:
            raise GeometryError("height and grid spacings must be positive")
        if self.grid_cols < 1 or self.grid_rows < 1:
            raise GeometryError("grid must have at least one row and column")
        if self.grid_cols * self.spacing_x_mm > 2.0 * self.radius_mm + 1e-12:
            raise GeometryError("grid_cols * spacing_x_mm must not exceed the diameter")
        if (self.grid_rows - 1) * self.spacing_y_mm > self.height_mm + 1e-12:
            raise GeometryError("grid rows overflow the band height")
        if self.rotation_increment_rad <= 0:
            raise GeometryError("rotation increment must be positive")
        ratio = TWO_PI / self.rotation_increment_rad
        if abs(ratio - round(ratio)) > 1e-9:
            raise GeometryError("rotation increment must divide a full turn evenly")

    @property
    def rotations(self) -> int:
        """Number of rotation steps in a full turn."""
        return int(round(TWO_PI / self.rotation_increment_rad))


@dataclass(frozen=True)
class SurfacePoint:
    angle_rad: float
    height_mm: float

    def __post_init__(self):
        object.__setattr__(self, "angle_rad", _wrap_angle(float(self.angle_rad)))


@dataclass(frozen=True)
class NormalizedPoint:
    u: float
    v: float

    def __post_init__(self):
        object.__setattr__(self, "u", _wrap_unit(float(self.u)))
        object.__setattr__(self, "v", float(self.v))

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v])


def grid_angle(geom: SensorGeometry, i, k=0):
    """Unwrapped angle of grid column ``i`` after ``k`` rotations.

    Accepts scalars or arrays. Raises :class:`GeometryError` when the arcsin
    argument leaves ``[-1, 1]``.
    """
    arg = (geom.grid_cols - 2.0 * np.asarray(i, dtype=float)) / (2.0 * geom.radius_mm) * geom.spacing_x_mm
    if np.any(np.abs(arg) > 1.0):
        raise GeometryError(f"column index {i} puts arcsin argument outside [-1, 1]")
    return np.arcsin(arg) + np.asarray(k, dtype=float) * geom.rotation_increment_rad


def grid_to_surface(geom: SensorGeometry, i: int, j: int, k: int = 0) -> SurfacePoint:
    """Surface point probed at grid cell (i, j) after k rotations of the stage."""
    if not 0 <= j < geom.grid_rows:
        raise GeometryError(f"row index {j} outside [0, {geom.grid_rows})")
    if k < 0:
        raise GeometryError("rotation count must be non-negative")
    if not 0 <= i <= geom.grid_cols:
        raise GeometryError(f"column index {i} outside [0, {geom.grid_cols}]")
    theta = float(grid_angle(geom, i, k))
    return SurfacePoint(theta, j * geom.spacing_y_mm)


def normalize(geom: SensorGeometry, p: SurfacePoint) -> NormalizedPoint:
    return NormalizedPoint(_wrap_angle(p.angle_rad) / TWO_PI, p.height_mm / geom.height_mm)


def denormalize(geom: SensorGeometry, p: NormalizedPoint) -> SurfacePoint:
    return SurfacePoint(p.u * TWO_PI, p.v * geom.height_mm)


def circular_delta(u1, u2):
    """Signed shortest difference ``u1 - u2`` on the unit circle.

    Result lies in ``(-0.5, 0.5]``; antipodal pairs return ``+0.5``.
    Works elementwise on arrays.
    """
    d = np.mod(np.asarray(u1, dtype=float) - np.asarray(u2, dtype=float) + 0.5, 1.0) - 0.5
    d = np.where(d <= -0.5, 0.5, d)
    if d.ndim == 0:
        return float(d)
    return d


def chord_distance_mm(geom: SensorGeometry, ua, va, ub, vb):
    """Vectorized straight-line distance between normalized points on the cylinder."""
    du = np.abs(circular_delta(ua, ub))
    chord = 2.0 * geom.radius_mm * np.sin(np.pi * du)
    dy = (np.asarray(va, dtype=float) - np.asarray(vb, dtype=float)) * geom.height_mm
    return np.hypot(chord, dy)


def surface_distance_mm(geom: SensorGeometry, a: NormalizedPoint, b: NormalizedPoint) -> float:
    """Euclidean (chord) distance in mm between two points embedded in 3D."""
    return float(chord_distance_mm(geom, a.u, a.v, b.u, b.v))


def embed(geom: SensorGeometry, u, v) -> np.ndarray:
    """3D coordinates (x, y, z) of normalized points; z is height."""
    theta = np.asarray(u, dtype=float) * TWO_PI
    return np.stack([geom.radius_mm * np.cos(theta),
                     geom.radius_mm * np.sin(theta),
                     np.asarray(v, dtype=float) * geom.height_mm], axis=-1)
