"""Small shared 3D math: axis-angle rotations and pivoted rigid transforms."""

from __future__ import annotations

import numpy as np

UNIT_AXIS_TOL = 1e-9


def normalize(v: np.ndarray) -> np.ndarray:
    """Return v / ||v||; raises on zero vectors."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix for `angle` radians about unit `axis` (Rodrigues form)."""
    axis = np.asarray(axis, dtype=np.float64)
    x, y, z = axis
    c = np.cos(angle)
    s = np.sin(angle)
    k = 1.0 - c
    return np.array(
        [
            [c + x * x * k, x * y * k - z * s, x * z * k + y * s],
            [y * x * k + z * s, c + y * y * k, y * z * k - x * s],
            [z * x * k - y * s, z * y * k + x * s, c + z * z * k],
        ]
    )


def rotation_matrix_from_axis_angle(r: np.ndarray) -> np.ndarray:
    """Rotation matrix from an axis-angle 3-vector (axis * angle)."""
    r = np.asarray(r, dtype=np.float64)
    angle = np.linalg.norm(r)
    if angle < 1e-300:
        return np.eye(3)
    return rotation_matrix(r / angle, angle)


def rotate_about_pivot(
    points: np.ndarray, pivot: np.ndarray, axis: np.ndarray, angle: float
) -> np.ndarray:
    """Rotate points (N,3) by `angle` about the line through `pivot` along `axis`."""
    points = np.asarray(points, dtype=np.float64)
    pivot = np.asarray(pivot, dtype=np.float64)
    rot = rotation_matrix(axis, angle)
    return (points - pivot) @ rot.T + pivot


def wrap_axis_angle(r: np.ndarray) -> np.ndarray:
    """Wrap an axis-angle vector so its magnitude lies in [0, pi]."""
    r = np.asarray(r, dtype=np.float64)
    angle = np.linalg.norm(r)
    if angle <= np.pi or angle < 1e-300:
        return r
    axis = r / angle
    wrapped = np.remainder(angle + np.pi, 2.0 * np.pi) - np.pi
    return axis * wrapped
