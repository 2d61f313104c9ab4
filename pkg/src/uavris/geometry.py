"""Array responses, UAV jitter rotations and link-angle recomputation.

Vectors are plain ``(3,)`` numpy arrays.  Angles are radians throughout.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

E_X = np.array([1.0, 0.0, 0.0])
E_Z = np.array([0.0, 0.0, 1.0])

_DEGENERATE_PROJECTION = 1e-12


class JitterAngles(NamedTuple):
    """Roll, pitch and yaw deviations of the UAV body."""

    delta_x: float = 0.0
    delta_y: float = 0.0
    delta_z: float = 0.0


class LinkAngles(NamedTuple):
    phi: float    # azimuth
    theta: float  # elevation


class PlanarArray(NamedTuple):
    n_first: int
    n_second: int
    spacing_first: float
    spacing_second: float

    @property
    def size(self) -> int:
        return self.n_first * self.n_second


def sample_jitter(sigma_j: float, rng: np.random.Generator) -> JitterAngles:
    if not sigma_j >= 0 or not np.isfinite(sigma_j):
        raise ValueError(f"sigma_j must be finite and >= 0, got {sigma_j}")
    if sigma_j == 0:
        return JitterAngles(0.0, 0.0, 0.0)
    dx, dy, dz = rng.normal(0.0, sigma_j, size=3)
    return JitterAngles(float(dx), float(dy), float(dz))


def yaw_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def pitch_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def roll_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_from_jitter(j: JitterAngles) -> np.ndarray:
    """Composite rotation ``R_yaw(dz) @ R_pitch(dy) @ R_roll(dx)``."""
    return yaw_matrix(j.delta_z) @ pitch_matrix(j.delta_y) @ roll_matrix(j.delta_x)


def rotate(r: np.ndarray, v: np.ndarray) -> np.ndarray:
    return r @ np.asarray(v, dtype=float)


def recompute_angles(v: np.ndarray, pole: np.ndarray = E_Z) -> LinkAngles:
    """Elevation against ``pole`` and azimuth of the xy-projection against e_x.

    Both use arccos, so the azimuth lies in [0, pi] and does not distinguish the
    +y and -y half-planes.  A (near) vertical ``v`` has azimuth 0.
    """
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        raise ValueError("cannot compute angles of a zero or non-finite vector")
    theta = np.arccos(np.clip(np.dot(v, pole) / norm, -1.0, 1.0))
    proj_norm = np.hypot(v[0], v[1])
    if proj_norm < _DEGENERATE_PROJECTION:
        phi = 0.0
    else:
        phi = np.arccos(np.clip(v[0] / proj_norm, -1.0, 1.0))
    return LinkAngles(float(phi), float(theta))


def _axis_response(count: int, spacing: float, factor: float, wavelength: float) -> np.ndarray:
    idx = np.arange(count)
    return np.exp(-2j * np.pi * spacing * idx * factor / wavelength)


def planar_steering(geom: PlanarArray, ang: LinkAngles, wavelength: float) -> np.ndarray:
    """Kronecker response ``first_axis (x) second_axis`` of a uniform planar array.

    The first axis uses ``sin(phi) cos(theta)`` and the second ``sin(phi) sin(theta)``;
    flat index ``i * n_second + j`` pairs element i of the first axis with j of the second.
    """
    if not wavelength > 0:
        raise ValueError("wavelength must be > 0")
    sp = np.sin(ang.phi)
    first = _axis_response(geom.n_first, geom.spacing_first, sp * np.cos(ang.theta), wavelength)
    second = _axis_response(geom.n_second, geom.spacing_second, sp * np.sin(ang.theta), wavelength)
    return np.kron(first, second)


# BS: (M_y horizontal, M_z vertical); RIS: (N_x, N_y).  Same functional form.
bs_steering = planar_steering
ris_steering = planar_steering


def ris_element_positions(center: np.ndarray, geom: PlanarArray) -> np.ndarray:
    """``(N, 3)`` element coordinates on a grid centred at ``center``, x-major order."""
    cx, cy, cz = np.asarray(center, dtype=float)
    xs = (np.arange(geom.n_first) - (geom.n_first - 1) / 2) * geom.spacing_first + cx
    ys = (np.arange(geom.n_second) - (geom.n_second - 1) / 2) * geom.spacing_second + cy
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), np.full(geom.size, cz)])
