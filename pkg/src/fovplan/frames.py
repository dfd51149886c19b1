"""Quaternion algebra, the thrust/yaw rotation decomposition, and frame-f transforms.

The body attitude is factored as R^w_b = R(xi) * Rz(psi): a minimal rotation
taking e_z to the normalized relative acceleration xi = a + (0,0,g), followed
by a yaw rotation. Frame f shares the body yaw but keeps its z axis vertical,
with origin at the UAV; observations are expressed in it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAVITY = 9.81

# xi_z / ||xi|| must stay above -1 + this margin; thrust antiparallel to world
# z has no continuous yaw decomposition.
_XI_Z_SINGULARITY = 1e-9


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return float(np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2))


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product a o b."""
    return Quaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


def quat_to_matrix(q: Quaternion) -> np.ndarray:
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass
class UAVState:
    """World-frame kinematic state plus yaw. xi = a + (0,0,g) must be nonzero."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    psi: float
    psi_dot: float

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.a = np.asarray(self.a, dtype=float)

    @property
    def xi(self) -> np.ndarray:
        return self.a + np.array([0.0, 0.0, GRAVITY])


def xi_from_accel(a: np.ndarray) -> np.ndarray:
    """Relative acceleration xi = a + (0, 0, g)."""
    a = np.asarray(a, dtype=float)
    return a + np.array([0.0, 0.0, GRAVITY])


def _xi_quat(xi: np.ndarray) -> Quaternion:
    xi = np.asarray(xi, dtype=float)
    norm = np.linalg.norm(xi)
    if norm == 0.0:
        raise ValueError("xi must be nonzero")
    xb = xi / norm
    if xb[2] <= -1.0 + _XI_Z_SINGULARITY:
        raise ValueError("thrust direction antiparallel to world z: yaw decomposition singular")
    s = 1.0 / np.sqrt(2.0 * (1.0 + xb[2]))
    return Quaternion(s * (1.0 + xb[2]), -s * xb[1], s * xb[0], 0.0)


def rotation_from_xi_psi(xi: np.ndarray, psi: float) -> np.ndarray:
    """World-from-body rotation with thrust axis along xi and yaw psi.

    Columns are (b1, b2, b3) with b3 = xi / ||xi||.
    """
    q_xi = _xi_quat(xi)
    q_psi = Quaternion(np.cos(psi / 2.0), 0.0, 0.0, np.sin(psi / 2.0))
    return quat_to_matrix(quat_mul(q_xi, q_psi))


def psi_from_b1(xi: np.ndarray, b1: np.ndarray) -> float:
    """Yaw angle in (-pi, pi] such that rotation_from_xi_psi(xi, psi) e_x = b1.

    b1 must be unit and perpendicular to xi.
    """
    b1 = np.asarray(b1, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if abs(np.linalg.norm(b1) - 1.0) > 1e-6:
        raise ValueError("b1 must be a unit vector")
    if abs(float(b1 @ xi)) > 1e-6 * np.linalg.norm(xi):
        raise ValueError("b1 must be perpendicular to xi")
    R0 = quat_to_matrix(_xi_quat(xi))  # zero-yaw attitude
    psi = float(np.arctan2(b1 @ R0[:, 1], b1 @ R0[:, 0]))
    if psi <= -np.pi:
        psi = np.pi
    return psi


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def world_to_f(state: UAVState, x: np.ndarray, is_point: bool = True) -> np.ndarray:
    """World coordinates to frame f (origin at state.p, yaw-aligned, z up).

    Points translate then rotate; free vectors only rotate. Accepts (3,) or (N, 3).
    """
    x = np.asarray(x, dtype=float)
    R = rot_z(-state.psi)
    if is_point:
        return (x - state.p) @ R.T
    return x @ R.T


def f_to_world(state: UAVState, x: np.ndarray, is_point: bool = True) -> np.ndarray:
    """Exact inverse of world_to_f."""
    x = np.asarray(x, dtype=float)
    R = rot_z(state.psi)
    if is_point:
        return x @ R.T + state.p
    return x @ R.T
