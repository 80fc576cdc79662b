"""6-DoF poses and quaternion helpers.

Quaternions are numpy arrays in (w, x, y, z) order and are kept unit-norm:
every composition helper renormalizes, so norm drift stays below 1e-9.
World frame convention: x forward, y left, z up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

QUAT_NORM_TOL = 1e-9


def _frozen_array(values, size: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(size)
    arr.setflags(write=False)
    return arr


def quat_identity() -> np.ndarray:
    return _frozen_array([1.0, 0.0, 0.0, 0.0], 4)


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero quaternion")
    return _frozen_array(q / norm, 4)


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product a*b, renormalized."""
    aw, ax, ay, az = np.asarray(a, dtype=np.float64)
    bw, bx, by, bz = np.asarray(b, dtype=np.float64)
    out = np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )
    return quat_normalize(out)


def quat_conjugate(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64)
    return _frozen_array([w, -x, -y, -z], 4)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    norm = float(np.linalg.norm(axis))
    if norm == 0.0:
        raise ValueError("rotation axis must be non-zero")
    half = 0.5 * angle
    q = np.concatenate(([np.cos(half)], np.sin(half) * axis / norm))
    return quat_normalize(q)


def quat_rotate(q, v) -> np.ndarray:
    """Rotate vector v by unit quaternion q."""
    w, x, y, z = np.asarray(q, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    u = np.array([x, y, z])
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def quat_angle(q) -> float:
    """Rotation magnitude of q in radians, in [0, pi]."""
    w, x, y, z = np.asarray(q, dtype=np.float64)
    return 2.0 * float(np.arctan2(np.linalg.norm([x, y, z]), abs(w)))


def quat_between(a, b) -> np.ndarray:
    """Relative rotation taking a to b (b = r * a)."""
    return quat_mul(b, quat_conjugate(a))


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    while float(np.linalg.norm(v)) < 1e-12:
        v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def sample_in_ball(rng: np.random.Generator, radius: float) -> np.ndarray:
    """Uniform point in the solid ball of the given radius."""
    direction = random_unit_vector(rng)
    r = radius * rng.uniform() ** (1.0 / 3.0)
    return r * direction


def sample_rotation(rng: np.random.Generator, max_angle: float) -> np.ndarray:
    """Quaternion with axis uniform on the sphere, angle uniform in [-max_angle, max_angle]."""
    axis = random_unit_vector(rng)
    angle = rng.uniform(-max_angle, max_angle)
    return quat_from_axis_angle(axis, angle)


# Gripper pointing straight down: pi about the x axis.
GRIPPER_DOWN = _frozen_array([0.0, 1.0, 0.0, 0.0], 4)


@dataclass(frozen=True, eq=False)
class Pose6D:
    """Position (meters) plus unit-quaternion orientation."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = _frozen_array(self.position, 3)
        quat = np.array(self.orientation, dtype=np.float64).reshape(4)
        norm = float(np.linalg.norm(quat))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"orientation is not a unit quaternion (norm={norm})")
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            quat = quat / norm
        quat.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose6D):
            return NotImplemented
        return np.array_equal(self.position, other.position) and np.array_equal(
            self.orientation, other.orientation
        )

    def translated(self, offset) -> Pose6D:
        """New pose shifted by offset; orientation array shared unchanged."""
        pose = Pose6D.__new__(Pose6D)
        object.__setattr__(pose, "position", _frozen_array(self.position + offset, 3))
        object.__setattr__(pose, "orientation", self.orientation)
        return pose

    def rotated(self, q_offset) -> Pose6D:
        """New pose with the offset rotation applied in the world frame; position shared."""
        pose = Pose6D.__new__(Pose6D)
        object.__setattr__(pose, "position", self.position)
        object.__setattr__(pose, "orientation", quat_mul(q_offset, self.orientation))
        return pose

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "orientation": [float(v) for v in self.orientation],
        }

    @staticmethod
    def from_dict(d: dict) -> Pose6D:
        return Pose6D(np.array(d["position"]), np.array(d["orientation"]))


def pose(x: float, y: float, z: float, orientation=None) -> Pose6D:
    """Convenience constructor; defaults to the gripper-down orientation."""
    if orientation is None:
        orientation = GRIPPER_DOWN
    return Pose6D(np.array([x, y, z]), orientation)
