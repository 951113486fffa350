"""Poses, orthonormal surface frames, rotations, and frame alignment.

All locations are 3-vectors in meters. Rotations are kept as unit
quaternions internally (composition does not drift) but are exposed and
serialized as 3x3 orthonormal matrices, which is the wire format every
other module speaks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_ATOL = 1e-9
ORTHO_ATOL = 1e-9


class DegenerateFrameError(ValueError):
    """Raised when input directions are too close to collinear to span a frame."""


class InvalidFrameError(ValueError):
    """Raised when a frame fails its unit/orthogonality invariants."""


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {a.shape}")
    return a


def normalize(v) -> np.ndarray:
    v = _as_vec3(v)
    n = np.linalg.norm(v)
    if n < 1e-15:
        raise DegenerateFrameError("cannot normalize near-zero vector")
    return v / n


def _quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Matrix -> unit quaternion (w, x, y, z), Shepperd's method."""
    t = np.trace(m)
    if t > 0:
        w = 0.5 * np.sqrt(1.0 + t)
        s = 0.25 / w
        q = np.array(
            [w, (m[2, 1] - m[1, 2]) * s, (m[0, 2] - m[2, 0]) * s, (m[1, 0] - m[0, 1]) * s]
        )
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1.0 + m[i, i] - m[j, j] - m[k, k], 0.0))
        q = np.empty(4)
        q[1 + i] = 0.5 * s
        s = 0.25 / (0.5 * s)
        q[0] = (m[k, j] - m[j, k]) * s
        q[1 + j] = (m[j, i] + m[i, j]) * s
        q[1 + k] = (m[k, i] + m[i, k]) * s
    return q / np.linalg.norm(q)


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def _quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


@dataclass(frozen=True)
class Rotation:
    """Proper rotation, quaternion-backed, matrix-faced."""

    q: np.ndarray  # unit quaternion (w, x, y, z)

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def from_matrix(m, check: bool = True) -> "Rotation":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"expected 3x3 matrix, got {m.shape}")
        if check:
            if not np.allclose(m @ m.T, np.eye(3), atol=1e-6):
                raise InvalidFrameError("matrix is not orthonormal")
            if np.linalg.det(m) < 0:
                raise InvalidFrameError("matrix is a reflection, not a rotation")
        return Rotation(_quat_from_matrix(m))

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "Rotation":
        axis = normalize(axis)
        half = 0.5 * angle
        return Rotation(np.concatenate([[np.cos(half)], np.sin(half) * axis]))

    @property
    def matrix(self) -> np.ndarray:
        return _quat_to_matrix(self.q)

    def apply(self, v) -> np.ndarray:
        return self.matrix @ _as_vec3(v)

    def compose(self, other: "Rotation") -> "Rotation":
        """self . other: apply `other` first, then `self`."""
        q = _quat_mul(self.q, other.q)
        return Rotation(q / np.linalg.norm(q))

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return self.compose(other)

    @property
    def inverse(self) -> "Rotation":
        w, x, y, z = self.q
        return Rotation(np.array([w, -x, -y, -z]))

    def angle_to(self, other: "Rotation") -> float:
        """Geodesic distance in radians: the angle of self . other^-1."""
        rel = _quat_mul(self.q, other.inverse.q)
        return 2.0 * float(np.arctan2(np.linalg.norm(rel[1:]), abs(rel[0])))

    @property
    def angle(self) -> float:
        return 2.0 * float(np.arctan2(np.linalg.norm(self.q[1:]), abs(self.q[0])))


def rotation_angle_between(m_a: np.ndarray, m_b: np.ndarray) -> float:
    """Geodesic angle (radians) between two rotation matrices."""
    cos = 0.5 * (np.trace(m_a @ m_b.T) - 1.0)
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


@dataclass(frozen=True)
class SurfaceFrame:
    """Orthonormal frame at a surface point.

    `point_normal` points off the surface (toward the sensor when sensed),
    `curvature_dir_1` is the max-curvature tangent, `curvature_dir_2` the
    min-curvature tangent, always normal x dir_1 so the frame is right-handed.
    """

    point_normal: np.ndarray
    curvature_dir_1: np.ndarray
    curvature_dir_2: np.ndarray

    @staticmethod
    def from_rows(m: np.ndarray) -> "SurfaceFrame":
        m = np.asarray(m, dtype=np.float64)
        return SurfaceFrame(m[0].copy(), m[1].copy(), m[2].copy())

    def as_matrix(self) -> np.ndarray:
        """Rows are (normal, dir_1, dir_2); a proper rotation matrix."""
        return np.array([self.point_normal, self.curvature_dir_1, self.curvature_dir_2])

    def violations(self, atol: float = 1e-8) -> list[str]:
        out = []
        for name, v in (
            ("point_normal", self.point_normal),
            ("curvature_dir_1", self.curvature_dir_1),
            ("curvature_dir_2", self.curvature_dir_2),
        ):
            if abs(np.linalg.norm(v) - 1.0) > atol:
                out.append(f"{name} is not unit length")
        pairs = [
            ("point_normal", "curvature_dir_1", self.point_normal, self.curvature_dir_1),
            ("point_normal", "curvature_dir_2", self.point_normal, self.curvature_dir_2),
            ("curvature_dir_1", "curvature_dir_2", self.curvature_dir_1, self.curvature_dir_2),
        ]
        for na, nb, a, b in pairs:
            if abs(float(np.dot(a, b))) > atol:
                out.append(f"{na} and {nb} are not orthogonal")
        return out

    def require_valid(self, atol: float = 1e-8) -> None:
        v = self.violations(atol)
        if v:
            raise InvalidFrameError("; ".join(v))


@dataclass(frozen=True)
class Pose:
    """Location plus orientation in the common (body) frame."""

    location: np.ndarray
    orientation: Rotation

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), Rotation.identity())

    def transform(self, p) -> np.ndarray:
        return self.orientation.apply(p) + self.location

    def inverse_transform(self, p) -> np.ndarray:
        return self.orientation.inverse.apply(_as_vec3(p) - self.location)

    def compose(self, other: "Pose") -> "Pose":
        """Pose of `other` expressed through self: self . other."""
        return Pose(self.transform(other.location), self.orientation @ other.orientation)


def transform_point(pose: Pose, p) -> np.ndarray:
    """Rotate then translate `p` by `pose`."""
    return pose.transform(p)


def displacement_between(prev, cur) -> np.ndarray:
    """Body-frame movement vector from the previous to the current location."""
    prev = _as_vec3(prev)
    cur = _as_vec3(cur)
    if not (np.all(np.isfinite(prev)) and np.all(np.isfinite(cur))):
        raise ValueError("locations must be finite")
    return cur - prev


def orthonormalize_frame(normal, dir_1, dir_2) -> SurfaceFrame:
    """Gram-Schmidt three noisy directions into a valid SurfaceFrame.

    The normal direction is preserved exactly (only rescaled); dir_2 is
    recomputed as normal x dir_1. Inputs closer than 1 degree to collinear
    raise DegenerateFrameError.
    """
    vecs = [_as_vec3(normal), _as_vec3(dir_1), _as_vec3(dir_2)]
    units = [normalize(v) for v in vecs]
    min_angle = np.deg2rad(1.0)
    for i in range(3):
        for j in range(i + 1, 3):
            if abs(float(np.dot(units[i], units[j]))) > np.cos(min_angle):
                raise DegenerateFrameError("input directions are near-collinear")
    n = units[0]
    d1 = units[1] - float(np.dot(units[1], n)) * n
    d1 = normalize(d1)
    # dir_2 is implied: right-handed completion, sign of the input is ignored
    # (curvature directions carry a 180-degree ambiguity anyway)
    d2 = np.cross(n, d1)
    return SurfaceFrame(n, d1, d2)


def _any_perpendicular(v: np.ndarray) -> np.ndarray:
    """A deterministic unit vector orthogonal to unit v."""
    ref = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    return normalize(np.cross(v, ref))


def align_frames(
    sensed: SurfaceFrame,
    stored: SurfaceFrame,
    degenerate: bool = False,
    n_samples: int = 8,
) -> list[Rotation]:
    """Rotations mapping the stored frame onto the sensed frame.

    Non-degenerate frames give exactly two candidates: the exact alignment
    and its 180-degree twin about the sensed normal (the curvature
    direction's sign is ambiguous). Degenerate curvature gives `n_samples`
    rotations evenly spaced about the sensed normal, anchored at the exact
    alignment so the set transforms rigidly with the sensed frame.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    sensed.require_valid()
    stored.require_valid()

    s = sensed.as_matrix()  # rows: n, d1, d2
    t = stored.as_matrix()
    base = s.T @ t  # maps stored vectors onto sensed vectors
    if not degenerate:
        flip = np.array([sensed.point_normal, -sensed.curvature_dir_1, -sensed.curvature_dir_2])
        return [Rotation.from_matrix(base, check=False), Rotation.from_matrix(flip.T @ t, check=False)]

    anchor = Rotation.from_matrix(base, check=False)
    step = 2.0 * np.pi / n_samples
    out = []
    for k in range(n_samples):
        spin = Rotation.from_axis_angle(sensed.point_normal, k * step)
        out.append(spin @ anchor)
    return out
