"""Scenes: posed, painted objects plus the ray-cast patch sensor.

A scene holds labeled object instances (one per episode in practice, but
the cast loop does not care). Colors can vary over a part's surface via a
declarative painter so two-tone objects stay JSON-serializable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Pose, Rotation
from .shapes import Mesh, Shape, SurfaceProperties, shape_from_dict

GRAY = (0.5, 0.5, 0.5, 1.0)


@dataclass(frozen=True)
class Painter:
    """Position-dependent two-tone coloring.

    Primary color applies where the local azimuth is within `sector_deg` of
    the +x axis and local z >= z_min; secondary elsewhere.
    """

    primary: tuple
    secondary: tuple
    sector_deg: float = 180.0
    z_min: float = -np.inf

    def color_at(self, local_point: np.ndarray) -> np.ndarray:
        phi = np.degrees(np.arctan2(local_point[1], local_point[0]))
        if abs(phi) <= self.sector_deg and local_point[2] >= self.z_min:
            return np.asarray(self.primary, dtype=np.float64)
        return np.asarray(self.secondary, dtype=np.float64)

    def to_dict(self):
        return {
            "primary": list(self.primary),
            "secondary": list(self.secondary),
            "sector_deg": self.sector_deg,
            "z_min": self.z_min if np.isfinite(self.z_min) else None,
        }

    @staticmethod
    def from_dict(d):
        z_min = d.get("z_min")
        return Painter(
            primary=tuple(d["primary"]),
            secondary=tuple(d["secondary"]),
            sector_deg=d.get("sector_deg", 180.0),
            z_min=-np.inf if z_min is None else float(z_min),
        )


@dataclass(frozen=True)
class Part:
    shape: Shape
    pose: Pose = field(default_factory=Pose.identity)
    color: tuple = GRAY
    painter: Painter | None = None

    def color_at(self, local_point: np.ndarray) -> np.ndarray:
        if self.painter is not None:
            return self.painter.color_at(local_point)
        return np.asarray(self.color, dtype=np.float64)


def pose_to_dict(pose: Pose) -> dict:
    return {"location": pose.location.tolist(), "rotation": pose.orientation.matrix.tolist()}


def pose_from_dict(d: dict) -> Pose:
    return Pose(
        np.asarray(d.get("location", [0, 0, 0]), dtype=np.float64),
        Rotation.from_matrix(np.asarray(d.get("rotation", np.eye(3).tolist()))),
    )


@dataclass(frozen=True)
class SceneObject:
    """A solid assembled from one or more posed, colored parts."""

    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("object needs at least one part")

    @staticmethod
    def single(shape: Shape, color: tuple = GRAY, painter: Painter | None = None) -> "SceneObject":
        return SceneObject(parts=(Part(shape, Pose.identity(), color, painter),))

    def sdf(self, points: np.ndarray) -> np.ndarray:
        """Union signed distance over parts (points in object frame)."""
        dists = []
        for part in self.parts:
            local = (points - part.pose.location) @ part.pose.orientation.matrix
            dists.append(part.shape.sdf(local))
        return np.min(np.stack(dists), axis=0)

    def surface_properties(self, point: np.ndarray, atol: float = 1e-6) -> SurfaceProperties:
        """Analytic frame and curvatures at an object-frame surface point."""
        point = np.asarray(point, dtype=np.float64)
        best, best_d = None, np.inf
        for part in self.parts:
            local = part.pose.inverse_transform(point)
            try:
                d = abs(float(part.shape.sdf(local[None, :])[0]))
            except Exception:
                continue
            if d < best_d:
                best, best_d = part, d
        if best is None:
            from .shapes import UnsupportedShapeError

            raise UnsupportedShapeError("no part supports surface properties")
        local = best.pose.inverse_transform(point)
        props = best.shape.surface_properties(local, atol=atol)
        m = best.pose.orientation.matrix
        return SurfaceProperties(
            m @ props.normal, m @ props.dir_1, m @ props.dir_2, props.k1, props.k2
        )

    def to_dict(self):
        return {
            "parts": [
                {
                    "shape": part.shape.to_dict(),
                    "pose": pose_to_dict(part.pose),
                    "color": list(part.color),
                    **({"painter": part.painter.to_dict()} if part.painter else {}),
                }
                for part in self.parts
            ]
        }

    @staticmethod
    def from_dict(d):
        parts = tuple(
            Part(
                shape=shape_from_dict(p["shape"]),
                pose=pose_from_dict(p.get("pose", {})),
                color=tuple(p.get("color", GRAY)),
                painter=Painter.from_dict(p["painter"]) if "painter" in p else None,
            )
            for p in d["parts"]
        )
        return SceneObject(parts=parts)


@dataclass(frozen=True)
class ObjectInstance:
    object: SceneObject
    pose: Pose
    ground_truth_label: str


@dataclass(frozen=True)
class Scene:
    objects: tuple

    def single(self) -> ObjectInstance:
        return self.objects[0]


@dataclass(frozen=True)
class Hit:
    distance: float
    location: np.ndarray  # body/world frame
    color: np.ndarray  # rgba
    instance: ObjectInstance
    part_index: int


def _ray_cast_batch(scene: Scene, origins: np.ndarray, dirs: np.ndarray):
    """Nearest hit per ray across all instances and parts.

    Returns (t, locations, colors, hit_mask); colors are rgba rows.
    """
    n = origins.shape[0]
    best_t = np.full(n, np.inf)
    best_inst = np.full(n, -1, dtype=np.int64)
    best_part = np.full(n, -1, dtype=np.int64)
    for oi, inst in enumerate(scene.objects):
        inv = inst.pose.orientation.inverse.matrix
        local_o = (origins - inst.pose.location) @ inv.T
        local_d = dirs @ inv.T
        for pi, part in enumerate(inst.object.parts):
            pinv = part.pose.orientation.inverse.matrix
            part_o = (local_o - part.pose.location) @ pinv.T
            part_d = local_d @ pinv.T
            t = part.shape.ray(part_o, part_d)
            closer = t < best_t
            best_t = np.where(closer, t, best_t)
            best_inst = np.where(closer, oi, best_inst)
            best_part = np.where(closer, pi, best_part)

    hit_mask = np.isfinite(best_t)
    locations = origins + np.where(hit_mask, best_t, 0.0)[:, None] * dirs
    colors = np.zeros((n, 4))
    for i in np.flatnonzero(hit_mask):
        inst = scene.objects[best_inst[i]]
        part = inst.object.parts[best_part[i]]
        local = part.pose.inverse_transform(inst.pose.inverse_transform(locations[i]))
        if isinstance(part.shape, Mesh):
            # re-derive the barycentric color for the winning triangle
            o = part.pose.inverse_transform(inst.pose.inverse_transform(origins[i]))
            d = part.pose.orientation.inverse.apply(
                inst.pose.orientation.inverse.apply(dirs[i])
            )
            _, tri, uv = part.shape.ray_detailed(o[None, :], d[None, :])
            c = part.shape.color_at(int(tri[0]), uv[0])
            colors[i] = c if c is not None else np.asarray(part.color)
        else:
            colors[i] = part.color_at(local)
    return best_t, locations, colors, hit_mask, best_inst, best_part


def ray_cast(scene: Scene, origin, direction) -> Hit | None:
    """Nearest intersection of one ray with the scene, or None."""
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    t, locs, colors, mask, inst_idx, part_idx = _ray_cast_batch(
        scene, origin[None, :], direction[None, :]
    )
    if not mask[0]:
        return None
    return Hit(
        distance=float(t[0]),
        location=locs[0],
        color=colors[0],
        instance=scene.objects[inst_idx[0]],
        part_index=int(part_idx[0]),
    )


@dataclass(frozen=True)
class Patch:
    """Raw sensed grid: body-frame points, colors, and on-object validity."""

    locations: np.ndarray  # (H,W,3)
    colors: np.ndarray  # (H,W,4)
    on_object: np.ndarray  # (H,W) bool
    sensor_pose: Pose
    zoom: float

    @property
    def resolution(self):
        return self.on_object.shape

    @property
    def center_index(self):
        h, w = self.on_object.shape
        return h // 2, w // 2

    @property
    def center_location(self) -> np.ndarray:
        i, j = self.center_index
        return self.locations[i, j]

    @property
    def center_on_object(self) -> bool:
        i, j = self.center_index
        return bool(self.on_object[i, j])

    @property
    def center_color(self) -> np.ndarray:
        i, j = self.center_index
        return self.colors[i, j]


def pixel_directions(pose: Pose, resolution, zoom: float, fov_deg: float) -> np.ndarray:
    """Unit ray directions through each pixel of a pinhole camera.

    The optical axis is the sensor's -z; the pixel (H//2, W//2) lies exactly
    on the axis. Zoom divides the field of view.
    """
    h, w = resolution
    m = pose.orientation.matrix
    right, up, back = m[:, 0], m[:, 1], m[:, 2]
    axis = -back
    fov = np.radians(fov_deg) / zoom
    a_v = (np.arange(h) - h // 2) * (fov / h)
    a_h = (np.arange(w) - w // 2) * (fov / w)
    tan_v, tan_h = np.tan(a_v), np.tan(a_h)
    dirs = (
        axis[None, None, :]
        + tan_h[None, :, None] * right[None, None, :]
        - tan_v[:, None, None] * up[None, None, :]
    )
    return dirs / np.linalg.norm(dirs, axis=2, keepdims=True)


def sense_patch(
    scene: Scene,
    sensor_pose: Pose,
    resolution=(16, 16),
    zoom: float = 10.0,
    fov_deg: float = 60.0,
    depth_noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Patch:
    """One ray per pixel from a pinhole camera at `sensor_pose`."""
    h, w = resolution
    if h < 5 or w < 5:
        raise ValueError("patch resolution must be at least 5x5")
    dirs = pixel_directions(sensor_pose, resolution, zoom, fov_deg).reshape(-1, 3)
    origins = np.broadcast_to(sensor_pose.location, dirs.shape).copy()
    t, locs, colors, mask, _, _ = _ray_cast_batch(scene, origins, dirs)
    if depth_noise_sigma > 0.0:
        if rng is None:
            raise ValueError("depth noise needs an rng")
        noisy_t = t + rng.normal(scale=depth_noise_sigma, size=t.shape)
        locs = origins + np.where(mask, noisy_t, 0.0)[:, None] * dirs
    return Patch(
        locations=locs.reshape(h, w, 3),
        colors=colors.reshape(h, w, 4),
        on_object=mask.reshape(h, w),
        sensor_pose=sensor_pose,
        zoom=zoom,
    )


def scene_to_dict(scene: Scene) -> dict:
    return {
        "objects": [
            {
                "label": inst.ground_truth_label,
                "object": inst.object.to_dict(),
                "pose": pose_to_dict(inst.pose),
            }
            for inst in scene.objects
        ]
    }


def scene_from_dict(d: dict) -> Scene:
    return Scene(
        objects=tuple(
            ObjectInstance(
                object=SceneObject.from_dict(o["object"]),
                pose=pose_from_dict(o.get("pose", {})),
                ground_truth_label=o["label"],
            )
            for o in d["objects"]
        )
    )


def save_scene(scene: Scene, path) -> None:
    with open(path, "w") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2)


def load_scene(path) -> Scene:
    with open(path) as fh:
        return scene_from_dict(json.load(fh))
