"""Agents and their action spaces.

The distant agent is a camera on a ball joint: it pans and tilts, and can
slide along its view axis. The surface agent glides tangentially over an
object at a fixed contact offset, re-projecting onto the surface after
every step. Both accept absolute jumps, which model-based policies use.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..geometry import Pose, Rotation, normalize
from .scene import Scene, ray_cast

WORLD_UP = np.array([0.0, 1.0, 0.0])


class ActionSpaceError(ValueError):
    """Action not available for this agent kind."""


@dataclass(frozen=True)
class Orient:
    """Pan/tilt the look direction (degrees); distant agent only."""

    delta_pitch: float
    delta_yaw: float

    def reversed(self):
        return Orient(-self.delta_pitch, -self.delta_yaw)


@dataclass(frozen=True)
class TranslateTangential:
    """Slide along the surface tangent plane; surface agent only."""

    delta: np.ndarray  # body frame, projected onto the tangent plane

    def __post_init__(self):
        object.__setattr__(self, "delta", np.asarray(self.delta, dtype=np.float64))

    def reversed(self):
        return TranslateTangential(-self.delta)


@dataclass(frozen=True)
class MoveForward:
    distance: float

    def reversed(self):
        return MoveForward(-self.distance)


@dataclass(frozen=True)
class OrientToFace:
    target: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=np.float64))

    def reversed(self):
        return self


@dataclass(frozen=True)
class JumpToPose:
    pose: Pose

    def reversed(self):
        return self


Action = Orient | TranslateTangential | MoveForward | OrientToFace | JumpToPose


@dataclass(frozen=True)
class AgentState:
    """Pose of the agent plus its rigidly attached sensors."""

    kind: str  # "distant" | "surface"
    pose: Pose
    sensors: dict[str, Pose] = field(default_factory=dict)  # sensor id -> offset
    contact: bool = False
    surface_offset: float = 0.004

    def __post_init__(self):
        if self.kind not in ("distant", "surface"):
            raise ValueError(f"unknown agent kind {self.kind!r}")
        if len(set(self.sensors)) != len(self.sensors):
            raise ValueError("sensor ids must be distinct")

    def sensor_pose(self, sensor_id: str) -> Pose:
        return self.pose.compose(self.sensors[sensor_id])

    @property
    def look_axis(self) -> np.ndarray:
        return -self.pose.orientation.matrix[:, 2]


def look_at(location: np.ndarray, target: np.ndarray) -> Rotation:
    """Roll-free orientation whose -z axis points from location to target."""
    forward = normalize(np.asarray(target, dtype=np.float64) - location)
    c3 = -forward
    ref = WORLD_UP if abs(float(np.dot(forward, WORLD_UP))) < 0.999 else np.array([1.0, 0.0, 0.0])
    c1 = normalize(np.cross(ref, c3))
    c2 = np.cross(c3, c1)
    return Rotation.from_matrix(np.column_stack([c1, c2, c3]), check=False)


def _orient(state: AgentState, action: Orient) -> AgentState:
    yaw = Rotation.from_axis_angle(WORLD_UP, np.radians(action.delta_yaw))
    orientation = yaw @ state.pose.orientation
    right = orientation.matrix[:, 0]
    pitch = Rotation.from_axis_angle(right, np.radians(action.delta_pitch))
    orientation = pitch @ orientation
    return replace(state, pose=Pose(state.pose.location, orientation))


def _surface_normal_at(scene: Scene, instance, point: np.ndarray) -> np.ndarray:
    props = instance.object.surface_properties(
        instance.pose.inverse_transform(point), atol=1e-3
    )
    return instance.pose.orientation.apply(props.normal)


def _reproject(scene: Scene, state: AgentState, candidate: np.ndarray, normal: np.ndarray):
    """Drop the candidate point back onto the surface along -normal."""
    lift = max(4 * state.surface_offset, 0.02)
    hit = ray_cast(scene, candidate + lift * normal, -normal)
    if hit is None and scene.objects:
        center = scene.objects[0].pose.location
        to_center = center - candidate
        norm = np.linalg.norm(to_center)
        if norm > 1e-12:
            hit = ray_cast(scene, candidate, to_center / norm)
    return hit


def _translate_tangential(scene: Scene, state: AgentState, action: TranslateTangential) -> AgentState:
    axis = state.look_axis
    contact_hit = ray_cast(scene, state.pose.location, axis)
    if contact_hit is None:
        # floating free: slide sideways and hope a later cast reattaches
        new_loc = state.pose.location + action.delta
        return replace(state, pose=Pose(new_loc, state.pose.orientation), contact=False)
    normal = _surface_normal_at(scene, contact_hit.instance, contact_hit.location)
    delta = action.delta - float(np.dot(action.delta, normal)) * normal
    candidate = contact_hit.location + delta
    hit = _reproject(scene, state, candidate, normal)
    if hit is None:
        return replace(state, contact=False)
    new_normal = _surface_normal_at(scene, hit.instance, hit.location)
    location = hit.location + state.surface_offset * new_normal
    orientation = look_at(location, hit.location)
    return replace(state, pose=Pose(location, orientation), contact=True)


def apply_action(scene: Scene, state: AgentState, action: Action) -> AgentState:
    """Advance the agent; raises ActionSpaceError on agent/action mismatch."""
    if isinstance(action, Orient):
        if state.kind != "distant":
            raise ActionSpaceError("orient is a distant-agent action")
        return _orient(state, action)
    if isinstance(action, TranslateTangential):
        if state.kind != "surface":
            raise ActionSpaceError("translate_tangential is a surface-agent action")
        return _translate_tangential(scene, state, action)
    if isinstance(action, MoveForward):
        location = state.pose.location + action.distance * state.look_axis
        return replace(state, pose=Pose(location, state.pose.orientation))
    if isinstance(action, OrientToFace):
        orientation = look_at(state.pose.location, action.target)
        return replace(state, pose=Pose(state.pose.location, orientation))
    if isinstance(action, JumpToPose):
        contact = state.contact
        if state.kind == "surface":
            hit = ray_cast(scene, action.pose.location, -action.pose.orientation.matrix[:, 2])
            contact = hit is not None and hit.distance <= 4 * state.surface_offset
        return replace(state, pose=action.pose, contact=contact)
    raise ActionSpaceError(f"unknown action {action!r}")
