"""Action selection: model-free walks, spiral scanning, utility positioning,
and the model-based hypothesis-testing goal generator.

The motor system only ever sees sensed values and goal states; the one
function here that reads object models (`hypothesis_test_goal`) is the
learning module's goal-state generator, and its output reaches the motor
system as a CMP goal state like any other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cmp import GoalState, StateMessage
from .environment.agent import (
    AgentState,
    JumpToPose,
    MoveForward,
    Orient,
    OrientToFace,
    TranslateTangential,
    apply_action,
    look_at,
)
from .environment.scene import Scene, ray_cast, sense_patch
from .geometry import Pose
from .learning.config import LMConfig
from .learning.evidence import (
    HypothesisSpace,
    most_likely_hypothesis,
    object_pose_from_hypothesis,
    possible_matches,
    possible_poses,
)
from .learning.model import ObjectModel


class UnreachableGoalError(RuntimeError):
    """No surface at the requested goal location."""


class PositioningFailedError(RuntimeError):
    """Utility positioning could not frame or touch the object."""


@dataclass
class PolicyConfig:
    policy: str = "random_walk"  # "random_walk" | "curvature" | "scan_spiral"
    alpha: float = 0.7  # momentum: probability of repeating the last action
    orient_step_deg: float = 3.0
    tangential_step: float = 0.008
    # curvature-informed policy
    min_curvature_steps: int = 8
    max_curvature_steps: int = 4
    avoid_radius: float = 0.01
    # spiral scan
    spiral_step_deg: float = 2.5
    spiral_ring_deg: float = 2.5
    # model-based jumps
    use_hypothesis_testing: bool = False
    ht_mode: str = "objects"  # "objects" | "poses"
    ht_trigger_ratio: float = 0.8
    ht_cooldown: int = 10
    jump_standoff: float = 0.05
    # utility positioning
    view_fill_lo: float = 0.3
    view_fill_hi: float = 0.6
    max_utility_steps: int = 50

    def to_dict(self) -> dict:
        return dict(vars(self))

    @staticmethod
    def from_dict(d: dict) -> "PolicyConfig":
        return PolicyConfig(**d)


def primitive_actions(agent: AgentState, config: PolicyConfig) -> list:
    """The agent's primitive action set for random exploration."""
    if agent.kind == "distant":
        step = config.orient_step_deg
        return [Orient(step, 0.0), Orient(-step, 0.0), Orient(0.0, step), Orient(0.0, -step)]
    m = agent.pose.orientation.matrix
    right, up = m[:, 0], m[:, 1]
    s = config.tangential_step
    return [
        TranslateTangential(s * right),
        TranslateTangential(-s * right),
        TranslateTangential(s * up),
        TranslateTangential(-s * up),
    ]


def message_off_object(msg: StateMessage | None) -> bool:
    """Distinguish off-object from merely gated: gated messages keep features."""
    return msg is not None and not msg.use_state and not msg.features


def random_walk_step(
    prev_action,
    alpha: float,
    rng: np.random.Generator,
    agent: AgentState,
    config: PolicyConfig,
    off_object: bool = False,
):
    """Momentum walk; an off-object observation always reverses the last move."""
    if off_object and prev_action is not None:
        return prev_action.reversed()
    if prev_action is not None and rng.uniform() < alpha:
        return prev_action
    options = primitive_actions(agent, config)
    return options[int(rng.integers(len(options)))]


@dataclass
class CurvatureWalkState:
    following_min: bool = True
    steps_in_phase: int = 0
    heading: np.ndarray | None = None
    visited: list = field(default_factory=list)


def curvature_informed_step(
    msg: StateMessage | None,
    state: CurvatureWalkState,
    rng: np.random.Generator,
    agent: AgentState,
    config: PolicyConfig,
    prev_action=None,
):
    """Follow principal curvature directions, alternating min/max, avoiding
    revisits; falls back to the random walk when curvature is undefined."""
    degenerate = (
        msg is None
        or not msg.use_state
        or bool(msg.features.get("degenerate", np.array([1.0]))[0] > 0.5)
    )
    if degenerate:
        return random_walk_step(
            prev_action, config.alpha, rng, agent, config,
            off_object=message_off_object(msg),
        )
    state.visited.append(np.asarray(msg.location, dtype=np.float64))

    limit = config.min_curvature_steps if state.following_min else config.max_curvature_steps
    if state.steps_in_phase >= limit:
        state.following_min = not state.following_min
        state.steps_in_phase = 0
    frame = msg.frame
    direction = frame.curvature_dir_2 if state.following_min else frame.curvature_dir_1
    if state.heading is not None and float(np.dot(direction, state.heading)) < 0:
        direction = -direction

    step = config.tangential_step
    proposed = msg.location + step * direction
    for visited in state.visited[:-1]:
        if np.linalg.norm(proposed - visited) < config.avoid_radius:
            direction = np.cross(frame.point_normal, direction)  # avoidance: turn 90 deg
            break

    state.heading = direction
    state.steps_in_phase += 1
    return TranslateTangential(step * direction)


def spiral_lookangles(step_index: int, config: PolicyConfig) -> np.ndarray:
    """(pitch, yaw) in degrees of the spiral scan at a given step."""
    if step_index <= 0:
        return np.zeros(2)
    a = config.spiral_ring_deg / (2 * np.pi)  # radial growth per radian
    theta = 0.0
    for _ in range(step_index):
        r = a * theta
        dtheta = config.spiral_step_deg / max(np.hypot(r, a), 1e-9)
        theta += dtheta
    r = a * theta
    return np.array([r * np.cos(theta), r * np.sin(theta)])


def scan_spiral_step(step_index: int, config: PolicyConfig) -> Orient:
    """Look-direction deltas tracing an outward spiral over the object."""
    here = spiral_lookangles(step_index, config)
    nxt = spiral_lookangles(step_index + 1, config)
    delta = nxt - here
    return Orient(float(delta[0]), float(delta[1]))


def hypothesis_test_goal(
    space: HypothesisSpace,
    models: dict[str, ObjectModel],
    mode: str,
    config: LMConfig,
    sensed_location: np.ndarray,
    step: int = 0,
    last_goal_step: int | None = None,
    trigger_ratio: float = 0.8,
    cooldown: int = 10,
    sender_id: str = "lm",
    swap: bool = False,
) -> GoalState | None:
    """Pick the surface point that best separates the two leading hypotheses.

    The runner-up model (or runner-up pose of the leading object) is overlaid
    onto the leader in body coordinates through each one's most likely pose;
    the goal is the leader's node whose nearest neighbor in the other graph
    is farthest away, observed along that node's stored normal. With `swap`
    the roles are exchanged: useful when the leader's distinctive point turns
    out to lie in empty space (the leader was wrong about it).
    """
    if last_goal_step is not None and step - last_goal_step < cooldown:
        return None
    mlh = most_likely_hypothesis(space)
    evidences = space.object_evidence()

    if mode == "auto":
        mode = "objects" if len(possible_matches(space, config)) >= 2 else "poses"
    if mode == "objects":
        others = {oid: ev for oid, ev in evidences.items() if oid != mlh.object_id}
        if len(possible_matches(space, config)) < 2 or not others:
            return None
        runner_up = max(sorted(others), key=lambda oid: others[oid])
        if mlh.evidence <= 0 or others[runner_up] / mlh.evidence <= trigger_ratio:
            return None
        hyp2 = _best_hypothesis_of(space, runner_up)
        model2 = models[runner_up]
    elif mode == "poses":
        poses = possible_poses(space, mlh.object_id, config)
        distinct = [
            p
            for p in poses
            if p.index != mlh.index
            and (
                np.linalg.norm(p.location - mlh.location) > config.pose_location_tolerance
                or _rotation_angle(p.rotation, mlh.rotation)
                > np.radians(config.pose_rotation_tolerance_deg)
            )
        ]
        if not distinct:
            return None
        hyp2 = max(distinct, key=lambda p: p.evidence)
        model2 = models[mlh.object_id]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    model1 = models[mlh.object_id]
    if swap:
        model1, model2 = model2, model1
        mlh, hyp2 = hyp2, mlh
    t1, r1 = object_pose_from_hypothesis(mlh, sensed_location)
    t2, r2 = object_pose_from_hypothesis(hyp2, sensed_location)
    body1 = model1.locations @ r1.T + t1
    body2 = model2.locations @ r2.T + t2
    d2 = ((body1[:, None, :] - body2[None, :, :]) ** 2).sum(axis=2)
    nearest = d2.min(axis=1)
    target = int(np.argmax(nearest))

    normal = r1 @ model1.normals[target]
    dir_1 = r1 @ model1.dirs_1[target]
    dir_2 = r1 @ model1.dirs_2[target]
    return GoalState(
        location=body1[target],
        morph=np.array([normal, dir_1, dir_2]),
        features={"object_id": mlh.object_id},
        confidence=1.0,
        use_state=True,
        sender_id=sender_id,
        sender_type="LM",
    )


def _best_hypothesis_of(space: HypothesisSpace, object_id: str):
    from .learning.evidence import Hypothesis

    hyp = space.per_object[object_id]
    i = int(np.argmax(hyp.evidence))
    return Hypothesis(
        object_id=object_id,
        location=hyp.locations[i].copy(),
        rotation=hyp.rotations[i].copy(),
        evidence=float(hyp.evidence[i]),
        index=i,
    )


def _rotation_angle(a: np.ndarray, b: np.ndarray) -> float:
    cos = (np.trace(a @ b.T) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def goal_to_actions(
    goal: GoalState,
    agent: AgentState,
    scene: Scene,
    standoff: float | None = None,
    tolerance: float = 0.01,
) -> list | None:
    """Translate a goal state into a jump; None signals an unreachable goal.

    Unreachable means no surface within `tolerance` of the goal location
    along the requested viewing direction; a hit on some other surface
    beyond it does not count.
    """
    target = goal.location
    normal = goal.frame.point_normal
    if standoff is None:
        standoff = agent.surface_offset if agent.kind == "surface" else 0.05

    current = ray_cast(scene, agent.pose.location, agent.look_axis)
    if current is not None and np.linalg.norm(current.location - target) < 1e-9:
        return []

    sensor_loc = target + standoff * normal
    probe = ray_cast(scene, sensor_loc, -normal)
    if probe is None or np.linalg.norm(probe.location - target) > tolerance:
        return None
    pose = Pose(sensor_loc, look_at(sensor_loc, target))
    return [JumpToPose(pose)]


def get_good_view(
    scene: Scene,
    agent: AgentState,
    viewfinder_id: str,
    config: PolicyConfig,
    resolution=(64, 64),
    fov_deg: float = 60.0,
) -> tuple[AgentState, list]:
    """Frame the object so it fills a target fraction of the view-finder.

    Runs before the episode proper; its observations are never delivered to
    learning modules.
    """
    actions: list = []
    target = scene.single().pose.location

    def act(a):
        nonlocal agent
        agent = apply_action(scene, agent, a)
        actions.append(a)

    for _ in range(config.max_utility_steps):
        patch = sense_patch(
            scene, agent.sensor_pose(viewfinder_id), resolution=resolution,
            zoom=1.0, fov_deg=fov_deg,
        )
        fraction = float(patch.on_object.mean())
        if fraction == 0.0:
            act(OrientToFace(target))
            continue
        centroid = patch.locations[patch.on_object].mean(axis=0)
        if not patch.center_on_object:
            act(OrientToFace(centroid))
            continue
        if fraction < config.view_fill_lo:
            gap = ray_cast(scene, agent.pose.location, agent.look_axis)
            step = 0.3 * gap.distance if gap is not None else 0.05
            act(MoveForward(step))
        elif fraction > config.view_fill_hi:
            act(MoveForward(-0.05))
        else:
            return agent, actions
    raise PositioningFailedError("could not frame the object in the view-finder")


def touch_object(
    scene: Scene, agent: AgentState, config: PolicyConfig
) -> tuple[AgentState, list]:
    """Advance the surface agent until it rests at its contact offset."""
    actions: list = []
    target = scene.single().pose.location
    agent2 = apply_action(scene, agent, OrientToFace(target))
    actions.append(OrientToFace(target))
    hit = ray_cast(scene, agent2.pose.location, agent2.look_axis)
    if hit is None:
        raise PositioningFailedError("no object along the approach axis")
    move = MoveForward(hit.distance - agent2.surface_offset)
    agent3 = apply_action(scene, agent2, move)
    actions.append(move)
    from dataclasses import replace

    return replace(agent3, contact=True), actions


def utility_positioning(
    scene: Scene,
    agent: AgentState,
    mode: str,
    config: PolicyConfig,
    viewfinder_id: str = "viewfinder",
) -> tuple[AgentState, list]:
    """Episode-start placement: frame (distant) or touch (surface) the object."""
    if mode == "get_good_view":
        return get_good_view(scene, agent, viewfinder_id, config)
    if mode == "touch_object":
        return touch_object(scene, agent, config)
    raise ValueError(f"unknown positioning mode {mode!r}")


class MotorSystem:
    """Owns policy state; consumes sensed messages and goal states only."""

    def __init__(self, config: PolicyConfig, agent: AgentState, seed: int = 0):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.prev_action = None
        self.curvature_state = CurvatureWalkState()
        self.spiral_index = 0
        self.pending: list = []

    def reset(self) -> None:
        self.prev_action = None
        self.curvature_state = CurvatureWalkState()
        self.spiral_index = 0
        self.pending = []

    def submit_goal(self, goal: GoalState, agent: AgentState, scene: Scene) -> bool:
        """Queue the actions for a goal state; False if it is unreachable."""
        actions = goal_to_actions(goal, agent, scene, standoff=self.config.jump_standoff
                                  if agent.kind == "distant" else None)
        if actions is None:
            return False
        self.pending.extend(actions)
        return True

    def next_action(self, msg: StateMessage | None, agent: AgentState):
        if self.pending:
            action = self.pending.pop(0)
            self.prev_action = None  # a jump breaks the momentum chain
            return action
        off_object = message_off_object(msg)
        if self.config.policy == "scan_spiral":
            action = scan_spiral_step(self.spiral_index, self.config)
            self.spiral_index += 1
        elif self.config.policy == "curvature" and agent.kind == "surface":
            action = curvature_informed_step(
                msg, self.curvature_state, self.rng, agent, self.config, self.prev_action
            )
        else:
            action = random_walk_step(
                self.prev_action, self.config.alpha, self.rng, agent, self.config, off_object
            )
        self.prev_action = action
        return action
