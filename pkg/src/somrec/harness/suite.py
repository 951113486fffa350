"""The desk-scale benchmark objects and canned experiment configurations.

Eight parametric objects sized around a decimeter. Each one is made pose-
identifiable (no exact rotational symmetry) by its coloring or an attached
part, except the plain cylinder, which is deliberately ambiguous against
the mug body so the hypothesis-testing policy has real work to do.
"""

from __future__ import annotations

import numpy as np

from ..environment.scene import Painter, Part, SceneObject
from ..environment.shapes import Box, CappedTorus, Capsule, Cylinder, Sphere, Torus
from ..geometry import Pose, Rotation
from ..learning.config import LMConfig
from ..policies import PolicyConfig
from .config import ExperimentConfig, SensorSpec

RED = (0.85, 0.1, 0.1, 1.0)
BLUE = (0.1, 0.1, 0.85, 1.0)
GRAY = (0.7, 0.7, 0.7, 1.0)
GREEN = (0.1, 0.7, 0.2, 1.0)
YELLOW = (0.9, 0.8, 0.1, 1.0)
PURPLE = (0.6, 0.1, 0.7, 1.0)
CYAN = (0.1, 0.8, 0.8, 1.0)
ORANGE = (0.95, 0.5, 0.1, 1.0)
WHITE = (0.95, 0.95, 0.95, 1.0)


def _at(x, y, z, rot: Rotation | None = None) -> Pose:
    return Pose(np.array([x, y, z]), rot or Rotation.identity())


def two_tone_cylinder() -> SceneObject:
    painter = Painter(primary=RED, secondary=BLUE, sector_deg=60.0, z_min=0.0)
    return SceneObject.single(Cylinder(radius=0.04, height=0.12), painter=painter)


def plain_cylinder() -> SceneObject:
    return SceneObject.single(Cylinder(radius=0.04, height=0.10), color=GRAY)


def mug() -> SceneObject:
    handle_rot = Rotation.from_axis_angle([1.0, 0.0, 0.0], np.pi / 2)  # arc into xz
    return SceneObject(
        parts=(
            Part(Cylinder(radius=0.04, height=0.10), _at(0, 0, 0), GRAY),
            Part(
                CappedTorus(major=0.028, minor=0.009, aperture=1.95),
                _at(0.036, 0.0, 0.01, handle_rot),
                GRAY,
            ),
        )
    )


def dotted_box() -> SceneObject:
    return SceneObject(
        parts=(
            Part(Box(0.07, 0.1, 0.05), _at(0, 0, 0), GREEN),
            Part(Sphere(0.012), _at(0.02, 0.03, 0.025), WHITE),
        )
    )


def pawn() -> SceneObject:
    return SceneObject(
        parts=(
            Part(Capsule(radius=0.03, height=0.07), _at(0, 0, 0), YELLOW),
            Part(Sphere(0.012), _at(0.03, 0.0, 0.02), RED),
        )
    )


def gem_ring() -> SceneObject:
    return SceneObject(
        parts=(
            Part(Torus(major=0.04, minor=0.013), _at(0, 0, 0), PURPLE),
            Part(Sphere(0.012), _at(0.04, 0.0, 0.015), CYAN),
        )
    )


def l_block() -> SceneObject:
    return SceneObject(
        parts=(
            Part(Box(0.09, 0.03, 0.03), _at(0, 0, 0), ORANGE),
            Part(Box(0.03, 0.06, 0.03), _at(-0.03, 0.045, 0), ORANGE),
        )
    )


def snowman() -> SceneObject:
    return SceneObject(
        parts=(
            Part(Sphere(0.035), _at(0, 0, 0), WHITE),
            Part(Sphere(0.024), _at(0, 0.048, 0), WHITE),
            Part(Sphere(0.008), _at(0, 0.048, 0.026), ORANGE),
        )
    )


BENCHMARK_OBJECTS = {
    "two_tone_cylinder": two_tone_cylinder,
    "cylinder": plain_cylinder,
    "mug": mug,
    "dotted_box": dotted_box,
    "pawn": pawn,
    "gem_ring": gem_ring,
    "l_block": l_block,
    "snowman": snowman,
}


def build_object(label: str) -> SceneObject:
    if label not in BENCHMARK_OBJECTS:
        raise KeyError(f"unknown benchmark object {label!r}")
    return BENCHMARK_OBJECTS[label]()


def held_out_rotations() -> list:
    """Three 90-degree rotations, one about each axis."""
    return [
        Rotation.from_axis_angle(axis, np.pi / 2).matrix.tolist()
        for axis in ([1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0])
    ]


def benchmark_lm_config() -> LMConfig:
    # pose tolerances absorb the hypothesis grid: hypotheses are seeded at
    # stored nodes, so poses one node-spacing off the truth track the leader
    # closely and must count as the same pose
    return LMConfig(
        max_match_distance=0.015,
        dedup_distance=0.006,
        percent_threshold=0.15,
        max_steps=100,
        min_steps=3,
        pose_location_tolerance=0.025,
        pose_rotation_tolerance_deg=30.0,
        vote_radius=0.015,
        vote_top_fraction=0.2,
    )


def _benchmark_policy(policy: str, use_ht: bool = False) -> PolicyConfig:
    # wide framing: the patch sees more surface per view, so station scans
    # cover objects in fewer steps and curvature fits stay well-conditioned
    return PolicyConfig(
        policy=policy,
        use_hypothesis_testing=use_ht,
        ht_mode="auto",
        orient_step_deg=4.0,
        view_fill_lo=0.15,
        view_fill_hi=0.35,
        spiral_step_deg=4.0,
        spiral_ring_deg=4.0,
    )


def train_config(objects=None, seed: int = 0, sensors=None, wiring=None) -> ExperimentConfig:
    return ExperimentConfig(
        objects=list(objects or BENCHMARK_OBJECTS),
        rotations=[np.eye(3).tolist()],
        sensors=sensors or [SensorSpec("patch_0")],
        vote_wiring=wiring or {},
        lm_config=benchmark_lm_config(),
        policy_config=_benchmark_policy("scan_spiral"),
        mode="train",
        seed=seed,
        exploration_steps=240,
        scan_stations=6,
    )


def eval_config(objects=None, seed: int = 0, sensors=None, wiring=None,
                rotations=None, use_ht: bool = True) -> ExperimentConfig:
    return ExperimentConfig(
        objects=list(objects or BENCHMARK_OBJECTS),
        rotations=rotations if rotations is not None else held_out_rotations(),
        sensors=sensors or [SensorSpec("patch_0")],
        vote_wiring=wiring or {},
        lm_config=benchmark_lm_config(),
        policy_config=_benchmark_policy("random_walk", use_ht=use_ht),
        mode="eval",
        seed=seed,
    )


def two_lm_sensors() -> list:
    return [
        SensorSpec("patch_0", offset=[0.0, 0.02, 0.0]),
        SensorSpec("patch_1", offset=[0.0, -0.02, 0.0]),
    ]


def two_lm_wiring() -> dict:
    return {"lm_0": ["lm_1"], "lm_1": ["lm_0"]}
