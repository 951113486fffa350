"""Experiment configuration: what to show, with which agent, wired how."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..learning.config import LMConfig
from ..policies import PolicyConfig
from ..sensor import SensorConfig


@dataclass
class SensorSpec:
    sensor_id: str
    offset: list = field(default_factory=lambda: [0.0, 0.0, 0.0])  # body-frame offset
    resolution: tuple = (16, 16)
    zoom: float = 10.0
    fov_deg: float = 60.0
    depth_noise_sigma: float = 0.0

    def to_dict(self):
        return {
            "sensor_id": self.sensor_id,
            "offset": list(self.offset),
            "resolution": list(self.resolution),
            "zoom": self.zoom,
            "fov_deg": self.fov_deg,
            "depth_noise_sigma": self.depth_noise_sigma,
        }

    @staticmethod
    def from_dict(d):
        d = dict(d)
        d["resolution"] = tuple(d.get("resolution", (16, 16)))
        return SensorSpec(**d)


def rotation_to_spec(matrix: np.ndarray) -> list:
    return np.asarray(matrix, dtype=np.float64).tolist()


@dataclass
class ExperimentConfig:
    objects: list = field(default_factory=list)  # labels from the object suite
    scene_file: str | None = None  # alternative: explicit scene JSON
    rotations: list = field(default_factory=lambda: [np.eye(3).tolist()])  # per-object poses
    agent_kind: str = "distant"
    agent_distance: float = 0.35
    agent_elevation_deg: float = 20.0  # start direction, avoids axis-aligned views
    sensors: list = field(default_factory=lambda: [SensorSpec("patch_0")])
    vote_wiring: dict = field(default_factory=dict)  # lm_id -> [peer lm ids]
    sm_config: SensorConfig = field(default_factory=SensorConfig)
    lm_config: LMConfig = field(default_factory=LMConfig)
    policy_config: PolicyConfig = field(default_factory=PolicyConfig)
    mode: str = "train"
    epochs: int = 1
    seed: int = 0
    min_lms_match: int | None = None  # None: all LMs must terminate
    exploration_steps: int = 100
    scan_stations: int = 6
    log_cmp: str | None = None

    def lm_ids(self) -> list:
        return [f"lm_{i}" for i in range(len(self.sensors))]

    def required_lms(self) -> int:
        n = len(self.sensors)
        if self.min_lms_match is not None:
            return min(self.min_lms_match, n)
        return n if n == 1 else (n // 2 + 1)

    def __post_init__(self):
        lm_ids = set(self.lm_ids())
        for lm, peers in self.vote_wiring.items():
            if lm not in lm_ids or any(p not in lm_ids for p in peers):
                raise ValueError("vote wiring references unknown learning modules")

    def to_dict(self) -> dict:
        return {
            "objects": list(self.objects),
            "scene_file": self.scene_file,
            "rotations": [rotation_to_spec(r) for r in self.rotations],
            "agent_kind": self.agent_kind,
            "agent_distance": self.agent_distance,
            "agent_elevation_deg": self.agent_elevation_deg,
            "sensors": [s.to_dict() for s in self.sensors],
            "vote_wiring": {k: list(v) for k, v in self.vote_wiring.items()},
            "sm_config": vars(self.sm_config).copy(),
            "lm_config": self.lm_config.to_dict(),
            "policy_config": self.policy_config.to_dict(),
            "mode": self.mode,
            "epochs": self.epochs,
            "seed": self.seed,
            "min_lms_match": self.min_lms_match,
            "exploration_steps": self.exploration_steps,
            "scan_stations": self.scan_stations,
            "log_cmp": self.log_cmp,
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["sensors"] = [SensorSpec.from_dict(s) for s in d.get("sensors", [])] or [
            SensorSpec("patch_0")
        ]
        sm = d.get("sm_config", {})
        d["sm_config"] = SensorConfig(**sm) if isinstance(sm, dict) else sm
        lm = d.get("lm_config", {})
        d["lm_config"] = LMConfig.from_dict(lm) if isinstance(lm, dict) else lm
        pc = d.get("policy_config", {})
        d["policy_config"] = PolicyConfig.from_dict(pc) if isinstance(pc, dict) else pc
        return ExperimentConfig(**d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @staticmethod
    def load(path) -> "ExperimentConfig":
        with open(path) as fh:
            return ExperimentConfig.from_dict(json.load(fh))
