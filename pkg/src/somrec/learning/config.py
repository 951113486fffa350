"""Tunables for the evidence-based learning module.

None of these values comes from first principles; they are operating points
for desk-scale objects (~0.1 m) and can be overridden per experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class LMConfig:
    # hypothesis matching
    max_match_distance: float = 0.01  # neighbor search radius, meters
    feature_tolerances: dict = field(
        default_factory=lambda: {"rgba": 0.25, "curvatures": 8.0}
    )
    feature_weights: dict = field(
        default_factory=lambda: {"rgba": 0.5, "curvatures": 0.5}
    )
    percent_threshold: float = 0.2
    n_degenerate_rotations: int = 8
    evidence_prune_gap: float | None = None  # optional; drops hopeless hypotheses

    # graph building
    dedup_distance: float = 0.005  # meters

    # terminal condition
    max_steps: int = 500
    min_steps: int = 3
    pose_location_tolerance: float = 0.01  # meters
    pose_rotation_tolerance_deg: float = 10.0

    # voting
    vote_radius: float = 0.01
    vote_rotation_tolerance_deg: float = 30.0
    vote_top_fraction: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.percent_threshold < 1.0):
            raise ValueError("percent_threshold must be in (0, 1)")
        if self.n_degenerate_rotations < 1:
            raise ValueError("n_degenerate_rotations must be >= 1")
        weights = np.array(list(self.feature_weights.values()), dtype=np.float64)
        if weights.size:
            if (weights < 0).any():
                raise ValueError("feature weights must be nonnegative")
            if abs(weights.sum() - 1.0) > 1e-9:
                raise ValueError("feature weights must sum to 1")
        for name in self.feature_weights:
            if name not in self.feature_tolerances:
                raise ValueError(f"weighted feature {name!r} has no tolerance")

    def to_dict(self) -> dict:
        return {
            "max_match_distance": self.max_match_distance,
            "feature_tolerances": dict(self.feature_tolerances),
            "feature_weights": dict(self.feature_weights),
            "percent_threshold": self.percent_threshold,
            "n_degenerate_rotations": self.n_degenerate_rotations,
            "evidence_prune_gap": self.evidence_prune_gap,
            "dedup_distance": self.dedup_distance,
            "max_steps": self.max_steps,
            "min_steps": self.min_steps,
            "pose_location_tolerance": self.pose_location_tolerance,
            "pose_rotation_tolerance_deg": self.pose_rotation_tolerance_deg,
            "vote_radius": self.vote_radius,
            "vote_rotation_tolerance_deg": self.vote_rotation_tolerance_deg,
            "vote_top_fraction": self.vote_top_fraction,
        }

    @staticmethod
    def from_dict(d: dict) -> "LMConfig":
        return LMConfig(**d)
