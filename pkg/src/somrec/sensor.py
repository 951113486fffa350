"""Sensor modules: raw patches in, pose-annotated messages out.

All modality-specific processing lives here. A patch of body-frame surface
points becomes one message: the center-pixel location, an orthonormal
surface frame (total-least-squares plane normal plus quadric-fit principal
curvature directions), the pose-independent features (color, curvature
magnitudes), and a residual-based confidence. Messages that would tell the
learning side nothing new are flagged use_state=False rather than dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cmp import StateMessage
from .environment.scene import Patch
from .geometry import SurfaceFrame, orthonormalize_frame


class TooFewPointsError(ValueError):
    """Not enough on-object points for a stable fit."""


MIN_FIT_POINTS = 6


def estimate_point_normal(patch: Patch) -> np.ndarray:
    """Total-least-squares plane normal over on-object points, toward the sensor."""
    pts = patch.locations[patch.on_object]
    if pts.shape[0] < MIN_FIT_POINTS:
        raise TooFewPointsError(f"need >= {MIN_FIT_POINTS} on-object points, got {pts.shape[0]}")
    centered = pts - pts.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    normal = vt[-1]
    to_sensor = patch.sensor_pose.location - patch.center_location
    if float(np.dot(normal, to_sensor)) < 0:
        normal = -normal
    return normal


@dataclass(frozen=True)
class CurvatureEstimate:
    dir_1: np.ndarray
    dir_2: np.ndarray
    k1: float
    k2: float
    degenerate: bool
    fit_rms: float


def curvature_degenerate(k1: float, k2: float) -> bool:
    """The two principal curvatures are indistinguishable (flat or umbilic)."""
    return abs(k1 - k2) < 0.1 * max(abs(k1), abs(k2), 1.0)


def estimate_principal_curvatures(patch: Patch, normal: np.ndarray) -> CurvatureEstimate:
    """Quadric fit z = a x^2 + b xy + c y^2 (+ plane terms) in the tangent frame.

    Curvature is signed positive where the surface bends toward the sensor.
    """
    pts = patch.locations[patch.on_object]
    if pts.shape[0] < MIN_FIT_POINTS:
        raise TooFewPointsError(f"need >= {MIN_FIT_POINTS} on-object points, got {pts.shape[0]}")
    ref = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(normal, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)

    rel = pts - patch.center_location
    u = rel @ e1
    v = rel @ e2
    w = rel @ normal
    design = np.column_stack([u * u, u * v, v * v, u, v, np.ones_like(u)])
    coeffs, _, rank, _ = np.linalg.lstsq(design, w, rcond=None)
    if rank < design.shape[1]:
        raise TooFewPointsError("rank-deficient curvature fit")
    a, b, c = coeffs[:3]
    fit_rms = float(np.sqrt(np.mean((design @ coeffs - w) ** 2)))

    # height grows along +normal (toward the sensor); a bulge toward the
    # sensor has a negative hessian along the tangent, hence the sign flip
    hessian = np.array([[2 * a, b], [b, 2 * c]])
    eigvals, eigvecs = np.linalg.eigh(-hessian)
    # eigh sorts ascending; k1 is the max curvature
    k1, k2 = float(eigvals[1]), float(eigvals[0])
    d1 = eigvecs[0, 1] * e1 + eigvecs[1, 1] * e2
    d2 = eigvecs[0, 0] * e1 + eigvecs[1, 0] * e2
    d1 /= np.linalg.norm(d1)
    d2 /= np.linalg.norm(d2)
    return CurvatureEstimate(
        dir_1=d1,
        dir_2=d2,
        k1=k1,
        k2=k2,
        degenerate=curvature_degenerate(k1, k2),
        fit_rms=fit_rms,
    )


@dataclass
class SensorConfig:
    min_location_delta: float = 0.001  # meters; below this the message is gated
    feature_change_tolerances: dict = field(
        default_factory=lambda: {"rgba": 0.05, "curvatures": 1.0}
    )
    confidence_rms_scale: float = 1e-3  # meters of fit residual per e-fold


def extract_features(patch: Patch, curv: CurvatureEstimate) -> dict[str, np.ndarray]:
    return {
        "rgba": np.asarray(patch.center_color, dtype=np.float64),
        "curvatures": np.array([curv.k1, curv.k2]),
        "degenerate": np.array([1.0 if curv.degenerate else 0.0]),
    }


class SensorModule:
    """Stateful converter from patches to messages for one sensor."""

    def __init__(self, sender_id: str, config: SensorConfig | None = None):
        self.sender_id = sender_id
        self.config = config or SensorConfig()
        self.prev_sent: StateMessage | None = None

    def reset(self) -> None:
        self.prev_sent = None

    def _gated(self, location, morph, features, confidence) -> bool:
        prev = self.prev_sent
        if prev is None:
            return False
        if np.linalg.norm(location - prev.location) >= self.config.min_location_delta:
            return False
        for name, tol in self.config.feature_change_tolerances.items():
            if name not in features or name not in prev.features:
                continue
            if np.linalg.norm(features[name] - prev.features[name]) >= tol:
                return False
        return True

    def to_cmp(self, patch: Patch) -> StateMessage:
        """Patch to message; failures surface as use_state=False, confidence 0."""
        blank = np.eye(3)
        if not patch.center_on_object:
            return StateMessage(
                location=patch.sensor_pose.location,
                morph=blank,
                features={},
                confidence=0.0,
                use_state=False,
                sender_id=self.sender_id,
                sender_type="SM",
            )
        try:
            normal = estimate_point_normal(patch)
            curv = estimate_principal_curvatures(patch, normal)
            frame = orthonormalize_frame(normal, curv.dir_1, curv.dir_2)
        except (TooFewPointsError, ValueError):
            return StateMessage(
                location=patch.center_location,
                morph=blank,
                features={},
                confidence=0.0,
                use_state=False,
                sender_id=self.sender_id,
                sender_type="SM",
            )
        location = patch.center_location
        features = extract_features(patch, curv)
        confidence = float(np.exp(-curv.fit_rms / self.config.confidence_rms_scale))
        use_state = not self._gated(location, frame, features, confidence)
        msg = StateMessage(
            location=location,
            morph=frame.as_matrix(),
            features=features,
            confidence=confidence,
            use_state=use_state,
            sender_id=self.sender_id,
            sender_type="SM",
        )
        if use_state:
            self.prev_sent = msg
        return msg


def to_cmp(patch: Patch, prev_sent: StateMessage | None, config: SensorConfig | None = None,
           sender_id: str = "sm_0") -> StateMessage:
    """One-shot functional form of SensorModule.to_cmp."""
    sm = SensorModule(sender_id, config)
    sm.prev_sent = prev_sent
    return sm.to_cmp(patch)
