"""Evidence accumulation over (object, location, rotation) hypotheses.

Each hypothesis reads "I am at location L on object O, which sits in the
world rotated by R". Movement displaces every hypothesis through its own
rotation; the model nodes found near the displaced location grade the
hypothesis: pose agreement can add or subtract (in [-1, 1]), features only
ever add (in [0, 1]), walking off the model costs a flat -1. The hot inner
loop lives in `somrec.kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..cmp import StateMessage
from ..geometry import Rotation, SurfaceFrame, align_frames, rotation_angle_between
from .config import LMConfig
from .model import GraphNode, ObjectModel


class UnknownFeatureError(KeyError):
    """A weighted feature is missing from one of the compared feature maps."""


class EmptySpaceError(ValueError):
    """Operation requires a non-empty hypothesis space."""


@dataclass
class Hypothesis:
    object_id: str
    location: np.ndarray  # model frame
    rotation: np.ndarray  # (3,3), model frame -> body frame
    evidence: float
    index: int = -1


@dataclass
class ObjectHypotheses:
    locations: np.ndarray  # (N,3) model frame
    rotations: np.ndarray  # (N,3,3)
    evidence: np.ndarray  # (N,)

    def __len__(self):
        return self.locations.shape[0]


@dataclass
class HypothesisSpace:
    per_object: dict[str, ObjectHypotheses] = field(default_factory=dict)
    lm_steps: int = 0

    def __len__(self):
        return sum(len(h) for h in self.per_object.values())

    def object_evidence(self) -> dict[str, float]:
        return {
            oid: float(h.evidence.max())
            for oid, h in self.per_object.items()
            if len(h) > 0
        }


@dataclass(frozen=True)
class TerminalResult:
    kind: str  # "match" | "no_match" | "time_out" | "continue"
    hypothesis: Hypothesis | None = None

    @property
    def is_terminal(self) -> bool:
        return self.kind != "continue"


def _feature_distance(a, b) -> float:
    return float(np.linalg.norm(np.atleast_1d(a) - np.atleast_1d(b)))


def feature_evidence(sensed: dict, stored: dict, config: LMConfig) -> float:
    """Weighted, tolerance-normalized feature agreement in [0, 1]; never negative."""
    total = 0.0
    for name, weight in config.feature_weights.items():
        if name not in sensed or name not in stored:
            raise UnknownFeatureError(name)
        tol = config.feature_tolerances[name]
        d = _feature_distance(sensed[name], stored[name])
        total += weight * max(0.0, 1.0 - d / tol)
    return total


def feature_evidence_nodes(sensed: dict, model: ObjectModel, config: LMConfig) -> np.ndarray:
    """Vectorized feature_evidence against every node of a model."""
    out = np.zeros(len(model))
    for name, weight in config.feature_weights.items():
        if name not in sensed or name not in model.features:
            raise UnknownFeatureError(name)
        tol = config.feature_tolerances[name]
        sensed_vec = np.atleast_1d(np.asarray(sensed[name], dtype=np.float64))
        d = np.linalg.norm(model.features[name] - sensed_vec[None, :], axis=1)
        out += weight * np.maximum(0.0, 1.0 - d / tol)
    return out


def morphology_evidence(
    sensed: SurfaceFrame, stored: GraphNode, sensed_degenerate: bool = False
) -> float:
    """Pose-feature agreement in [-1, 1].

    Point normals contribute cos(angle); curvature directions contribute
    cos(2*angle), which folds their 180-degree symmetry. Observations with
    degenerate curvature carry no direction information, so the normal term
    gets full weight.
    """
    cos_pn = float(np.dot(sensed.point_normal, stored.frame.point_normal))
    if sensed_degenerate:
        return cos_pn
    cos_cd = float(np.dot(sensed.curvature_dir_1, stored.frame.curvature_dir_1))
    return 0.5 * cos_pn + 0.5 * (2.0 * cos_cd * cos_cd - 1.0)


def _message_degenerate(msg: StateMessage) -> bool:
    flag = msg.features.get("degenerate")
    return bool(flag is not None and flag[0] > 0.5)


def _node_degenerate(model: ObjectModel, i: int) -> bool:
    flag = model.features.get("degenerate")
    return bool(flag is not None and flag[i, 0] > 0.5)


def init_hypotheses(
    models: dict[str, ObjectModel], first_msg: StateMessage, config: LMConfig
) -> HypothesisSpace:
    """Seed hypotheses at every node of every known model.

    Each node contributes the frame alignments between the sensed and stored
    surface frames (two, or a ring of samples when either frame has
    degenerate curvature); initial evidence is the feature agreement alone.
    """
    if not first_msg.use_state:
        raise ValueError("cannot initialize from a message flagged use_state=False")
    sensed_frame = first_msg.frame
    sensed_degen = _message_degenerate(first_msg)
    space = HypothesisSpace()
    for object_id in sorted(models):
        model = models[object_id]
        if len(model) == 0:
            continue
        feat_ev = feature_evidence_nodes(first_msg.features, model, config)
        locations, rotations, evidence = [], [], []
        for i in range(len(model)):
            node_frame = SurfaceFrame(model.normals[i], model.dirs_1[i], model.dirs_2[i])
            degenerate = sensed_degen or _node_degenerate(model, i)
            rots = align_frames(
                sensed_frame,
                node_frame,
                degenerate=degenerate,
                n_samples=config.n_degenerate_rotations,
            )
            for rot in rots:
                locations.append(model.locations[i])
                rotations.append(rot.matrix)
                evidence.append(feat_ev[i])
        space.per_object[object_id] = ObjectHypotheses(
            locations=np.asarray(locations, dtype=np.float64).reshape(-1, 3),
            rotations=np.asarray(rotations, dtype=np.float64).reshape(-1, 3, 3),
            evidence=np.asarray(evidence, dtype=np.float64),
        )
    space.lm_steps = 1
    return space


def update_evidence(
    space: HypothesisSpace,
    displacement: np.ndarray,
    msg: StateMessage,
    models: dict[str, ObjectModel],
    config: LMConfig,
) -> HypothesisSpace:
    """One movement step: displace every hypothesis, grade it against the model."""
    displacement = np.asarray(displacement, dtype=np.float64)
    if not np.all(np.isfinite(displacement)):
        raise ValueError("displacement must be finite")
    if not msg.use_state:
        raise ValueError("cannot update from a message flagged use_state=False")
    sensed_frame = msg.frame
    sensed_degen = _message_degenerate(msg)
    for object_id, hyp in space.per_object.items():
        if len(hyp) == 0:
            continue
        model = models[object_id]
        # body-frame displacement and sensed axes, expressed per hypothesis in
        # the model frame (rotations map model -> body, so transpose applies)
        search = hyp.locations + np.einsum("nji,j->ni", hyp.rotations, displacement)
        rot_normals = np.einsum("nji,j->ni", hyp.rotations, sensed_frame.point_normal)
        rot_dirs = np.einsum("nji,j->ni", hyp.rotations, sensed_frame.curvature_dir_1)
        feat_ev = feature_evidence_nodes(msg.features, model, config)
        deltas = kernels.evidence_deltas(
            search,
            rot_normals,
            rot_dirs,
            model.locations,
            model.normals,
            model.dirs_1,
            feat_ev,
            config.max_match_distance,
            not sensed_degen,
        )
        hyp.locations = search
        hyp.evidence = hyp.evidence + deltas
    space.lm_steps += 1
    if config.evidence_prune_gap is not None:
        _prune(space, config.evidence_prune_gap)
    return space


def _prune(space: HypothesisSpace, gap: float) -> None:
    evidences = space.object_evidence()
    if not evidences:
        return
    cutoff = max(evidences.values()) - gap
    for hyp in space.per_object.values():
        keep = hyp.evidence >= cutoff
        if keep.all() or not keep.any():
            continue
        hyp.locations = hyp.locations[keep]
        hyp.rotations = hyp.rotations[keep]
        hyp.evidence = hyp.evidence[keep]


def possible_matches(space: HypothesisSpace, config: LMConfig) -> set[str]:
    """Objects with positive evidence within the percent threshold of the best."""
    evidences = space.object_evidence()
    if not evidences:
        return set()
    global_max = max(evidences.values())
    cutoff = global_max * (1.0 - config.percent_threshold)
    return {oid for oid, ev in evidences.items() if ev > 0.0 and ev >= cutoff}


def most_likely_hypothesis(space: HypothesisSpace) -> Hypothesis:
    """Global evidence argmax; ties resolve to the first (object_id, index)."""
    best: Hypothesis | None = None
    for object_id in sorted(space.per_object):
        hyp = space.per_object[object_id]
        if len(hyp) == 0:
            continue
        i = int(np.argmax(hyp.evidence))
        ev = float(hyp.evidence[i])
        if best is None or ev > best.evidence:
            best = Hypothesis(
                object_id=object_id,
                location=hyp.locations[i].copy(),
                rotation=hyp.rotations[i].copy(),
                evidence=ev,
                index=i,
            )
    if best is None:
        raise EmptySpaceError("hypothesis space is empty")
    return best


def possible_poses(space: HypothesisSpace, object_id: str, config: LMConfig) -> list[Hypothesis]:
    """Threshold rule applied within one object's pose hypotheses."""
    hyp = space.per_object[object_id]
    if len(hyp) == 0:
        return []
    obj_max = float(hyp.evidence.max())
    cutoff = obj_max * (1.0 - config.percent_threshold)
    out = []
    for i in np.flatnonzero((hyp.evidence > 0.0) & (hyp.evidence >= cutoff)):
        out.append(
            Hypothesis(
                object_id=object_id,
                location=hyp.locations[i].copy(),
                rotation=hyp.rotations[i].copy(),
                evidence=float(hyp.evidence[i]),
                index=int(i),
            )
        )
    return out


def check_terminal(space: HypothesisSpace, step: int, config: LMConfig) -> TerminalResult:
    """Decide match / no_match / time_out / continue for the current step.

    Decisions (match or no_match) are only allowed after min_steps; a match
    additionally needs a unique possible object whose possible poses all
    agree with the most likely hypothesis within the pose tolerances.
    """
    if step >= config.max_steps:
        return TerminalResult("time_out")
    matches = possible_matches(space, config)
    if not matches:
        if step >= config.min_steps:
            return TerminalResult("no_match")
        return TerminalResult("continue")
    if step < config.min_steps or len(matches) != 1:
        return TerminalResult("continue")
    (object_id,) = matches
    mlh = most_likely_hypothesis(space)
    theta = np.radians(config.pose_rotation_tolerance_deg)
    for pose in possible_poses(space, object_id, config):
        if np.linalg.norm(pose.location - mlh.location) > config.pose_location_tolerance:
            return TerminalResult("continue")
        if rotation_angle_between(pose.rotation, mlh.rotation) > theta:
            return TerminalResult("continue")
    return TerminalResult("match", hypothesis=mlh)


def object_pose_from_hypothesis(hyp: Hypothesis, sensed_location: np.ndarray):
    """Body-frame pose of the model origin implied by a hypothesis.

    The hypothesis location is where the sensor is on the model right now,
    so the model origin sits at sensed - R . location.
    """
    translation = np.asarray(sensed_location, dtype=np.float64) - hyp.rotation @ hyp.location
    return translation, hyp.rotation


def lm_output(space: HypothesisSpace, msg: StateMessage, sender_id: str = "lm") -> StateMessage:
    """The LM's own CMP message: most likely object at its most likely pose."""
    mlh = most_likely_hypothesis(space)
    translation, rotation = object_pose_from_hypothesis(mlh, msg.location)
    evidences = space.object_evidence()
    second = max(
        (ev for oid, ev in evidences.items() if oid != mlh.object_id), default=0.0
    )
    if mlh.evidence > 0:
        confidence = float(np.clip((mlh.evidence - second) / abs(mlh.evidence), 0.0, 1.0))
    else:
        confidence = 0.0
    return StateMessage(
        location=translation,
        morph=rotation,
        features={
            "object_id": mlh.object_id,
            "evidence": np.array([mlh.evidence]),
        },
        confidence=confidence,
        use_state=True,
        sender_id=sender_id,
        sender_type="LM",
    )
