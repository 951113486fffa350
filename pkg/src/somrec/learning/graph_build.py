"""Turning buffered observations into graph memory.

New models keep the body-frame coordinates of the learning episode as their
reference frame (no re-centering): models learned together then share a
frame, which is what lateral voting relies on. Updates to an existing model
first carry each observation through the inverse of the detected object
pose so it lands in that model's frame.
"""

from __future__ import annotations

import numpy as np

from ..geometry import SurfaceFrame
from .buffer import MATCHING, Buffer
from .config import LMConfig
from .evidence import Hypothesis, object_pose_from_hypothesis
from .model import ObjectModel


class EmptyBufferError(ValueError):
    """Graph building needs at least one usable observation."""


def _insert_sequence(model: ObjectModel, observations, config: LMConfig) -> int:
    """Dedup-insert observations in order, chaining edges between survivors."""
    inserted = 0
    prev_index: int | None = None
    for location, frame, features in observations:
        idx = model.try_insert(
            location, frame, features, config.dedup_distance, config.feature_tolerances
        )
        if idx is None:
            continue
        inserted += 1
        if prev_index is not None:
            model.add_edge(prev_index, idx)
        prev_index = idx
    return inserted


def build_graph(buffer: Buffer, config: LMConfig, object_id: str) -> ObjectModel:
    """New model from this episode's used observations, in body-frame coordinates."""
    used = buffer.used_entries()
    if not used:
        raise EmptyBufferError("no usable observations in the buffer")
    model = ObjectModel(object_id)
    observations = (
        (e.message.location, e.message.frame, _numeric_features(e.message)) for e in used
    )
    _insert_sequence(model, observations, config)
    return model


def update_graph(
    model: ObjectModel, buffer: Buffer, detected_pose: Hypothesis, config: LMConfig
) -> ObjectModel:
    """Fold this episode's observations into an existing model.

    The detected pose anchors the transform: the hypothesis location is
    where the sensor was (in model coordinates) at the last matching-phase
    observation, which pins down where the model origin sits in the body
    frame. Every buffered observation is carried through the inverse of
    that pose before the usual dedup insert.
    """
    if detected_pose.object_id != model.object_id:
        raise ValueError(
            f"detected pose is for {detected_pose.object_id!r}, not {model.object_id!r}"
        )
    anchor = buffer.last_used_location(MATCHING)
    if anchor is None:
        raise EmptyBufferError("no matching-phase observation to anchor the object pose")
    translation, rotation = object_pose_from_hypothesis(detected_pose, anchor)
    inv = rotation.T

    def transformed():
        for e in buffer.used_entries():
            msg = e.message
            loc = inv @ (msg.location - translation)
            frame = SurfaceFrame(
                inv @ msg.frame.point_normal,
                inv @ msg.frame.curvature_dir_1,
                inv @ msg.frame.curvature_dir_2,
            )
            yield loc, frame, _numeric_features(msg)

    _insert_sequence(model, transformed(), config)
    return model


def _numeric_features(msg) -> dict[str, np.ndarray]:
    return {k: v for k, v in msg.features.items() if not isinstance(v, str)}
