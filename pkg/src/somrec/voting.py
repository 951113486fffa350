"""Lateral consensus between learning modules.

A vote is a pose hypothesis with its evidence rescaled to [-1, 1] so that
modules with longer histories do not dominate. Votes travel between modules
by shifting each hypothesis location through the displacement between the
two senders' currently sensed points (rotated into the model frame by the
hypothesis's own rotation); model frames are shared, so rotations pass
through untouched. Receivers add the distance-weighted average of the
agreeing votes near each of their own hypotheses.
"""

from __future__ import annotations

import numpy as np

from .cmp import Vote, VotePacket
from .learning.config import LMConfig
from .learning.evidence import HypothesisSpace

_PAIR_BUDGET = 2_000_000


def emit_vote(
    space: HypothesisSpace, sensed_location, top_fraction: float = 0.5, sender_id: str = "lm"
) -> VotePacket:
    """Scale evidences to [-1, 1] and keep only the strongest fraction."""
    if not (0.0 < top_fraction <= 1.0):
        raise ValueError("top_fraction must be in (0, 1]")
    rows = []
    for object_id in sorted(space.per_object):
        hyp = space.per_object[object_id]
        for i in range(len(hyp)):
            rows.append((object_id, i))
    if not rows:
        raise ValueError("cannot vote from an empty hypothesis space")
    evidence = np.array(
        [space.per_object[oid].evidence[i] for oid, i in rows], dtype=np.float64
    )
    lo, hi = float(evidence.min()), float(evidence.max())
    if hi - lo < 1e-15:
        scaled = np.zeros_like(evidence)
    else:
        scaled = 2.0 * (evidence - lo) / (hi - lo) - 1.0
    keep = max(1, int(np.ceil(top_fraction * len(rows))))
    order = np.argsort(-evidence, kind="stable")[:keep]
    votes = []
    for idx in order:
        object_id, i = rows[idx]
        hyp = space.per_object[object_id]
        votes.append(
            Vote(
                object_id=object_id,
                location=hyp.locations[i].copy(),
                rotation=hyp.rotations[i].copy(),
                evidence=float(scaled[idx]),
            )
        )
    return VotePacket(
        sender_id=sender_id,
        sender_sensed_location=np.asarray(sensed_location, dtype=np.float64),
        votes=votes,
    )


def transform_votes(packet: VotePacket, receiver_sensed_location) -> list[Vote]:
    """Carry votes across the sensor displacement into the receiver's frame."""
    delta = np.asarray(receiver_sensed_location, dtype=np.float64) - packet.sender_sensed_location
    out = []
    for vote in packet.votes:
        shifted = vote.location + vote.rotation.T @ delta
        out.append(Vote(vote.object_id, shifted, vote.rotation, vote.evidence))
    return out


def integrate_votes(
    space: HypothesisSpace, votes: list[Vote], config: LMConfig
) -> HypothesisSpace:
    """Add the distance-weighted average of nearby, pose-consistent votes."""
    by_object: dict[str, list[Vote]] = {}
    for vote in votes:
        by_object.setdefault(vote.object_id, []).append(vote)
    radius = config.vote_radius
    cos_gate = np.cos(np.radians(config.vote_rotation_tolerance_deg))
    for object_id, hyp in space.per_object.items():
        group = by_object.get(object_id)
        if not group or len(hyp) == 0:
            continue
        v_locs = np.stack([v.location for v in group])
        v_rots = np.stack([v.rotation for v in group])
        v_vals = np.array([v.evidence for v in group])
        chunk = max(1, _PAIR_BUDGET // len(group))
        for s in range(0, len(hyp), chunk):
            e = min(s + chunk, len(hyp))
            d = np.linalg.norm(hyp.locations[s:e, None, :] - v_locs[None, :, :], axis=2)
            # cos of geodesic angle via the trace of R_h^T R_v
            tr = np.einsum("nij,vij->nv", hyp.rotations[s:e], v_rots)
            cos_angle = (tr - 1.0) / 2.0
            mask = (d <= radius) & (cos_angle >= cos_gate)
            w = np.where(mask, 1.0 - d / radius, 0.0)
            w_sum = w.sum(axis=1)
            contrib = np.where(w_sum > 0, (w @ v_vals) / np.where(w_sum > 0, w_sum, 1.0), 0.0)
            hyp.evidence[s:e] += contrib
    return space
