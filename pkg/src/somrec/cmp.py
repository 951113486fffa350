"""The common messaging protocol shared by every component.

One message type carries a feature at a pose: a body-frame location, a 3x3
orthonormal orientation (surface frame or object rotation, rows are the
three vectors), an open map of named feature vectors, a confidence, a
use/ignore flag, and sender identity. Goal states reuse the same shape.
Votes are a separate packet carrying per-object pose hypotheses.

The codec is line-oriented JSON with a fixed field order so that equal
messages encode to equal bytes and every float survives a round trip
bit-exactly (shortest-repr float serialization).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import SurfaceFrame

SENDER_TYPES = ("SM", "LM")


class CodecError(ValueError):
    """Malformed byte stream; `offset` is the byte position when known."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


@dataclass(frozen=True)
class StateMessage:
    """A feature at a pose, plus confidence and sender identity."""

    location: np.ndarray  # (3,) body frame
    morph: np.ndarray  # (3,3), rows orthonormal
    features: dict[str, np.ndarray] = field(default_factory=dict)
    confidence: float = 1.0
    use_state: bool = True
    sender_id: str = ""
    sender_type: str = "SM"

    def __post_init__(self):
        object.__setattr__(self, "location", np.asarray(self.location, dtype=np.float64))
        object.__setattr__(self, "morph", np.asarray(self.morph, dtype=np.float64))
        object.__setattr__(
            self,
            "features",
            {
                k: v if isinstance(v, str) else np.atleast_1d(np.asarray(v, dtype=np.float64))
                for k, v in self.features.items()
            },
        )

    @property
    def frame(self) -> SurfaceFrame:
        return SurfaceFrame.from_rows(self.morph)

    def feature(self, name: str) -> np.ndarray:
        return self.features[name]

    def __eq__(self, other) -> bool:
        if not isinstance(other, StateMessage):
            return NotImplemented
        return (
            np.array_equal(self.location, other.location)
            and np.array_equal(self.morph, other.morph)
            and self.features.keys() == other.features.keys()
            and all(_feature_equal(v, other.features[k]) for k, v in self.features.items())
            and self.confidence == other.confidence
            and self.use_state == other.use_state
            and self.sender_id == other.sender_id
            and self.sender_type == other.sender_type
        )


def _feature_equal(a, b) -> bool:
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    return np.array_equal(a, b)


class GoalState(StateMessage):
    """A StateMessage read as a target pose plus desired features."""


@dataclass(frozen=True)
class Vote:
    object_id: str
    location: np.ndarray  # model frame
    rotation: np.ndarray  # (3,3) model-to-body
    evidence: float  # scaled to [-1, 1]

    def __post_init__(self):
        object.__setattr__(self, "location", np.asarray(self.location, dtype=np.float64))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vote):
            return NotImplemented
        return (
            self.object_id == other.object_id
            and np.array_equal(self.location, other.location)
            and np.array_equal(self.rotation, other.rotation)
            and self.evidence == other.evidence
        )


@dataclass(frozen=True)
class VotePacket:
    sender_id: str
    sender_sensed_location: np.ndarray  # body frame
    votes: list[Vote] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(
            self,
            "sender_sensed_location",
            np.asarray(self.sender_sensed_location, dtype=np.float64),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, VotePacket):
            return NotImplemented
        return (
            self.sender_id == other.sender_id
            and np.array_equal(self.sender_sensed_location, other.sender_sensed_location)
            and self.votes == other.votes
        )


def validate(msg: StateMessage, atol: float = 1e-8) -> list[str]:
    """Every invariant violation in the message; empty means ok."""
    violations = []
    if msg.location.shape != (3,) or not np.all(np.isfinite(msg.location)):
        violations.append("location is not a finite 3-vector")
    if msg.morph.shape != (3, 3):
        violations.append("morphological features are not a 3x3 matrix")
    else:
        gram = msg.morph @ msg.morph.T
        if not np.allclose(gram, np.eye(3), atol=max(atol, 1e-6)):
            violations.append("frame not orthonormal")
    if not (0.0 <= msg.confidence <= 1.0):
        violations.append("confidence out of range")
    if not msg.sender_id:
        violations.append("sender_id is empty")
    if msg.sender_type not in SENDER_TYPES:
        violations.append(f"sender_type must be one of {SENDER_TYPES}")
    for name, vec in msg.features.items():
        if not isinstance(vec, str) and not np.all(np.isfinite(vec)):
            violations.append(f"feature {name!r} has non-finite values")
    return violations


def validate_vote_packet(packet: VotePacket) -> list[str]:
    violations = []
    if not packet.sender_id:
        violations.append("sender_id is empty")
    if packet.sender_sensed_location.shape != (3,):
        violations.append("sender_sensed_location is not a 3-vector")
    for i, v in enumerate(packet.votes):
        if not (-1.0 <= v.evidence <= 1.0):
            violations.append(f"vote {i} evidence out of [-1, 1]")
        if v.rotation.shape != (3, 3):
            violations.append(f"vote {i} rotation is not 3x3")
    return violations


def _floats(a: np.ndarray) -> list:
    return [float(x) for x in np.asarray(a).reshape(-1)]


def encode(msg) -> bytes:
    """One message or packet to one canonical JSON line (newline-terminated)."""
    if isinstance(msg, VotePacket):
        payload = {
            "type": "vote_packet",
            "sender_id": msg.sender_id,
            "sender_sensed_location": _floats(msg.sender_sensed_location),
            "votes": [
                {
                    "object_id": v.object_id,
                    "location": _floats(v.location),
                    "rotation": [_floats(row) for row in v.rotation],
                    "evidence": float(v.evidence),
                }
                for v in msg.votes
            ],
        }
    elif isinstance(msg, StateMessage):
        payload = {
            "type": "goal_state" if isinstance(msg, GoalState) else "state",
            "location": _floats(msg.location),
            "morph": [_floats(row) for row in msg.morph],
            "features": {
                k: (v if isinstance(v, str) else _floats(v))
                for k, v in sorted(msg.features.items())
            },
            "confidence": float(msg.confidence),
            "use_state": bool(msg.use_state),
            "sender_id": msg.sender_id,
            "sender_type": msg.sender_type,
        }
    else:
        raise TypeError(f"cannot encode {type(msg).__name__}")
    return (json.dumps(payload, separators=(",", ":")) + "\n").encode("utf-8")


def _shaped(value, shape, what: str) -> np.ndarray:
    a = np.asarray(value, dtype=np.float64)
    if a.shape != shape:
        raise CodecError(f"{what}: expected shape {shape}, got {a.shape}")
    return a


def decode(data: bytes):
    """Inverse of encode; raises CodecError with a byte offset on bad input."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise CodecError(f"invalid utf-8: {e}", offset=e.start) from e
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise CodecError(f"invalid JSON: {e.msg}", offset=e.pos) from e
    if not isinstance(payload, dict) or "type" not in payload:
        raise CodecError("missing message type")
    kind = payload["type"]
    try:
        if kind == "vote_packet":
            return VotePacket(
                sender_id=payload["sender_id"],
                sender_sensed_location=_shaped(
                    payload["sender_sensed_location"], (3,), "sender_sensed_location"
                ),
                votes=[
                    Vote(
                        object_id=v["object_id"],
                        location=_shaped(v["location"], (3,), "vote location"),
                        rotation=_shaped(v["rotation"], (3, 3), "vote rotation"),
                        evidence=float(v["evidence"]),
                    )
                    for v in payload["votes"]
                ],
            )
        if kind in ("state", "goal_state"):
            cls = GoalState if kind == "goal_state" else StateMessage
            return cls(
                location=_shaped(payload["location"], (3,), "location"),
                morph=_shaped(payload["morph"], (3, 3), "morph"),
                features={
                    k: v if isinstance(v, str) else np.asarray(v, dtype=np.float64)
                    for k, v in payload["features"].items()
                },
                confidence=float(payload["confidence"]),
                use_state=bool(payload["use_state"]),
                sender_id=payload["sender_id"],
                sender_type=payload["sender_type"],
            )
    except KeyError as e:
        raise CodecError(f"missing field {e.args[0]!r}") from e
    raise CodecError(f"unknown message type {kind!r}")
