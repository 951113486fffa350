"""Whole-system state save/load: models, mapping lists, and configs."""

from __future__ import annotations

import json

from ..learning.module import LearningModule
from .config import ExperimentConfig
from .runner import MontySystem

FORMAT_VERSION = 1


class StateFormatError(ValueError):
    """State file is missing fields or has the wrong version."""


def state_to_dict(system: MontySystem) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config": system.config.to_dict(),
        "lms": {lm_id: lm.to_dict() for lm_id, lm in sorted(system.lms.items())},
    }


def save_state(system: MontySystem, path) -> None:
    payload = json.dumps(state_to_dict(system), sort_keys=True, separators=(",", ":"))
    with open(path, "w") as fh:
        fh.write(payload)


def load_state(path, config: ExperimentConfig | None = None) -> MontySystem:
    """Rebuild a system from a state file; `config` overrides the stored one
    (so a saved memory can be evaluated under different run settings)."""
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as e:
            raise StateFormatError(f"not a valid state file: {e.msg}") from e
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise StateFormatError("unsupported or missing state format version")
    for key in ("config", "lms"):
        if key not in payload:
            raise StateFormatError(f"state file is missing {key!r}")
    stored_config = ExperimentConfig.from_dict(payload["config"])
    system = MontySystem(config or stored_config)
    loaded = {lm_id: LearningModule.from_dict(d) for lm_id, d in payload["lms"].items()}
    for lm_id, lm in loaded.items():
        if lm_id in system.lms:
            lm.config = system.lms[lm_id].config
            system.lms[lm_id] = lm
    # a single saved memory can also seed a wider multi-LM evaluation
    if len(loaded) == 1 and len(system.lms) > 1:
        (only,) = loaded.values()
        for lm_id in system.lms:
            clone = LearningModule.from_dict(only.to_dict())
            clone.lm_id = lm_id
            clone.config = system.lms[lm_id].config
            system.lms[lm_id] = clone
    return system
