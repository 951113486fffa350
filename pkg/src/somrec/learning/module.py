"""The learning module: buffer + graph memory + hypothesis space, per episode.

Ground-truth labels are never used as a learning signal; the module keeps
two mapping lists (model -> labels seen, label -> models touched) purely so
the harness can score unsupervised runs afterwards.
"""

from __future__ import annotations

import json

import numpy as np

from ..cmp import StateMessage
from ..geometry import displacement_between
from .buffer import EXPLORATION, MATCHING, Buffer
from .config import LMConfig
from .evidence import (
    HypothesisSpace,
    TerminalResult,
    check_terminal,
    init_hypotheses,
    lm_output,
    update_evidence,
)
from .graph_build import build_graph, update_graph
from .model import ObjectModel


class LearningModule:
    def __init__(self, lm_id: str, config: LMConfig | None = None):
        self.lm_id = lm_id
        self.config = config or LMConfig()
        self.memory: dict[str, ObjectModel] = {}
        self.model_to_gt: dict[str, list[str]] = {}
        self.gt_to_model: dict[str, list[str]] = {}
        self._next_model_index = 0
        self.buffer = Buffer()
        self.space: HypothesisSpace | None = None
        self.terminal = TerminalResult("continue")
        self._prev_used_location: np.ndarray | None = None
        self.last_goal_step = -(10**9)

    @property
    def lm_steps(self) -> int:
        return self.space.lm_steps if self.space is not None else 0

    def reset_episode(self) -> None:
        self.buffer.clear()
        self.space = None
        self.terminal = TerminalResult("continue")
        self._prev_used_location = None
        self.last_goal_step = -(10**9)

    def observe(self, msg: StateMessage, action_taken=None, phase: str = MATCHING) -> bool:
        """Buffer the message; run one matching step if it is usable. Returns
        whether an LM step happened."""
        self.buffer.append(msg, action_taken, phase)
        if not msg.use_state:
            return False
        if phase == EXPLORATION:
            return False
        if self.space is None:
            self.space = init_hypotheses(self.memory, msg, self.config)
        else:
            disp = displacement_between(self._prev_used_location, msg.location)
            update_evidence(self.space, disp, msg, self.memory, self.config)
        self._prev_used_location = msg.location
        return True

    def check_terminal(self) -> TerminalResult:
        if self.space is None:
            return TerminalResult("continue")
        self.terminal = check_terminal(self.space, self.lm_steps, self.config)
        return self.terminal

    def force_time_out(self) -> None:
        self.terminal = TerminalResult("time_out")

    def output(self, msg: StateMessage) -> StateMessage:
        return lm_output(self.space, msg, sender_id=self.lm_id)

    def new_model_id(self) -> str:
        model_id = f"new_object_{self._next_model_index}"
        self._next_model_index += 1
        return model_id

    def finalize_training(self, gt_label: str) -> str | None:
        """End-of-episode learning: extend the matched model or store a new one."""
        if self.terminal.kind == "match":
            hyp = self.terminal.hypothesis
            update_graph(self.memory[hyp.object_id], self.buffer, hyp, self.config)
            self._record_mapping(hyp.object_id, gt_label)
            return hyp.object_id
        if self.terminal.kind == "no_match":
            if not self.buffer.used_entries():
                return None
            model_id = self.new_model_id()
            self.memory[model_id] = build_graph(self.buffer, self.config, model_id)
            self._record_mapping(model_id, gt_label)
            return model_id
        return None  # time_out: nothing trustworthy to learn from

    def _record_mapping(self, model_id: str, gt_label: str) -> None:
        self.model_to_gt.setdefault(model_id, []).append(gt_label)
        self.gt_to_model.setdefault(gt_label, []).append(model_id)

    def majority_label(self, model_id: str) -> str | None:
        labels = self.model_to_gt.get(model_id)
        if not labels:
            return None
        counts: dict[str, int] = {}
        for label in labels:
            counts[label] = counts.get(label, 0) + 1
        return max(sorted(counts), key=lambda k: counts[k])

    # persistence: one JSON document per LM

    def to_dict(self) -> dict:
        return {
            "lm_id": self.lm_id,
            "config": self.config.to_dict(),
            "models": {oid: m.to_dict() for oid, m in sorted(self.memory.items())},
            "model_to_gt": self.model_to_gt,
            "gt_to_model": self.gt_to_model,
            "next_model_index": self._next_model_index,
        }

    @staticmethod
    def from_dict(d: dict) -> "LearningModule":
        lm = LearningModule(d["lm_id"], LMConfig.from_dict(d["config"]))
        lm.memory = {oid: ObjectModel.from_dict(m) for oid, m in d["models"].items()}
        lm.model_to_gt = {k: list(v) for k, v in d["model_to_gt"].items()}
        lm.gt_to_model = {k: list(v) for k, v in d["gt_to_model"].items()}
        lm._next_model_index = d["next_model_index"]
        return lm

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @staticmethod
    def load(path) -> "LearningModule":
        with open(path) as fh:
            return LearningModule.from_dict(json.load(fh))
