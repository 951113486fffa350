"""Episode-scoped short-term memory: every message plus the action that led to it."""

from __future__ import annotations

from dataclasses import dataclass

from ..cmp import StateMessage

MATCHING = "matching"
EXPLORATION = "exploration"


@dataclass(frozen=True)
class BufferEntry:
    message: StateMessage
    action_taken: object  # the Action that produced this observation, or None
    phase: str = MATCHING


class Buffer:
    """Ordered observation log, cleared at the start of every episode."""

    def __init__(self):
        self.entries: list[BufferEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def clear(self) -> None:
        self.entries = []

    def append(self, message: StateMessage, action_taken=None, phase: str = MATCHING) -> None:
        self.entries.append(BufferEntry(message, action_taken, phase))

    def used_entries(self, phase: str | None = None) -> list[BufferEntry]:
        return [
            e
            for e in self.entries
            if e.message.use_state and (phase is None or e.phase == phase)
        ]

    def last_used_location(self, phase: str | None = None):
        used = self.used_entries(phase)
        return used[-1].message.location if used else None
