"""Scoring episode results against the ground truth the LMs never saw."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Metrics:
    n_episodes: int
    n_match: int
    n_no_match: int
    n_time_out: int
    accuracy: float  # over match terminals: detected label == ground truth
    mlh_accuracy: float  # over all episodes with any detection
    mean_rotation_error_deg: float | None
    median_rotation_error_deg: float | None
    mean_steps: float
    confusion: dict = field(default_factory=dict)  # (gt, detected) -> count

    def summary_lines(self) -> list:
        lines = [
            f"episodes: {self.n_episodes} "
            f"(match {self.n_match}, no_match {self.n_no_match}, time_out {self.n_time_out})",
            f"accuracy (matches): {self.accuracy:.3f}",
            f"accuracy (best guess, all episodes): {self.mlh_accuracy:.3f}",
            f"mean steps: {self.mean_steps:.1f}",
        ]
        if self.median_rotation_error_deg is not None:
            lines.append(
                "rotation error (deg): "
                f"mean {self.mean_rotation_error_deg:.2f}, "
                f"median {self.median_rotation_error_deg:.2f}"
            )
        return lines


def compute_metrics(results) -> Metrics:
    if not results:
        raise ValueError("no results to score")
    n_match = sum(1 for r in results if r.terminal == "match")
    n_no_match = sum(1 for r in results if r.terminal == "no_match")
    n_time_out = sum(1 for r in results if r.terminal == "time_out")

    matches = [r for r in results if r.terminal == "match"]
    correct = sum(1 for r in matches if r.detected_label == r.object_label)
    accuracy = correct / len(matches) if matches else 0.0

    detected = [r for r in results if r.detected_label is not None]
    mlh_correct = sum(1 for r in detected if r.detected_label == r.object_label)
    mlh_accuracy = mlh_correct / len(detected) if detected else 0.0

    errors = [r.rotation_error_deg for r in matches if r.rotation_error_deg is not None]
    mean_err = float(np.mean(errors)) if errors else None
    median_err = float(np.median(errors)) if errors else None

    confusion: dict = {}
    for r in results:
        key = (r.object_label, r.detected_label or "<none>")
        confusion[key] = confusion.get(key, 0) + 1

    return Metrics(
        n_episodes=len(results),
        n_match=n_match,
        n_no_match=n_no_match,
        n_time_out=n_time_out,
        accuracy=accuracy,
        mlh_accuracy=mlh_accuracy,
        mean_rotation_error_deg=mean_err,
        median_rotation_error_deg=median_err,
        mean_steps=float(np.mean([r.steps for r in results])),
        confusion=confusion,
    )


CSV_FIELDS = [
    "episode",
    "object",
    "terminal",
    "steps",
    "lm_steps",
    "detected_object",
    "detected_label",
    "rotation_error_deg",
]


def write_results_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in results:
            writer.writerow(r.csv_row())


def write_traces_jsonl(results, path) -> None:
    with open(path, "w") as fh:
        for r in results:
            for step, evidences in enumerate(r.evidence_trace):
                fh.write(
                    json.dumps(
                        {
                            "episode": r.episode,
                            "step": step,
                            "object_evidence": {k: float(v) for k, v in evidences.items()},
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )
