"""Graph object models: nodes with surface frames and features, spatially indexed.

Node data is stored as parallel arrays (the evidence kernel consumes them
directly); `GraphNode` is the per-node view. Deduplication keeps the graph
sparse where the surface is boring: a candidate within `dedup_distance` of
an existing node is dropped unless one of its compared features differs by
more than its tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import SurfaceFrame


@dataclass(frozen=True)
class GraphNode:
    location: np.ndarray
    frame: SurfaceFrame
    features: dict[str, np.ndarray]


class ObjectModel:
    """Long-term memory for one object, in its own reference frame."""

    def __init__(self, object_id: str):
        self.object_id = object_id
        self.locations = np.empty((0, 3))
        self.normals = np.empty((0, 3))
        self.dirs_1 = np.empty((0, 3))
        self.dirs_2 = np.empty((0, 3))
        self.features: dict[str, np.ndarray] = {}
        self.edges: list[tuple[int, int]] = []
        self._tree: cKDTree | None = None

    def __len__(self) -> int:
        return self.locations.shape[0]

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.locations)
        return self._tree

    def node(self, i: int) -> GraphNode:
        return GraphNode(
            location=self.locations[i],
            frame=SurfaceFrame(self.normals[i], self.dirs_1[i], self.dirs_2[i]),
            features={k: v[i] for k, v in self.features.items()},
        )

    def nodes(self):
        return [self.node(i) for i in range(len(self))]

    def neighbors_within(self, point: np.ndarray, radius: float) -> list[int]:
        if len(self) == 0:
            return []
        return sorted(self.tree.query_ball_point(point, radius))

    def _append(self, location, frame: SurfaceFrame, features: dict) -> int:
        self.locations = np.vstack([self.locations, np.asarray(location, dtype=np.float64)])
        self.normals = np.vstack([self.normals, frame.point_normal])
        self.dirs_1 = np.vstack([self.dirs_1, frame.curvature_dir_1])
        self.dirs_2 = np.vstack([self.dirs_2, frame.curvature_dir_2])
        n = len(self)
        for name, value in features.items():
            value = np.atleast_1d(np.asarray(value, dtype=np.float64))
            if name not in self.features:
                self.features[name] = np.zeros((n - 1, value.shape[0]))
            self.features[name] = np.vstack([self.features[name], value])
        for name in self.features:
            if self.features[name].shape[0] < n:  # feature absent on this node
                pad = np.zeros((n - self.features[name].shape[0], self.features[name].shape[1]))
                self.features[name] = np.vstack([self.features[name], pad])
        self._tree = None
        return n - 1

    def is_duplicate(self, location, features: dict, dedup_distance: float,
                     tolerances: dict) -> bool:
        """True if an existing node is nearby with all compared features similar."""
        if len(self) == 0:
            return False
        close = self.tree.query_ball_point(np.asarray(location, dtype=np.float64), dedup_distance)
        for idx in close:
            similar = True
            for name, tol in tolerances.items():
                if name not in features or name not in self.features:
                    continue
                sensed = np.atleast_1d(np.asarray(features[name], dtype=np.float64))
                if np.linalg.norm(sensed - self.features[name][idx]) >= tol:
                    similar = False
                    break
            if similar:
                return True
        return False

    def try_insert(self, location, frame: SurfaceFrame, features: dict,
                   dedup_distance: float, tolerances: dict) -> int | None:
        """Dedup-checked insert; returns the new node index or None."""
        if self.is_duplicate(location, features, dedup_distance, tolerances):
            return None
        return self._append(location, frame, features)

    def add_edge(self, i: int, j: int) -> None:
        self.edges.append((i, j))

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "locations": self.locations.tolist(),
            "normals": self.normals.tolist(),
            "dirs_1": self.dirs_1.tolist(),
            "dirs_2": self.dirs_2.tolist(),
            "features": {k: v.tolist() for k, v in self.features.items()},
            "edges": [list(e) for e in self.edges],
        }

    @staticmethod
    def from_dict(d: dict) -> "ObjectModel":
        model = ObjectModel(d["object_id"])
        model.locations = np.asarray(d["locations"], dtype=np.float64).reshape(-1, 3)
        model.normals = np.asarray(d["normals"], dtype=np.float64).reshape(-1, 3)
        model.dirs_1 = np.asarray(d["dirs_1"], dtype=np.float64).reshape(-1, 3)
        model.dirs_2 = np.asarray(d["dirs_2"], dtype=np.float64).reshape(-1, 3)
        model.features = {
            k: np.asarray(v, dtype=np.float64).reshape(len(model.locations), -1)
            for k, v in d["features"].items()
        }
        model.edges = [tuple(e) for e in d["edges"]]
        return model
