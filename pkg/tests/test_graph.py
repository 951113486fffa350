import numpy as np
import pytest

from somrec.cmp import StateMessage
from somrec.geometry import Rotation, SurfaceFrame
from somrec.learning import (
    Buffer,
    Hypothesis,
    LMConfig,
    build_graph,
    update_graph,
)
from somrec.learning.buffer import EXPLORATION, MATCHING
from somrec.learning.graph_build import EmptyBufferError

from oracles import random_rotation_matrix


def obs_message(location, frame_rows=None, rgba=(1, 0, 0, 1), curvatures=(5.0, 0.0)):
    return StateMessage(
        location=location,
        morph=np.eye(3) if frame_rows is None else frame_rows,
        features={
            "rgba": np.asarray(rgba, dtype=np.float64),
            "curvatures": np.asarray(curvatures, dtype=np.float64),
            "degenerate": np.array([0.0]),
        },
        sender_id="sm_0",
    )


class TestBuildGraph:
    def test_total_dedup_single_node(self):
        buffer = Buffer()
        for _ in range(100):
            buffer.append(obs_message([0.01, 0.02, 0.03]))
        model = build_graph(buffer, LMConfig(), "obj_0")
        assert len(model) == 1

    def test_spaced_grid_keeps_every_observation(self):
        config = LMConfig(dedup_distance=0.005)
        buffer = Buffer()
        count = 0
        for i in range(4):
            for j in range(4):
                buffer.append(obs_message([i * 0.01, j * 0.01, 0.0]))
                count += 1
        model = build_graph(buffer, config, "obj_0")
        assert len(model) == count

    def test_feature_change_defeats_dedup(self):
        config = LMConfig()
        buffer = Buffer()
        buffer.append(obs_message([0, 0, 0], rgba=(1, 0, 0, 1)))
        buffer.append(obs_message([0.001, 0, 0], rgba=(0, 0, 1, 1)))  # color jump
        buffer.append(obs_message([0.002, 0, 0], rgba=(0, 0, 1, 1)))  # same color, close
        model = build_graph(buffer, config, "obj_0")
        assert len(model) == 2

    def test_gated_messages_excluded(self):
        buffer = Buffer()
        buffer.append(obs_message([0, 0, 0]))
        gated = StateMessage(
            location=[1, 1, 1], morph=np.eye(3), use_state=False, sender_id="sm_0"
        )
        buffer.append(gated)
        model = build_graph(buffer, LMConfig(), "obj_0")
        assert len(model) == 1

    def test_empty_buffer_raises(self):
        with pytest.raises(EmptyBufferError):
            build_graph(Buffer(), LMConfig(), "obj_0")

    def test_edges_chain_consecutive_nodes(self):
        buffer = Buffer()
        for i in range(3):
            buffer.append(obs_message([i * 0.02, 0, 0]))
        model = build_graph(buffer, LMConfig(), "obj_0")
        assert model.edges == [(0, 1), (1, 2)]

    def test_denser_nodes_where_features_change(self):
        # a line scan crossing a color boundary stores more nodes per length
        # near the boundary than inside the uniform halves
        config = LMConfig(dedup_distance=0.01)
        buffer = Buffer()
        for i in range(100):
            x = i * 0.001  # 1 mm steps along 10 cm
            color = (1, 0, 0, 1) if x < 0.05 else (0, 0, 1, 1)
            buffer.append(obs_message([x, 0, 0], rgba=color))
        model = build_graph(buffer, config, "obj_0")
        xs = np.sort(model.locations[:, 0])
        # boundary region keeps the two nodes on either side of the color jump
        boundary = np.abs(xs - 0.05) < 0.011
        assert boundary.sum() >= 2
        gaps = np.diff(xs)
        assert gaps.min() < config.dedup_distance  # dense at the boundary


class TestUpdateGraph:
    def learned_model(self, rng, n=8):
        buffer = Buffer()
        for i in range(n):
            buffer.append(obs_message([i * 0.02, 0, 0]))
        return build_graph(buffer, LMConfig(), "obj_0"), buffer

    def test_relearning_identity_pose_adds_nothing(self):
        rng = np.random.default_rng(0)
        model, buffer = self.learned_model(rng)
        n_before = len(model)
        hyp = Hypothesis(
            object_id="obj_0",
            location=model.locations[-1].copy(),  # sensor ended at the last node
            rotation=np.eye(3),
            evidence=5.0,
            index=0,
        )
        update_graph(model, buffer, hyp, LMConfig())
        assert len(model) == n_before

    def test_new_views_strictly_increase_nodes(self):
        rng = np.random.default_rng(1)
        model, _ = self.learned_model(rng)
        n_before = len(model)
        buffer = Buffer()
        buffer.append(obs_message([0.0, 0, 0]))  # matching phase anchor
        for i in range(5):
            buffer.append(obs_message([0.0, (i + 1) * 0.02, 0]), phase=EXPLORATION)
        hyp = Hypothesis(
            object_id="obj_0", location=np.zeros(3), rotation=np.eye(3), evidence=5.0, index=0
        )
        update_graph(model, buffer, hyp, LMConfig())
        assert len(model) > n_before

    def test_rotated_views_land_on_model_surface(self):
        # observations taken under a known object rotation R are carried back
        # into model coordinates by the detected pose
        rng = np.random.default_rng(2)
        model, _ = self.learned_model(rng)
        rot = Rotation.from_axis_angle([0, 0, 1], np.pi / 2)
        model_points = [np.array([i * 0.02, 0.0, 0.0]) for i in range(8)]
        buffer = Buffer()
        for p in model_points:
            body = rot.apply(p)
            rows = rot.matrix  # columns of identity frame rotated; rows for message
            frame = SurfaceFrame(
                rot.apply([1.0, 0, 0]), rot.apply([0, 1.0, 0]), rot.apply([0, 0, 1.0])
            )
            buffer.append(obs_message(body, frame_rows=frame.as_matrix()))
        hyp = Hypothesis(
            object_id="obj_0",
            location=model_points[-1].copy(),
            rotation=rot.matrix,
            evidence=5.0,
            index=0,
        )
        n_before = len(model)
        update_graph(model, buffer, hyp, LMConfig())
        # every transformed observation coincides with an existing node
        assert len(model) == n_before

    def test_wrong_object_rejected(self):
        rng = np.random.default_rng(3)
        model, buffer = self.learned_model(rng)
        hyp = Hypothesis(
            object_id="other", location=np.zeros(3), rotation=np.eye(3), evidence=1.0, index=0
        )
        with pytest.raises(ValueError):
            update_graph(model, buffer, hyp, LMConfig())

    def test_dedup_invariant_holds_after_update(self):
        rng = np.random.default_rng(4)
        config = LMConfig()
        model, buffer = self.learned_model(rng)
        buffer2 = Buffer()
        buffer2.append(obs_message([0.0, 0, 0]))
        for _ in range(30):
            buffer2.append(
                obs_message(rng.uniform(-0.05, 0.05, size=3)), phase=EXPLORATION
            )
        hyp = Hypothesis(
            object_id="obj_0", location=np.zeros(3), rotation=np.eye(3), evidence=5.0, index=0
        )
        update_graph(model, buffer2, hyp, config)
        # no two nodes violate the dedup rule
        for i in range(len(model)):
            for j in range(i + 1, len(model)):
                if np.linalg.norm(model.locations[i] - model.locations[j]) < config.dedup_distance:
                    similar = all(
                        np.linalg.norm(model.features[name][i] - model.features[name][j]) < tol
                        for name, tol in config.feature_tolerances.items()
                        if name in model.features
                    )
                    assert not similar
