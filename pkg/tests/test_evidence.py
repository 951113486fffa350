import numpy as np
import pytest

from somrec.cmp import StateMessage
from somrec.geometry import Rotation, SurfaceFrame
from somrec.learning import (
    LMConfig,
    ObjectModel,
    UnknownFeatureError,
    feature_evidence,
    init_hypotheses,
    morphology_evidence,
    update_evidence,
)
from somrec.learning.evidence import _message_degenerate  # noqa: F401  (sanity import)
from somrec.learning.model import GraphNode

from oracles import oracle_replay, random_model, random_rotation_matrix


def msg_from(location, frame_matrix, rgba=(1, 0, 0, 1), curvatures=(10.0, 0.0), degenerate=False):
    return StateMessage(
        location=location,
        morph=frame_matrix,
        features={
            "rgba": np.asarray(rgba, dtype=np.float64),
            "curvatures": np.asarray(curvatures, dtype=np.float64),
            "degenerate": np.array([1.0 if degenerate else 0.0]),
        },
        sender_id="sm_0",
    )


def frame_matrix(rng):
    return random_rotation_matrix(rng).T  # rows orthonormal


class TestFeatureEvidence:
    def test_identical_features_give_one(self):
        config = LMConfig()
        sensed = {"rgba": np.array([1, 0, 0, 1.0]), "curvatures": np.array([5.0, 1.0])}
        assert feature_evidence(sensed, sensed, config) == pytest.approx(1.0)

    def test_all_beyond_tolerance_give_zero(self):
        config = LMConfig(
            feature_tolerances={"rgba": 0.1, "curvatures": 1.0},
            feature_weights={"rgba": 0.5, "curvatures": 0.5},
        )
        sensed = {"rgba": np.array([1, 0, 0, 1.0]), "curvatures": np.array([5.0, 1.0])}
        stored = {"rgba": np.array([0, 1, 0, 1.0]), "curvatures": np.array([-5.0, 1.0])}
        assert feature_evidence(sensed, stored, config) == 0.0

    def test_half_tolerance_single_feature(self):
        # two equally weighted features, one exact, one at half tolerance
        config = LMConfig(
            feature_tolerances={"a": 1.0, "b": 1.0},
            feature_weights={"a": 0.5, "b": 0.5},
        )
        sensed = {"a": np.array([0.0]), "b": np.array([0.0])}
        stored = {"a": np.array([0.0]), "b": np.array([0.5])}
        assert feature_evidence(sensed, stored, config) == pytest.approx(0.75)

    def test_unknown_feature_raises(self):
        config = LMConfig()
        with pytest.raises(UnknownFeatureError):
            feature_evidence({"rgba": np.zeros(4)}, {"rgba": np.zeros(4)}, config)

    def test_never_negative(self):
        rng = np.random.default_rng(0)
        config = LMConfig()
        for _ in range(200):
            sensed = {"rgba": rng.normal(size=4), "curvatures": rng.normal(size=2) * 50}
            stored = {"rgba": rng.normal(size=4), "curvatures": rng.normal(size=2) * 50}
            ev = feature_evidence(sensed, stored, config)
            assert 0.0 <= ev <= 1.0


class TestMorphologyEvidence:
    def node_with_frame(self, frame):
        return GraphNode(location=np.zeros(3), frame=frame, features={})

    def test_perfect_alignment(self):
        f = SurfaceFrame(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
        assert morphology_evidence(f, self.node_with_frame(f)) == pytest.approx(1.0)

    def test_opposite_alignment(self):
        a = SurfaceFrame(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
        # normal flipped (180 deg), curvature dir at 90 deg
        b = SurfaceFrame(np.array([0, 0, -1.0]), np.array([0, 1.0, 0]), np.array([1.0, 0, 0]))
        assert morphology_evidence(a, self.node_with_frame(b)) == pytest.approx(-1.0)

    def test_mixed_angles_zero(self):
        a = SurfaceFrame(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
        # normal at 90 deg, curvature dir at 45 deg
        n = np.array([0, 1.0, 0])
        d1 = np.array([1.0, 0, 1.0]) / np.sqrt(2)
        b = SurfaceFrame(n, d1, np.cross(n, d1))
        assert morphology_evidence(a, self.node_with_frame(b)) == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_uses_normal_only(self):
        a = SurfaceFrame(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
        b = SurfaceFrame(np.array([0, 0, 1.0]), np.array([0, 1.0, 0]), np.array([-1.0, 0, 0]))
        assert morphology_evidence(a, self.node_with_frame(b), sensed_degenerate=True) == 1.0

    def test_range(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            fa = random_rotation_matrix(rng).T
            fb = random_rotation_matrix(rng).T
            a = SurfaceFrame.from_rows(fa)
            b = self.node_with_frame(SurfaceFrame.from_rows(fb))
            assert -1.0 - 1e-12 <= morphology_evidence(a, b) <= 1.0 + 1e-12


class TestInitHypotheses:
    def test_two_rotations_per_node(self):
        rng = np.random.default_rng(2)
        model = random_model(rng, 10)
        msg = msg_from(rng.normal(size=3), frame_matrix(rng))
        space = init_hypotheses({"obj": model}, msg, LMConfig())
        assert len(space.per_object["obj"]) == 20

    def test_degenerate_sampling_count(self):
        rng = np.random.default_rng(3)
        model = random_model(rng, 5)
        msg = msg_from(rng.normal(size=3), frame_matrix(rng), degenerate=True)
        config = LMConfig(n_degenerate_rotations=8)
        space = init_hypotheses({"obj": model}, msg, config)
        assert len(space.per_object["obj"]) == 40

    def test_no_features_configured_zero_evidence(self):
        rng = np.random.default_rng(4)
        model = random_model(rng, 7)
        msg = msg_from(rng.normal(size=3), frame_matrix(rng))
        config = LMConfig(feature_weights={}, feature_tolerances={})
        space = init_hypotheses({"obj": model}, msg, config)
        assert (space.per_object["obj"].evidence == 0.0).all()

    def test_initial_evidence_in_unit_interval(self):
        rng = np.random.default_rng(5)
        model = random_model(rng, 30)
        msg = msg_from(rng.normal(size=3), frame_matrix(rng))
        space = init_hypotheses({"obj": model}, msg, LMConfig())
        ev = space.per_object["obj"].evidence
        assert (ev >= 0.0).all() and (ev <= 1.0).all()

    def test_empty_memory_gives_empty_space(self):
        msg = msg_from(np.zeros(3), np.eye(3))
        space = init_hypotheses({}, msg, LMConfig())
        assert len(space) == 0

    def test_feature_match_peaks_at_matching_nodes(self):
        # cylinder-like model: curved red band, curved blue band, flat caps
        rng = np.random.default_rng(6)
        model = random_model(rng, 30)
        model.features["rgba"][:10] = [1, 0, 0, 1]  # red, curved
        model.features["curvatures"][:10] = [10.0, 0.0]
        model.features["rgba"][10:20] = [0, 0, 1, 1]  # blue, curved
        model.features["curvatures"][10:20] = [10.0, 0.0]
        model.features["rgba"][20:] = [1, 0, 0, 1]  # red, flat
        model.features["curvatures"][20:] = [0.0, 0.0]
        msg = msg_from(np.zeros(3), frame_matrix(rng), rgba=(1, 0, 0, 1), curvatures=(10.0, 0.0))
        space = init_hypotheses({"obj": model}, msg, LMConfig())
        ev = space.per_object["obj"].evidence.reshape(30, 2)
        best = np.flatnonzero(np.isclose(ev.max(axis=1), ev.max()))
        assert set(best) == set(range(10))


class TestUpdateEvidence:
    def config(self):
        return LMConfig()

    def perfect_setup(self, rng):
        """A hypothesis sitting exactly on a node with identity rotation."""
        model = random_model(rng, 12)
        i = 4
        frame = SurfaceFrame(model.normals[i], model.dirs_1[i], model.dirs_2[i])
        msg = msg_from(
            model.locations[i],
            frame.as_matrix(),
            rgba=model.features["rgba"][i],
            curvatures=model.features["curvatures"][i],
        )
        return model, msg, i

    def test_perfect_match_delta_two(self):
        rng = np.random.default_rng(7)
        model, msg, i = self.perfect_setup(rng)
        space = init_hypotheses({"obj": model}, msg, self.config())
        before = space.per_object["obj"].evidence.copy()
        update_evidence(space, np.zeros(3), msg, {"obj": model}, self.config())
        deltas = space.per_object["obj"].evidence - before
        # the hypothesis seeded at node i with the exact alignment gets 2.0
        assert deltas.max() == pytest.approx(2.0, abs=1e-9)

    def test_walked_off_model_delta_minus_one(self):
        rng = np.random.default_rng(8)
        model, msg, _ = self.perfect_setup(rng)
        space = init_hypotheses({"obj": model}, msg, self.config())
        before = space.per_object["obj"].evidence.copy()
        far = np.array([10.0, 0.0, 0.0])
        moved = msg_from(msg.location + far, msg.morph, rgba=msg.features["rgba"])
        update_evidence(space, far, moved, {"obj": model}, self.config())
        deltas = space.per_object["obj"].evidence - before
        np.testing.assert_allclose(deltas, -1.0)

    def test_deltas_always_in_range(self):
        rng = np.random.default_rng(9)
        config = self.config()
        for _ in range(20):
            model = random_model(rng, 25)
            msg = msg_from(rng.normal(size=3) * 0.02, frame_matrix(rng))
            space = init_hypotheses({"obj": model}, msg, config)
            for _ in range(4):
                before = space.per_object["obj"].evidence.copy()
                disp = rng.normal(size=3) * 0.02
                nxt = msg_from(
                    rng.normal(size=3) * 0.02,
                    frame_matrix(rng),
                    rgba=rng.uniform(size=4),
                    curvatures=rng.uniform(-20, 20, size=2),
                )
                update_evidence(space, disp, nxt, {"obj": model}, config)
                deltas = space.per_object["obj"].evidence - before
                assert (deltas >= -1.0 - 1e-12).all()
                assert (deltas <= 2.0 + 1e-12).all()

    def test_nonfinite_displacement_rejected(self):
        rng = np.random.default_rng(10)
        model, msg, _ = self.perfect_setup(rng)
        space = init_hypotheses({"obj": model}, msg, self.config())
        with pytest.raises(ValueError):
            update_evidence(space, np.array([np.nan, 0, 0]), msg, {"obj": model}, self.config())

    def test_matches_bruteforce_replay_oracle(self):
        rng = np.random.default_rng(11)
        config = self.config()
        for trial in range(10):
            model = random_model(rng, int(rng.integers(5, 40)))
            first = msg_from(rng.normal(size=3) * 0.02, frame_matrix(rng))
            space = init_hypotheses({"obj": model}, first, config)
            init_locs = space.per_object["obj"].locations.copy()
            init_rots = space.per_object["obj"].rotations.copy()
            init_ev = space.per_object["obj"].evidence.copy()
            steps = []
            for _ in range(int(rng.integers(1, 5))):
                disp = rng.normal(size=3) * 0.02
                nxt = msg_from(
                    rng.normal(size=3) * 0.02,
                    frame_matrix(rng),
                    rgba=rng.uniform(size=4),
                    curvatures=rng.uniform(-20, 20, size=2),
                )
                steps.append((disp, nxt))
                update_evidence(space, disp, nxt, {"obj": model}, config)
            expected = oracle_replay(init_locs, init_rots, init_ev, steps, model, config)
            np.testing.assert_allclose(space.per_object["obj"].evidence, expected, atol=1e-9)

    def test_feature_mismatch_never_hurts_morphology(self):
        # the per-neighbor contribution with features >= the same contribution
        # computed from morphology alone
        rng = np.random.default_rng(12)
        model = random_model(rng, 15)
        config = self.config()
        bare = LMConfig(feature_weights={}, feature_tolerances={})
        msg0 = msg_from(rng.normal(size=3) * 0.01, frame_matrix(rng))
        space_f = init_hypotheses({"obj": model}, msg0, config)
        space_m = init_hypotheses({"obj": model}, msg0, bare)
        disp = rng.normal(size=3) * 0.01
        msg1 = msg_from(rng.normal(size=3) * 0.01, frame_matrix(rng))
        ev_f0 = space_f.per_object["obj"].evidence.copy()
        ev_m0 = space_m.per_object["obj"].evidence.copy()
        update_evidence(space_f, disp, msg1, {"obj": model}, config)
        update_evidence(space_m, disp, msg1, {"obj": model}, bare)
        delta_f = space_f.per_object["obj"].evidence - ev_f0
        delta_m = space_m.per_object["obj"].evidence - ev_m0
        assert (delta_f >= delta_m - 1e-12).all()
