import numpy as np
import pytest

from somrec import cmp
from somrec.environment import (
    Box,
    Cylinder,
    ObjectInstance,
    Scene,
    SceneObject,
    Sphere,
    look_at,
    sense_patch,
)
from somrec.geometry import Pose
from somrec.sensor import (
    SensorConfig,
    SensorModule,
    TooFewPointsError,
    estimate_point_normal,
    estimate_principal_curvatures,
    to_cmp,
)


def scene_of(shape):
    return Scene(
        objects=(
            ObjectInstance(
                object=SceneObject.single(shape),
                pose=Pose.identity(),
                ground_truth_label="x",
            ),
        )
    )


def patch_of(shape, surface_point, distance=0.05, resolution=(16, 16), zoom=10.0):
    """Look straight down the surface normal from `distance` away."""
    scene = scene_of(shape)
    obj = scene.objects[0].object
    props = obj.surface_properties(np.asarray(surface_point, dtype=np.float64))
    loc = np.asarray(surface_point) + distance * props.normal
    pose = Pose(loc, look_at(loc, np.asarray(surface_point, dtype=np.float64)))
    return sense_patch(scene, pose, resolution=resolution, zoom=zoom), props


def angle_between(a, b):
    return np.degrees(np.arccos(np.clip(abs(np.dot(a, b)), -1, 1)))


class TestPointNormal:
    def test_plane_exact(self):
        patch, props = patch_of(Box(0.5, 0.5, 0.1), [0.0, 0.0, 0.05])
        n = estimate_point_normal(patch)
        np.testing.assert_allclose(n, props.normal, atol=1e-9)
        assert float(np.dot(n, props.normal)) > 0  # toward the sensor

    def test_sphere_within_two_degrees(self):
        patch, props = patch_of(Sphere(0.1), [0.0, 0.0, 0.1])
        n = estimate_point_normal(patch)
        assert angle_between(n, props.normal) < 2.0

    def test_too_few_points(self):
        patch, _ = patch_of(Sphere(0.1), [0.0, 0.0, 0.1])
        mask = np.zeros_like(patch.on_object)
        mask[0, :3] = True
        starved = type(patch)(
            locations=patch.locations,
            colors=patch.colors,
            on_object=mask,
            sensor_pose=patch.sensor_pose,
            zoom=patch.zoom,
        )
        with pytest.raises(TooFewPointsError):
            estimate_point_normal(starved)


class TestPrincipalCurvatures:
    def test_plane_flat_and_degenerate(self):
        patch, _ = patch_of(Box(0.5, 0.5, 0.1), [0.0, 0.0, 0.05])
        n = estimate_point_normal(patch)
        est = estimate_principal_curvatures(patch, n)
        assert abs(est.k1) < 1e-6 and abs(est.k2) < 1e-6
        assert est.degenerate

    def test_cylinder_curvatures_and_direction(self):
        r = 0.05
        patch, props = patch_of(Cylinder(radius=r, height=0.4), [r, 0.0, 0.0])
        n = estimate_point_normal(patch)
        est = estimate_principal_curvatures(patch, n)
        assert abs(est.k1 - 1.0 / r) / (1.0 / r) < 0.05  # within 5%
        assert abs(est.k2) < 1.0
        assert angle_between(est.dir_1, props.dir_1) < 5.0
        assert not est.degenerate

    def test_sphere_degenerate(self):
        patch, _ = patch_of(Sphere(0.1), [0.0, 0.0, 0.1])
        n = estimate_point_normal(patch)
        est = estimate_principal_curvatures(patch, n)
        assert est.degenerate
        assert abs(est.k1 - 10.0) / 10.0 < 0.05


class TestToCmp:
    def test_center_off_object_gates(self):
        scene = scene_of(Sphere(0.05))
        loc = np.array([0.0, 1.0, 0.0])
        pose = Pose(loc, look_at(loc, np.array([0.0, 2.0, 0.0])))  # facing away
        patch = sense_patch(scene, pose)
        msg = to_cmp(patch, None)
        assert not msg.use_state
        assert msg.confidence == 0.0

    def test_identical_patches_gate_second_message(self):
        patch, _ = patch_of(Sphere(0.1), [0.0, 0.0, 0.1])
        sm = SensorModule("sm_0")
        first = sm.to_cmp(patch)
        second = sm.to_cmp(patch)
        assert first.use_state
        assert not second.use_state

    def test_clean_cylinder_message_is_valid(self):
        patch, props = patch_of(Cylinder(radius=0.05, height=0.4), [0.05, 0.0, 0.0])
        msg = to_cmp(patch, None)
        assert msg.use_state
        assert cmp.validate(msg) == []
        frame = msg.frame
        assert angle_between(frame.point_normal, props.normal) < 2.0
        assert angle_between(frame.curvature_dir_1, props.dir_1) < 5.0
        k1, k2 = msg.feature("curvatures")
        assert abs(k1 - props.k1) / props.k1 < 0.05

    def test_repeat_sensing_identical_messages(self):
        patch, _ = patch_of(Cylinder(radius=0.05, height=0.4), [0.05, 0.0, 0.0])
        a = to_cmp(patch, None)
        b = to_cmp(patch, None)
        assert a == b

    def test_movement_above_threshold_passes_gate(self):
        r = 0.1
        patch_a, _ = patch_of(Sphere(r), [0.0, 0.0, r])
        shifted = np.array([0.0, np.sin(0.3) * r, np.cos(0.3) * r])
        patch_b, _ = patch_of(Sphere(r), shifted)
        sm = SensorModule("sm_0", SensorConfig(min_location_delta=0.001))
        assert sm.to_cmp(patch_a).use_state
        assert sm.to_cmp(patch_b).use_state
