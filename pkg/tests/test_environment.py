import numpy as np
import pytest

from somrec.environment import (
    ActionSpaceError,
    AgentState,
    Box,
    CappedTorus,
    Capsule,
    Cylinder,
    JumpToPose,
    Mesh,
    MoveForward,
    ObjectInstance,
    OffSurfaceError,
    Orient,
    OrientToFace,
    Painter,
    Scene,
    SceneObject,
    Sphere,
    Torus,
    TranslateTangential,
    UnsupportedShapeError,
    apply_action,
    load_obj,
    load_scene,
    look_at,
    ray_cast,
    save_scene,
    sense_patch,
)
from somrec.geometry import Pose, Rotation


def single_scene(shape, pose=None, label="thing", color=(0.5, 0.5, 0.5, 1.0), painter=None):
    return Scene(
        objects=(
            ObjectInstance(
                object=SceneObject.single(shape, color=color, painter=painter),
                pose=pose or Pose.identity(),
                ground_truth_label=label,
            ),
        )
    )


def brute_force_mesh_hit(mesh: Mesh, origin, direction):
    """Independent per-triangle Moller-Trumbore loop; nearest positive t."""
    best = np.inf
    for face in mesh.faces:
        v0, v1, v2 = mesh.vertices[face]
        e1, e2 = v1 - v0, v2 - v0
        p = np.cross(direction, e2)
        det = np.dot(p, e1)
        if abs(det) < 1e-12:
            continue
        tvec = origin - v0
        u = np.dot(tvec, p) / det
        q = np.cross(tvec, e1)
        v = np.dot(direction, q) / det
        t = np.dot(q, e2) / det
        if u >= -1e-12 and v >= -1e-12 and u + v <= 1 + 1e-12 and t > 1e-9:
            best = min(best, t)
    return best


def icosahedron_mesh(radius=1.0):
    phi = (1 + np.sqrt(5)) / 2
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    verts *= radius / np.linalg.norm(verts[0])
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return Mesh(vertices=verts, faces=faces)


class TestRayCast:
    def test_sphere_from_center(self):
        scene = single_scene(Sphere(1.0))
        hit = ray_cast(scene, [0, 0, 0], [1, 0, 0])
        assert hit is not None
        assert abs(hit.distance - 1.0) < 1e-12

    def test_parallel_miss_box(self):
        scene = single_scene(Box(1, 1, 1))
        assert ray_cast(scene, [0, 2.0, -5], [0, 0, 1]) is None

    def test_box_face_hit(self):
        scene = single_scene(Box(2, 2, 2))
        hit = ray_cast(scene, [5, 0.3, 0.2], [-1, 0, 0])
        assert abs(hit.distance - 4.0) < 1e-12
        np.testing.assert_allclose(hit.location, [1.0, 0.3, 0.2], atol=1e-12)

    def test_cylinder_cap_and_side(self):
        scene = single_scene(Cylinder(radius=0.5, height=2.0))
        top = ray_cast(scene, [0.1, 0.1, 3.0], [0, 0, -1])
        assert abs(top.distance - 2.0) < 1e-12
        side = ray_cast(scene, [3.0, 0, 0.2], [-1, 0, 0])
        assert abs(side.distance - 2.5) < 1e-12

    def test_capsule_end(self):
        scene = single_scene(Capsule(radius=0.5, height=1.0))
        hit = ray_cast(scene, [0, 0, 3.0], [0, 0, -1])
        assert abs(hit.distance - 2.0) < 1e-9  # 3 - (0.5 + 0.5)

    def test_torus_outer_equator(self):
        scene = single_scene(Torus(major=1.0, minor=0.25))
        hit = ray_cast(scene, [3.0, 0, 0], [-1, 0, 0])
        assert abs(hit.distance - (3.0 - 1.25)) < 1e-7

    def test_torus_through_hole(self):
        scene = single_scene(Torus(major=1.0, minor=0.25))
        assert ray_cast(scene, [0, 0, 3.0], [0, 0, -1]) is None

    def test_capped_torus_clips_arc(self):
        arc = CappedTorus(major=1.0, minor=0.2, aperture=np.pi / 2)
        scene = single_scene(arc)
        kept = ray_cast(scene, [3.0, 0, 0], [-1, 0, 0])  # azimuth 0: kept
        assert kept is not None and abs(kept.distance - 1.8) < 1e-7
        removed = ray_cast(scene, [-3.0, 0, 0], [1, 0, 0])  # azimuth pi: clipped
        assert removed is None or removed.distance > 2.0

    def test_posed_instance(self):
        pose = Pose(np.array([0.0, 0.0, 2.0]), Rotation.from_axis_angle([1, 0, 0], np.pi / 2))
        scene = single_scene(Cylinder(radius=0.5, height=2.0), pose=pose)
        # the cylinder axis now points along -y; a ray down the world z axis
        # from above its center hits the lateral surface at z = 2.5
        hit = ray_cast(scene, [0, 0, 5.0], [0, 0, -1])
        assert abs(hit.distance - 2.5) < 1e-9

    def test_mesh_matches_bruteforce_oracle(self):
        mesh = icosahedron_mesh()
        scene = single_scene(mesh)
        rng = np.random.default_rng(42)
        for _ in range(500):
            origin = rng.normal(size=3)
            origin = origin / np.linalg.norm(origin) * 3.0
            target = rng.normal(size=3) * 0.4
            d = target - origin
            d /= np.linalg.norm(d)
            expected = brute_force_mesh_hit(mesh, origin, d)
            hit = ray_cast(scene, origin, d)
            got = hit.distance if hit else np.inf
            if np.isinf(expected):
                assert np.isinf(got)
            else:
                assert abs(got - expected) < 1e-9


class TestSensePatch:
    def test_plane_patch_coplanar(self):
        # a huge box face acts as a plane
        scene = single_scene(Box(10.0, 10.0, 1.0), pose=Pose(np.array([0, 0, -0.5]), Rotation.identity()))
        pose = Pose(np.array([0.0, 0.0, 0.1]), Rotation.identity())  # looks along -z
        patch = sense_patch(scene, pose, resolution=(16, 16), zoom=10.0)
        assert patch.on_object.all()
        np.testing.assert_allclose(patch.locations[..., 2], 0.0, atol=1e-9)

    def test_empty_space(self):
        scene = single_scene(Sphere(0.1))
        pose = Pose(np.array([0.0, 0.0, 5.0]), look_at(np.array([0.0, 0.0, 5.0]), np.array([0, 10.0, 5.0])))
        patch = sense_patch(scene, pose, resolution=(8, 8))
        assert not patch.on_object.any()

    def test_center_pixel_matches_single_ray(self):
        scene = single_scene(Sphere(0.5))
        loc = np.array([0.0, 0.3, 2.0])
        pose = Pose(loc, look_at(loc, np.zeros(3)))
        patch = sense_patch(scene, pose, resolution=(16, 16), zoom=10.0)
        hit = ray_cast(scene, loc, -pose.orientation.matrix[:, 2])
        np.testing.assert_allclose(patch.center_location, hit.location, atol=1e-12)

    def test_depth_equals_distance(self):
        scene = single_scene(Sphere(0.5))
        loc = np.array([0.0, 0.0, 2.0])
        pose = Pose(loc, look_at(loc, np.zeros(3)))
        patch = sense_patch(scene, pose, resolution=(8, 8), zoom=5.0)
        d = np.linalg.norm(patch.locations - loc, axis=2)
        assert (d[patch.on_object] <= 2.0).all()

    def test_min_resolution(self):
        scene = single_scene(Sphere(0.5))
        with pytest.raises(ValueError):
            sense_patch(scene, Pose.identity(), resolution=(4, 8))

    def test_two_tone_paint(self):
        painter = Painter(primary=(1, 0, 0, 1), secondary=(0, 0, 1, 1), sector_deg=60.0, z_min=0.0)
        scene = single_scene(Cylinder(0.5, 2.0), painter=painter)
        red = ray_cast(scene, [3, 0, 0.5], [-1, 0, 0])
        blue_low = ray_cast(scene, [3, 0, -0.5], [-1, 0, 0])
        blue_back = ray_cast(scene, [-3, 0, 0.5], [1, 0, 0])
        np.testing.assert_array_equal(red.color, [1, 0, 0, 1])
        np.testing.assert_array_equal(blue_low.color, [0, 0, 1, 1])
        np.testing.assert_array_equal(blue_back.color, [0, 0, 1, 1])


class TestAnalyticProperties:
    def test_sphere(self):
        obj = SceneObject.single(Sphere(0.1))
        p = np.array([0.0, 0.0, 0.1])
        props = obj.surface_properties(p)
        np.testing.assert_allclose(props.normal, [0, 0, 1], atol=1e-12)
        assert abs(props.k1 - 10.0) < 1e-9 and abs(props.k2 - 10.0) < 1e-9

    def test_cylinder_side(self):
        obj = SceneObject.single(Cylinder(radius=0.05, height=0.3))
        props = obj.surface_properties(np.array([0.05, 0.0, 0.02]))
        assert abs(props.k1 - 20.0) < 1e-9
        assert abs(props.k2) < 1e-12
        np.testing.assert_allclose(np.abs(props.dir_1), [0, 1, 0], atol=1e-12)
        np.testing.assert_allclose(np.abs(props.dir_2), [0, 0, 1], atol=1e-12)

    def test_box_face(self):
        obj = SceneObject.single(Box(0.2, 0.2, 0.2))
        props = obj.surface_properties(np.array([0.03, 0.02, 0.1]))
        np.testing.assert_allclose(props.normal, [0, 0, 1], atol=1e-12)
        assert props.k1 == props.k2 == 0.0

    def test_torus_outer(self):
        obj = SceneObject.single(Torus(major=1.0, minor=0.25))
        props = obj.surface_properties(np.array([1.25, 0.0, 0.0]))
        np.testing.assert_allclose(props.normal, [1, 0, 0], atol=1e-9)
        assert abs(props.k1 - 4.0) < 1e-9  # 1/minor
        assert abs(props.k2 - 1.0 / 1.25) < 1e-9

    def test_off_surface_rejected(self):
        obj = SceneObject.single(Sphere(0.1))
        with pytest.raises(OffSurfaceError):
            obj.surface_properties(np.array([0.0, 0.0, 0.2]))

    def test_mesh_unsupported(self):
        obj = SceneObject.single(icosahedron_mesh())
        with pytest.raises(UnsupportedShapeError):
            obj.surface_properties(np.array([0.0, 0.0, 1.0]))


class TestAgent:
    def test_orient_zero_is_identity(self):
        state = AgentState(kind="distant", pose=Pose.identity(), sensors={"patch": Pose.identity()})
        scene = single_scene(Sphere(0.1))
        after = apply_action(scene, state, Orient(0.0, 0.0))
        np.testing.assert_allclose(after.pose.location, state.pose.location)
        assert after.pose.orientation.angle_to(state.pose.orientation) < 1e-12

    def test_orient_rejected_for_surface(self):
        state = AgentState(kind="surface", pose=Pose.identity())
        scene = single_scene(Sphere(0.1))
        with pytest.raises(ActionSpaceError):
            apply_action(scene, state, Orient(1.0, 0.0))

    def test_tangential_rejected_for_distant(self):
        state = AgentState(kind="distant", pose=Pose.identity())
        scene = single_scene(Sphere(0.1))
        with pytest.raises(ActionSpaceError):
            apply_action(scene, state, TranslateTangential(np.array([0.01, 0, 0])))

    def test_jump_exact(self):
        state = AgentState(kind="distant", pose=Pose.identity())
        scene = single_scene(Sphere(0.1))
        target = Pose(np.array([1.0, 2.0, 3.0]), Rotation.from_axis_angle([0, 1, 0], 0.3))
        after = apply_action(scene, state, JumpToPose(target))
        assert after.pose is target

    def test_surface_step_preserves_offset_on_sphere(self):
        r = 0.1
        scene = single_scene(Sphere(r))
        offset = 0.005
        start_loc = np.array([0.0, 0.0, r + offset])
        state = AgentState(
            kind="surface",
            pose=Pose(start_loc, look_at(start_loc, np.zeros(3))),
            contact=True,
            surface_offset=offset,
        )
        rng = np.random.default_rng(0)
        for _ in range(25):
            step = rng.normal(size=3) * 0.02
            state = apply_action(scene, state, TranslateTangential(step))
            assert state.contact
            # signed distance from sensor to the sphere equals the offset
            d = np.linalg.norm(state.pose.location) - r
            assert abs(d - offset) < 1e-6

    def test_surface_agent_never_penetrates(self):
        scene = single_scene(Box(0.1, 0.1, 0.1))
        offset = 0.004
        start = np.array([0.0, 0.0, 0.05 + offset])
        state = AgentState(
            kind="surface",
            pose=Pose(start, look_at(start, np.zeros(3))),
            contact=True,
            surface_offset=offset,
        )
        obj = scene.objects[0].object
        rng = np.random.default_rng(1)
        for _ in range(40):
            state = apply_action(scene, state, TranslateTangential(rng.normal(size=3) * 0.02))
            sd = float(obj.sdf(state.pose.location[None, :])[0])
            assert sd >= -1e-9

    def test_orient_to_face(self):
        scene = single_scene(Sphere(0.1))
        state = AgentState(kind="distant", pose=Pose(np.array([1.0, 1.0, 1.0]), Rotation.identity()))
        after = apply_action(scene, state, OrientToFace(np.zeros(3)))
        np.testing.assert_allclose(after.look_axis, -after.pose.location / np.sqrt(3), atol=1e-12)

    def test_move_forward(self):
        scene = single_scene(Sphere(0.1))
        loc = np.array([0.0, 0.0, 1.0])
        state = AgentState(kind="distant", pose=Pose(loc, look_at(loc, np.zeros(3))))
        after = apply_action(scene, state, MoveForward(0.25))
        np.testing.assert_allclose(after.pose.location, [0, 0, 0.75], atol=1e-12)


class TestSceneIO:
    def test_scene_json_roundtrip(self, tmp_path):
        painter = Painter(primary=(1, 0, 0, 1), secondary=(0, 0, 1, 1), sector_deg=60.0, z_min=0.0)
        scene = single_scene(Cylinder(0.04, 0.12), painter=painter, label="two_tone")
        path = tmp_path / "scene.json"
        save_scene(scene, path)
        back = load_scene(path)
        assert back.objects[0].ground_truth_label == "two_tone"
        hit_a = ray_cast(scene, [1, 0, 0.03], [-1, 0, 0])
        hit_b = ray_cast(back, [1, 0, 0.03], [-1, 0, 0])
        np.testing.assert_allclose(hit_a.location, hit_b.location)
        np.testing.assert_array_equal(hit_a.color, hit_b.color)

    def test_obj_ingestion(self, tmp_path):
        path = tmp_path / "tri.obj"
        path.write_text(
            "# comment\n"
            "v 0 0 0 1 0 0\n"
            "v 1 0 0 0 1 0\n"
            "v 0 1 0 0 0 1\n"
            "f 1 2 3\n"
        )
        mesh = load_obj(path)
        assert mesh.vertices.shape == (3, 3)
        assert mesh.faces.shape == (1, 3)
        scene = single_scene(mesh)
        hit = ray_cast(scene, [0.25, 0.25, 1.0], [0, 0, -1])
        assert abs(hit.distance - 1.0) < 1e-12
        # barycentric color blend at the sample point
        np.testing.assert_allclose(hit.color[:3], [0.5, 0.25, 0.25], atol=1e-12)
