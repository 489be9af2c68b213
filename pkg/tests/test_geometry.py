import numpy as np
import pytest

from viewskill.geometry import (
    CameraPose,
    RigidTransform,
    look_at,
    matrix_to_quat,
    quat_angle_between,
    quat_from_axis_angle,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
)


def test_quat_matrix_roundtrip():
    rng = np.random.default_rng(0)
    for _ in range(50):
        q = quat_normalize(rng.normal(size=4))
        q2 = matrix_to_quat(quat_to_matrix(q))
        # q and -q encode the same rotation
        assert np.allclose(quat_to_matrix(q2), quat_to_matrix(q), atol=1e-12)


def test_quat_multiply_matches_matrix_product():
    rng = np.random.default_rng(1)
    a = quat_normalize(rng.normal(size=4))
    b = quat_normalize(rng.normal(size=4))
    assert np.allclose(quat_to_matrix(quat_multiply(a, b)),
                       quat_to_matrix(a) @ quat_to_matrix(b), atol=1e-12)


def test_axis_angle_rotation():
    q = quat_from_axis_angle([0, 0, np.pi / 2])
    assert np.allclose(quat_rotate(q, [1, 0, 0]), [0, 1, 0], atol=1e-12)


def test_quat_angle_between_degrees():
    a = quat_from_axis_angle([0, 0, 0])
    b = quat_from_axis_angle([0, 0, np.radians(10)])
    assert quat_angle_between(a, b) == pytest.approx(10.0, abs=1e-9)
    # antipodal representation gives the same angle
    assert quat_angle_between(a, -b) == pytest.approx(10.0, abs=1e-9)


def test_camera_invariants():
    with pytest.raises(ValueError):
        CameraPose(position=[0, 0, 0], orientation=[1, 0, 0, 0.1])
    with pytest.raises(ValueError):
        CameraPose(position=[0, 0, 0], orientation=[1, 0, 0, 0], intrinsics=(0, 64, 32, 32))


def test_look_at_points_forward_at_target():
    cam_pos = np.array([0.5, -0.4, 0.3])
    target = np.array([0.0, 0.0, 0.05])
    q = look_at(cam_pos, target)
    cam = CameraPose(position=cam_pos, orientation=q)
    f = cam.forward
    expect = (target - cam_pos) / np.linalg.norm(target - cam_pos)
    assert np.allclose(f, expect, atol=1e-12)
    # rotation is orthonormal, right-handed
    r = cam.rotation
    assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)


def test_look_at_image_up_is_world_up():
    # a point above the aim target must land in the upper half of the image
    cam_pos = np.array([0.0, -0.5, 0.2])
    target = np.array([0.0, 0.0, 0.0])
    cam = CameraPose(position=cam_pos, orientation=look_at(cam_pos, target))
    u, v, z = cam.project(np.array([0.0, 0.0, 0.1]))
    assert z > 0
    assert v < cam.intrinsics[3]  # above principal point (y is down)


def test_project_unproject_roundtrip():
    cam_pos = np.array([0.2, -0.5, 0.4])
    cam = CameraPose(position=cam_pos, orientation=look_at(cam_pos, [0, 0, 0]))
    rng = np.random.default_rng(2)
    pts = rng.uniform(-0.2, 0.2, size=(40, 3))
    u, v, z = cam.project(pts)
    back = cam.unproject(u, v, z)
    assert np.allclose(back, pts, atol=1e-10)


def test_ray_directions_center_pixel_is_forward():
    cam_pos = np.array([0.0, -1.0, 0.5])
    cam = CameraPose(position=cam_pos, orientation=look_at(cam_pos, [0, 0, 0.5]),
                     intrinsics=(64, 64, 31.5, 31.5), resolution=(64, 64))
    rays = cam.ray_directions()
    # mean of the four center pixels approximates the optical axis
    center = rays[31:33, 31:33].mean(axis=(0, 1))
    center /= np.linalg.norm(center)
    assert np.allclose(center, cam.forward, atol=1e-3)


def test_rigid_transform_compose_and_relative():
    rng = np.random.default_rng(3)
    a = RigidTransform(rng.normal(size=3), quat_normalize(rng.normal(size=4)))
    b = RigidTransform(rng.normal(size=3), quat_normalize(rng.normal(size=4)))
    ab = a.compose(b)
    p = rng.normal(size=3)
    assert np.allclose(ab.apply(p), a.apply(b.apply(p)), atol=1e-12)
    rel = ab.relative_to(a)
    assert np.allclose(rel.position, b.position, atol=1e-12)
    assert np.allclose(quat_to_matrix(rel.orientation), quat_to_matrix(b.orientation),
                       atol=1e-12)
    assert np.allclose(a.inverse_apply(a.apply(p)), p, atol=1e-12)
