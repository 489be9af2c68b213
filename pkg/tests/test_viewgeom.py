import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viewskill.geometry import CameraPose, look_at, quat_from_axis_angle, quat_multiply
from viewskill.viewgeom import (
    EmptyDepthError,
    adaptive_angle,
    average_depth,
    apply_viewpoint_offset,
    image_entropy,
    mutual_information,
    sample_novel_viewpoint,
    sample_viewpoint_offset,
    select_keyframes,
    viewpoint_change,
    ViewpointOffset,
)


def make_camera(pos=(0.0, -0.5, 0.3), target=(0.0, 0.0, 0.0)):
    pos = np.asarray(pos, dtype=float)
    return CameraPose(position=pos, orientation=look_at(pos, target))


class TestAverageDepth:
    def test_constant(self):
        assert average_depth(np.full((8, 8), 2.0)) == pytest.approx(2.0)

    def test_two_values(self):
        d = np.concatenate([np.full(32, 1.0), np.full(32, 3.0)]).reshape(8, 8)
        assert average_depth(d) == pytest.approx(2.0)

    def test_masked_mean_ignores_invalid(self):
        d = np.concatenate([np.full(32, 4.0), np.zeros(32)]).reshape(8, 8)
        assert average_depth(d) == pytest.approx(4.0)

    def test_all_invalid_raises(self):
        with pytest.raises(EmptyDepthError):
            average_depth(np.zeros((4, 4)))


class TestAdaptiveAngle:
    def test_linear_rule_at_two_meters(self):
        assert adaptive_angle(2.0, 14, 39) == pytest.approx(11.0, abs=1e-9)

    def test_zero_crossing(self):
        assert adaptive_angle(39.0 / 14.0, 14, 39) == pytest.approx(0.0, abs=1e-9)

    def test_intercept(self):
        assert adaptive_angle(0.0, 14, 39) == pytest.approx(39.0, abs=1e-9)

    def test_clamp_below_zero(self):
        assert adaptive_angle(10.0, 14, 39) == 0.0

    def test_clamp_above_45(self):
        assert adaptive_angle(-1.0, 14, 39) == 45.0

    @given(st.floats(min_value=0.0, max_value=20.0),
           st.floats(min_value=0.0, max_value=20.0))
    @settings(max_examples=200, deadline=None)
    def test_non_increasing_and_bounded(self, d1, d2):
        lo, hi = sorted([d1, d2])
        a_lo, a_hi = adaptive_angle(lo), adaptive_angle(hi)
        assert a_lo >= a_hi
        assert 0.0 <= a_lo <= 45.0 and 0.0 <= a_hi <= 45.0


class TestSampleNovelViewpoint:
    def test_zero_theta_zero_jitter_is_identity(self):
        cam = make_camera()
        depth = np.full((8, 8), 39.0 / 14.0)  # exactly the zero crossing
        new = sample_novel_viewpoint(cam, depth, np.random.default_rng(0), jitter_max=0.0)
        assert np.allclose(new.position, cam.position, atol=1e-12)
        assert np.allclose(new.rotation, cam.rotation, atol=1e-9)

    def test_optical_axis_angle_matches_theta(self):
        cam = make_camera()
        depth = np.full((8, 8), 1.5)
        theta = adaptive_angle(1.5)
        for seed in range(5):
            new = sample_novel_viewpoint(cam, depth, np.random.default_rng(seed),
                                         jitter_max=0.0)
            cosang = float(np.dot(new.forward, cam.forward))
            ang = np.degrees(np.arccos(np.clip(cosang, -1, 1)))
            assert ang == pytest.approx(theta, abs=1e-6)

    def test_distance_to_origin_preserved_within_jitter(self):
        cam = make_camera()
        d = 1.2
        depth = np.full((8, 8), d)
        origin = cam.position + d * cam.forward
        for seed in range(10):
            new = sample_novel_viewpoint(cam, depth, np.random.default_rng(seed),
                                         jitter_max=0.01)
            r = np.linalg.norm(new.position - origin)
            assert abs(r - d) <= 0.01 + 1e-12

    def test_distinct_seeds_distinct_azimuths(self):
        cam = make_camera()
        depth = np.full((8, 8), 1.5)
        a = sample_novel_viewpoint(cam, depth, np.random.default_rng(1), jitter_max=0.0)
        b = sample_novel_viewpoint(cam, depth, np.random.default_rng(2), jitter_max=0.0)
        assert not np.allclose(a.position, b.position)

    def test_deterministic_per_seed(self):
        cam = make_camera()
        depth = np.full((8, 8), 1.0)
        a = sample_novel_viewpoint(cam, depth, np.random.default_rng(9))
        b = sample_novel_viewpoint(cam, depth, np.random.default_rng(9))
        assert np.array_equal(a.position, b.position)
        assert np.array_equal(a.orientation, b.orientation)

    def test_aims_at_sphere_origin(self):
        cam = make_camera()
        d = 0.8
        depth = np.full((8, 8), d)
        origin = cam.position + d * cam.forward
        new = sample_novel_viewpoint(cam, depth, np.random.default_rng(3), jitter_max=0.01)
        aim = origin - new.position
        aim /= np.linalg.norm(aim)
        assert np.allclose(aim, new.forward, atol=1e-9)

    def test_offset_reuse_is_deterministic(self):
        cam = make_camera()
        depth = np.full((8, 8), 1.5)
        off = sample_viewpoint_offset(depth, np.random.default_rng(4))
        a = apply_viewpoint_offset(cam, depth, off)
        b = apply_viewpoint_offset(cam, depth, off)
        assert np.array_equal(a.position, b.position)

    def test_propagates_depth_error(self):
        cam = make_camera()
        with pytest.raises(EmptyDepthError):
            sample_novel_viewpoint(cam, np.zeros((8, 8)), np.random.default_rng(0))


class TestViewpointChange:
    def test_identical_zero(self):
        cam = make_camera()
        assert viewpoint_change(cam, cam) == 0.0

    def test_pure_rotation(self):
        cam = make_camera()
        q = quat_multiply(quat_from_axis_angle([0, 0, np.radians(10)]), cam.orientation)
        rotated = cam.with_pose(cam.position, q)
        assert viewpoint_change(cam, rotated) == pytest.approx(10.0, abs=1e-9)

    def test_pure_translation(self):
        cam = make_camera()
        moved = cam.with_pose(cam.position + np.array([0.05, 0, 0]), cam.orientation)
        assert viewpoint_change(cam, moved, beta=0.01) == pytest.approx(5.0, abs=1e-9)

    def test_symmetric(self):
        a = make_camera((0.1, -0.4, 0.3))
        b = make_camera((0.0, -0.5, 0.25), target=(0.05, 0, 0))
        assert viewpoint_change(a, b) == pytest.approx(viewpoint_change(b, a), abs=1e-12)


class TestMutualInformation:
    def test_self_mi_equals_entropy(self):
        rng = np.random.default_rng(0)
        img = rng.uniform(0, 1, size=(32, 32))
        assert mutual_information(img, img) == pytest.approx(image_entropy(img), abs=1e-9)

    def test_diagonal_joint_gives_ln2(self):
        # half pixels in bin 0, half in the top bin, perfectly co-registered
        a = np.concatenate([np.zeros(50), np.full(50, 0.999)]).reshape(10, 10)
        assert mutual_information(a, a, bins=2) == pytest.approx(np.log(2), abs=1e-9)
        # same diagonal structure across two distinct images
        b = np.concatenate([np.full(50, 0.2), np.full(50, 0.8)]).reshape(10, 10)
        assert mutual_information(a, b, bins=2) == pytest.approx(np.log(2), abs=1e-9)

    def test_independent_noise_small(self):
        vals = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            a = rng.uniform(0, 1, size=(100, 100))
            b = rng.uniform(0, 1, size=(100, 100))
            vals.append(mutual_information(a, b))
        assert np.mean(vals) < 0.05

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(0, 1, size=(20, 20))
        b = np.clip(a + rng.normal(0, 0.1, size=a.shape), 0, 1)
        assert mutual_information(a, b) == pytest.approx(mutual_information(b, a),
                                                         abs=1e-12)

    def test_nonnegative(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rng.uniform(0, 1, size=(16, 16))
            b = rng.uniform(0, 1, size=(16, 16))
            assert mutual_information(a, b) >= 0.0

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            mutual_information(np.zeros((4, 4)), np.zeros((5, 5)))

    def test_rgb_converted_to_grayscale(self):
        rng = np.random.default_rng(3)
        img = rng.uniform(0, 1, size=(16, 16, 3))
        gray = img @ np.array([0.299, 0.587, 0.114])
        assert mutual_information(img, img) == pytest.approx(
            mutual_information(gray, gray), abs=1e-12)


class TestSelectKeyframes:
    def test_single_frame(self):
        assert select_keyframes([make_camera()], threshold=10.0) == [0]

    def test_identical_poses_only_first(self):
        cam = make_camera()
        assert select_keyframes([cam] * 10, threshold=1.0) == [0]

    def test_rotating_trace(self):
        cam = make_camera()
        poses = []
        for i in range(10):
            q = quat_multiply(quat_from_axis_angle([0, 0, np.radians(4.0 * i)]),
                              cam.orientation)
            poses.append(cam.with_pose(cam.position, q))
        assert select_keyframes(poses, threshold=10.0) == [0, 3, 6, 9]

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            poses = []
            pos = np.array([0.0, -0.5, 0.3])
            for _ in range(30):
                pos = pos + rng.normal(0, 0.01, size=3)
                poses.append(make_camera(pos, target=rng.normal(0, 0.05, size=3)))
            counts = [len(select_keyframes(poses, th)) for th in (2.0, 5.0, 10.0, 20.0)]
            assert all(x >= y for x, y in zip(counts, counts[1:]))
            assert all(select_keyframes(poses, th)[0] == 0 for th in (2.0, 5.0, 10.0))

    def test_strictly_increasing_indices(self):
        rng = np.random.default_rng(1)
        poses = [make_camera(np.array([0.0, -0.5, 0.3]) + rng.normal(0, 0.03, 3))
                 for _ in range(20)]
        kf = select_keyframes(poses, threshold=5.0)
        assert all(a < b for a, b in zip(kf, kf[1:]))

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            select_keyframes([], threshold=1.0)
