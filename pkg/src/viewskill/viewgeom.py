"""Viewpoint selection geometry, frame mutual information, and keyframe gating.

The novel viewpoint for a camera lives on a sphere whose origin sits on the
camera's primary ray at the scene's average depth. The angular offset on
that sphere shrinks linearly with depth (far scenes get conservative
offsets) and is clamped to [0, 45] degrees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    FLOAT,
    CameraPose,
    look_at,
    quat_angle_between,
    rotation_about_axis,
)

ANGLE_W1 = 14.0
ANGLE_W2 = 39.0
THETA_MIN = 0.0
THETA_MAX = 45.0
DEFAULT_JITTER = 0.01
DEFAULT_BETA = 0.01
DEFAULT_MI_BINS = 32


class EmptyDepthError(ValueError):
    """Depth map holds no valid (> 0) pixels."""


def average_depth(depth) -> float:
    """Mean depth over valid (> 0) pixels; invalid pixels are excluded."""
    depth = np.asarray(depth, dtype=FLOAT)
    if depth.size == 0:
        raise EmptyDepthError("empty depth map")
    valid = depth > 0
    if not valid.any():
        raise EmptyDepthError("no valid depth pixels")
    return float(depth[valid].mean())


def adaptive_angle(d_cam_ori: float, w1: float = ANGLE_W1, w2: float = ANGLE_W2) -> float:
    """Angular offset in degrees for a scene at the given average depth (meters).

    Linear in depth, clamped to [0, 45] degrees.
    """
    theta = -w1 * float(d_cam_ori) + w2
    return float(np.clip(theta, THETA_MIN, THETA_MAX))


@dataclass(frozen=True)
class SphericalFrame:
    """Sphere centered on a camera's primary ray at its average scene depth."""

    origin: np.ndarray
    radius: float
    camera: CameraPose

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @staticmethod
    def from_depth(camera: CameraPose, depth) -> "SphericalFrame":
        d = average_depth(depth)
        return SphericalFrame(origin=camera.position + d * camera.forward,
                              radius=d, camera=camera)


@dataclass(frozen=True)
class ViewpointOffset:
    """Polar offset on the viewpoint sphere plus a small positional jitter."""

    theta: float  # degrees
    azimuth: float  # degrees, direction of the offset around the primary ray
    jitter: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "jitter", np.asarray(self.jitter, dtype=FLOAT))
        if self.theta < 0:
            raise ValueError("theta must be non-negative")


def sample_viewpoint_offset(depth, rng, w1=ANGLE_W1, w2=ANGLE_W2,
                            jitter_max=DEFAULT_JITTER) -> ViewpointOffset:
    """Draw the (theta, azimuth, jitter) triple for one novel viewpoint."""
    theta = adaptive_angle(average_depth(depth), w1, w2)
    azimuth = float(rng.uniform(0.0, 360.0))
    if jitter_max > 0:
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        jitter = v * jitter_max * rng.uniform(0.0, 1.0) ** (1.0 / 3.0)
    else:
        jitter = np.zeros(3)
    return ViewpointOffset(theta=theta, azimuth=azimuth, jitter=jitter)


def apply_viewpoint_offset(camera: CameraPose, depth,
                           offset: ViewpointOffset) -> CameraPose:
    """Place the camera on the viewpoint sphere at the given offset, re-aimed
    at the sphere origin."""
    frame = SphericalFrame.from_depth(camera, depth)
    rel = camera.position - frame.origin
    if offset.theta > 0:
        axis0 = camera.right
        spin = rotation_about_axis(camera.forward, np.radians(offset.azimuth))
        axis = spin @ axis0
        rot = rotation_about_axis(axis, np.radians(offset.theta))
        rel = rot @ rel
    pos = frame.origin + rel + offset.jitter
    up_hint = -camera.down
    orientation = look_at(pos, frame.origin, up_hint=up_hint)
    return CameraPose(position=pos, orientation=orientation,
                      intrinsics=camera.intrinsics, resolution=camera.resolution)


def sample_novel_viewpoint(camera: CameraPose, depth, rng, w1=ANGLE_W1, w2=ANGLE_W2,
                           jitter_max=DEFAULT_JITTER) -> CameraPose:
    """Adaptive novel viewpoint: depth-dependent polar angle, random azimuth,
    small positional jitter, optical axis re-aimed at the sphere origin."""
    offset = sample_viewpoint_offset(depth, rng, w1, w2, jitter_max)
    return apply_viewpoint_offset(camera, depth, offset)


def viewpoint_change(a: CameraPose, b: CameraPose, beta: float = DEFAULT_BETA) -> float:
    """Pose distance: geodesic rotation angle (degrees) plus translation
    converted at ``beta`` meters per degree. Symmetric, zero iff identical."""
    rot = quat_angle_between(a.orientation, b.orientation)
    trans = float(np.linalg.norm(a.position - b.position)) / beta
    return rot + trans


# ---------------------------------------------------------------------------
# mutual information


def _to_gray(image):
    image = np.asarray(image, dtype=FLOAT)
    if image.ndim == 3:
        return image @ np.array([0.299, 0.587, 0.114])
    return image


def intensity_histogram(image, bins=DEFAULT_MI_BINS):
    gray = np.clip(_to_gray(image), 0.0, 1.0)
    idx = np.minimum((gray * bins).astype(np.int64), bins - 1)
    return np.bincount(idx.reshape(-1), minlength=bins).astype(FLOAT)


def image_entropy(image, bins=DEFAULT_MI_BINS) -> float:
    """Shannon entropy (nats) of the quantized grayscale histogram."""
    h = intensity_histogram(image, bins)
    p = h / h.sum()
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


def mutual_information(a, b, bins=DEFAULT_MI_BINS) -> float:
    """MI (nats) between two frames from their joint co-occurrence histogram."""
    if bins < 2:
        raise ValueError("bins must be >= 2")
    ga, gb = _to_gray(a), _to_gray(b)
    if ga.shape != gb.shape:
        raise ValueError("images must share a shape")
    ia = np.minimum((np.clip(ga, 0, 1) * bins).astype(np.int64), bins - 1).reshape(-1)
    ib = np.minimum((np.clip(gb, 0, 1) * bins).astype(np.int64), bins - 1).reshape(-1)
    joint = np.bincount(ia * bins + ib, minlength=bins * bins).astype(FLOAT)
    joint = joint.reshape(bins, bins) / joint.sum()
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    nz = joint > 0
    outer = pa[:, None] * pb[None, :]
    return float((joint[nz] * np.log(joint[nz] / outer[nz])).sum())


# ---------------------------------------------------------------------------
# keyframes


def select_keyframes(poses, threshold: float, beta: float = DEFAULT_BETA):
    """Indices of frames whose viewpoint change since the last keyframe
    exceeds ``threshold``. The initial frame is always a keyframe."""
    if len(poses) == 0:
        raise ValueError("pose list is empty")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    keyframes = [0]
    last = poses[0]
    for i, pose in enumerate(poses[1:], start=1):
        if viewpoint_change(last, pose, beta) > threshold:
            keyframes.append(i)
            last = pose
    return keyframes
