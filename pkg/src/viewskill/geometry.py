"""Rigid transforms, quaternions, and pinhole camera math.

Conventions used throughout the package:

* World frame: z up, table surface at z = 0, lengths in meters.
* Quaternions are (w, x, y, z), unit norm.
* A camera's rotation matrix maps camera coordinates to world coordinates
  (camera-to-world). The camera looks along its local +z axis, +x is right
  in the image, +y is down in the image (OpenCV convention).
* Pixel (u, v): u indexes columns (width W), v indexes rows (height H).
  Image arrays are stored (H, W, ...) while ``resolution`` is (W, H).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

FLOAT = np.float64


# ---------------------------------------------------------------------------
# quaternions


def quat_normalize(q):
    q = np.asarray(q, dtype=FLOAT)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion")
    return q / n


def quat_multiply(a, b):
    """Hamilton product a*b, both (w, x, y, z)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        dtype=FLOAT,
    )


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]], dtype=FLOAT)


def quat_to_matrix(q):
    w, x, y, z = quat_normalize(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ],
        dtype=FLOAT,
    )


def matrix_to_quat(m):
    m = np.asarray(m, dtype=FLOAT)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        w = 0.25 * s
        x = (m[2, 1] - m[1, 2]) / s
        y = (m[0, 2] - m[2, 0]) / s
        z = (m[1, 0] - m[0, 1]) / s
    else:
        i = int(np.argmax(np.diag(m)))
        if i == 0:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
            w = (m[2, 1] - m[1, 2]) / s
            x = 0.25 * s
            y = (m[0, 1] + m[1, 0]) / s
            z = (m[0, 2] + m[2, 0]) / s
        elif i == 1:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
            w = (m[0, 2] - m[2, 0]) / s
            x = (m[0, 1] + m[1, 0]) / s
            y = 0.25 * s
            z = (m[1, 2] + m[2, 1]) / s
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
            w = (m[1, 0] - m[0, 1]) / s
            x = (m[0, 2] + m[2, 0]) / s
            y = (m[1, 2] + m[2, 1]) / s
            z = 0.25 * s
    return quat_normalize([w, x, y, z])


def quat_from_axis_angle(axis_angle):
    """Rotation vector (axis * angle, radians) -> quaternion."""
    v = np.asarray(axis_angle, dtype=FLOAT)
    angle = np.linalg.norm(v)
    if angle < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0], dtype=FLOAT)
    axis = v / angle
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) * axis))


def quat_rotate(q, v):
    """Rotate vector(s) v by quaternion q. v: (..., 3)."""
    return np.asarray(v, dtype=FLOAT) @ quat_to_matrix(q).T


def quat_angle_between(a, b):
    """Geodesic angle in degrees between two unit quaternions."""
    d = abs(float(np.dot(quat_normalize(a), quat_normalize(b))))
    d = min(d, 1.0)
    return float(np.degrees(2.0 * np.arccos(d)))


def rotation_about_axis(axis, angle_rad):
    axis = np.asarray(axis, dtype=FLOAT)
    axis = axis / np.linalg.norm(axis)
    return quat_to_matrix(quat_from_axis_angle(axis * angle_rad))


# ---------------------------------------------------------------------------
# camera


@dataclass(frozen=True)
class CameraPose:
    """Rigid camera transform plus pinhole intrinsics.

    position: camera center in world coordinates (meters).
    orientation: unit quaternion (w, x, y, z), camera-to-world.
    intrinsics: (fx, fy, cx, cy) in pixels.
    resolution: (W, H) in pixels.
    """

    position: np.ndarray
    orientation: np.ndarray
    intrinsics: tuple = (64.0, 64.0, 31.5, 31.5)
    resolution: tuple = (64, 64)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=FLOAT))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=FLOAT))
        self.validate()

    def validate(self):
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if self.orientation.shape != (4,):
            raise ValueError("orientation must be a quaternion (w, x, y, z)")
        if abs(np.linalg.norm(self.orientation) - 1.0) > 1e-9:
            raise ValueError("quaternion must be unit norm")
        fx, fy, cx, cy = self.intrinsics
        if fx <= 0 or fy <= 0:
            raise ValueError("focal lengths must be positive")
        w, h = self.resolution
        if w <= 0 or h <= 0:
            raise ValueError("resolution must be positive")

    @property
    def rotation(self):
        return quat_to_matrix(self.orientation)

    @property
    def forward(self):
        return self.rotation[:, 2]

    @property
    def right(self):
        return self.rotation[:, 0]

    @property
    def down(self):
        return self.rotation[:, 1]

    def with_pose(self, position, orientation):
        return replace(self, position=np.asarray(position, dtype=FLOAT),
                       orientation=quat_normalize(orientation))

    def ray_directions(self):
        """Unit ray direction per pixel, shape (H, W, 3), world frame."""
        fx, fy, cx, cy = self.intrinsics
        w, h = self.resolution
        u = np.arange(w, dtype=FLOAT)
        v = np.arange(h, dtype=FLOAT)
        uu, vv = np.meshgrid(u, v)
        d_cam = np.stack([(uu - cx) / fx, (vv - cy) / fy, np.ones_like(uu)], axis=-1)
        d_world = d_cam @ self.rotation.T
        return d_world / np.linalg.norm(d_world, axis=-1, keepdims=True)

    def project(self, points):
        """World points (..., 3) -> (u, v, depth_along_optical_axis)."""
        p = np.asarray(points, dtype=FLOAT) - self.position
        p_cam = p @ self.rotation  # R^T applied row-wise
        fx, fy, cx, cy = self.intrinsics
        z = p_cam[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = fx * p_cam[..., 0] / z + cx
            v = fy * p_cam[..., 1] / z + cy
        return u, v, z

    def unproject(self, u, v, depth):
        """Pixel coords + depth (along optical axis) -> world points."""
        fx, fy, cx, cy = self.intrinsics
        x = (np.asarray(u, dtype=FLOAT) - cx) / fx * depth
        y = (np.asarray(v, dtype=FLOAT) - cy) / fy * depth
        p_cam = np.stack([x, y, np.asarray(depth, dtype=FLOAT)], axis=-1)
        return p_cam @ self.rotation.T + self.position


def look_at(position, target, up_hint=(0.0, 0.0, 1.0)):
    """Orientation quaternion for a camera at ``position`` aimed at ``target``.

    Image up aligns with ``up_hint`` as closely as the aim allows (camera +y
    is down in the image).
    """
    position = np.asarray(position, dtype=FLOAT)
    target = np.asarray(target, dtype=FLOAT)
    f = target - position
    n = np.linalg.norm(f)
    if n < 1e-12:
        raise ValueError("camera position coincides with target")
    f = f / n
    up = np.asarray(up_hint, dtype=FLOAT)
    up = up / np.linalg.norm(up)
    if abs(np.dot(up, f)) > 1.0 - 1e-9:
        up = np.array([0.0, 1.0, 0.0]) if abs(f[2]) > 0.9 else np.array([0.0, 0.0, 1.0])
    right = np.cross(f, up)
    right /= np.linalg.norm(right)
    down = np.cross(f, right)
    m = np.stack([right, down, f], axis=1)
    return matrix_to_quat(m)


@dataclass(frozen=True)
class RigidTransform:
    """Pose of an object: rotation (quaternion) + translation."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=FLOAT))
        object.__setattr__(self, "orientation", quat_normalize(self.orientation))

    def apply(self, points):
        return quat_rotate(self.orientation, points) + self.position

    def inverse_apply(self, points):
        return quat_rotate(quat_conjugate(self.orientation),
                           np.asarray(points, dtype=FLOAT) - self.position)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return RigidTransform(
            position=quat_rotate(self.orientation, other.position) + self.position,
            orientation=quat_multiply(self.orientation, other.orientation),
        )

    def relative_to(self, base: "RigidTransform") -> "RigidTransform":
        """Transform t such that base ∘ t == self."""
        inv_q = quat_conjugate(base.orientation)
        return RigidTransform(
            position=quat_rotate(inv_q, self.position - base.position),
            orientation=quat_multiply(inv_q, self.orientation),
        )
