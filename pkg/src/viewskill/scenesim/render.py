"""Analytic ray-cast rendering of scenes and simulator states.

Flat-shaded Lambertian primitives (oriented boxes, spheres, capped
cylinders) at low resolution. Depth is Euclidean distance along the pixel
ray; pixels that hit nothing get the background color and depth 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..geometry import FLOAT, CameraPose, look_at, quat_to_matrix
from .scene import (
    BOX,
    BUTTON_CENTER,
    BUTTON_RADIUS,
    CYLINDER,
    DRAWER_BODY_CENTER,
    DRAWER_BODY_HALF,
    DRAWER_TRAVEL,
    SLIDER_RAIL_CENTER,
    SLIDER_RAIL_HALF,
    SPHERE,
    SceneSpec,
    WorldConfig,
    slider_handle_point,
)
from .sim import SimState, initial_state

_EPS = 1e-7


@dataclass(frozen=True)
class FrameObservation:
    """One camera's RGB-D capture at one timestep."""

    rgb: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) meters along the ray, 0 = nothing hit
    pose: CameraPose
    timestep: int = 0

    def __post_init__(self):
        w, h = self.pose.resolution
        if self.rgb.shape != (h, w, 3):
            raise ValueError("rgb shape inconsistent with pose.resolution")
        if self.depth.shape != (h, w):
            raise ValueError("depth shape inconsistent with pose.resolution")
        if self.rgb.min() < -1e-9 or self.rgb.max() > 1 + 1e-9:
            raise ValueError("rgb values must lie in [0, 1]")
        if self.depth.min() < 0:
            raise ValueError("depth must be non-negative")


@dataclass(frozen=True)
class Primitive:
    kind: str
    center: np.ndarray
    params: tuple  # box: (hx, hy, hz); sphere: (r,); cylinder: (r, half_h)
    color: np.ndarray
    rotation: np.ndarray  # 3x3, local-to-world


def _prim(kind, center, params, color, quat=None):
    rot = quat_to_matrix(quat) if quat is not None else np.eye(3)
    return Primitive(kind, np.asarray(center, dtype=FLOAT), tuple(params),
                     np.asarray(color, dtype=FLOAT), rot)


@lru_cache(maxsize=8)
def _camera_frame_dirs(intrinsics, resolution):
    fx, fy, cx, cy = intrinsics
    w, h = resolution
    uu, vv = np.meshgrid(np.arange(w, dtype=FLOAT), np.arange(h, dtype=FLOAT))
    d = np.stack([(uu - cx) / fx, (vv - cy) / fy, np.ones_like(uu)], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def _intersect_sphere(o, d, prim):
    oc = o - prim.center
    r = prim.params[0]
    b = d @ oc
    c0 = oc @ oc - r * r
    disc = b * b - c0
    ok = disc > 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t = np.where(ok, -b - sq, np.inf)
    t2 = np.where(ok, -b + sq, np.inf)
    t = np.where(t > _EPS, t, np.where(t2 > _EPS, t2, np.inf))
    hit = o + t[..., None] * d
    normal = (hit - prim.center) / r
    return t, normal


def _intersect_box(o, d, prim):
    rot = prim.rotation
    half = np.asarray(prim.params, dtype=FLOAT)
    ol = (o - prim.center) @ rot
    dl = d @ rot
    dl_safe = np.where(np.abs(dl) < 1e-12, 1e-12, dl)
    t1 = (-half - ol) / dl_safe
    t2 = (half - ol) / dl_safe
    tnear = np.minimum(t1, t2)
    tfar = np.maximum(t1, t2)
    tmin = tnear.max(axis=-1)
    tmax = tfar.min(axis=-1)
    valid = (tmax >= tmin) & (tmax > _EPS)
    t = np.where(tmin > _EPS, tmin, tmax)
    t = np.where(valid, t, np.inf)
    axis = np.argmax(tnear, axis=-1)
    onehot = np.eye(3)[axis]
    normal_local = -np.sign(np.take_along_axis(dl_safe, axis[..., None], -1)) * onehot
    normal = normal_local @ rot.T
    return t, normal


def _intersect_cylinder(o, d, prim):
    rot = prim.rotation
    r, hh = prim.params
    ol = (o - prim.center) @ rot
    dl = d @ rot
    a = dl[..., 0] ** 2 + dl[..., 1] ** 2
    b = ol[0] * dl[..., 0] + ol[1] * dl[..., 1]
    c0 = ol[0] ** 2 + ol[1] ** 2 - r * r
    disc = b * b - a * c0
    ok = (disc > 0) & (a > 1e-14)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    a_safe = np.where(a > 1e-14, a, 1.0)
    t_side = np.where(ok, (-b - sq) / a_safe, np.inf)
    z_side = ol[2] + t_side * dl[..., 2]
    t_side = np.where((t_side > _EPS) & (np.abs(z_side) <= hh), t_side, np.inf)

    dz = np.where(np.abs(dl[..., 2]) < 1e-12, 1e-12, dl[..., 2])
    best_cap = np.full(t_side.shape, np.inf)
    cap_sign = np.zeros(t_side.shape)
    for sign in (1.0, -1.0):
        t_cap = (sign * hh - ol[2]) / dz
        x = ol[0] + t_cap * dl[..., 0]
        y = ol[1] + t_cap * dl[..., 1]
        t_cap = np.where((t_cap > _EPS) & (x * x + y * y <= r * r), t_cap, np.inf)
        take = t_cap < best_cap
        best_cap = np.where(take, t_cap, best_cap)
        cap_sign = np.where(take, sign, cap_sign)

    use_side = t_side <= best_cap
    t = np.where(use_side, t_side, best_cap)
    t_safe = np.where(np.isfinite(t), t, 0.0)
    hit_local = ol + t_safe[..., None] * dl
    n_side = np.stack([hit_local[..., 0] / r, hit_local[..., 1] / r,
                       np.zeros_like(t)], axis=-1)
    n_cap = np.stack([np.zeros_like(t), np.zeros_like(t), cap_sign], axis=-1)
    normal_local = np.where(use_side[..., None], n_side, n_cap)
    normal = normal_local @ rot.T
    return t, normal


_INTERSECT = {BOX: _intersect_box, SPHERE: _intersect_sphere, CYLINDER: _intersect_cylinder}


def _table_primitives(extent):
    ex, ey = extent
    return [_prim(BOX, (0, 0, -0.012), (ex / 2, ey / 2, 0.012), (0.78, 0.70, 0.56))]


def _fixture_primitives(fixture_states):
    prims = []
    if "drawer" in fixture_states:
        s = fixture_states["drawer"]
        cx, cy, cz = DRAWER_BODY_CENTER
        hx, hy, hz = DRAWER_BODY_HALF
        prims.append(_prim(BOX, (cx, cy, cz), (hx, hy, hz), (0.36, 0.34, 0.32)))
        y_front = cy - hy - s * DRAWER_TRAVEL
        prims.append(_prim(BOX, (cx, y_front - 0.006, cz), (hx, 0.006, hz),
                           (0.48, 0.44, 0.40)))
        prims.append(_prim(BOX, (cx, y_front - 0.020, cz), (0.014, 0.009, 0.011),
                           (0.12, 0.12, 0.14)))
    if "slider" in fixture_states:
        s = fixture_states["slider"]
        prims.append(_prim(BOX, SLIDER_RAIL_CENTER, SLIDER_RAIL_HALF, (0.30, 0.30, 0.33)))
        hp = slider_handle_point(s)
        prims.append(_prim(BOX, hp, (0.018, 0.018, 0.018), (0.92, 0.56, 0.10)))
    if "button" in fixture_states:
        s = fixture_states["button"]
        cx, cy, cz = BUTTON_CENTER
        prims.append(_prim(CYLINDER, (cx, cy, cz - 0.004 * s), (BUTTON_RADIUS, 0.008),
                           (0.30, 0.32, 0.38)))
    return prims


def _gripper_primitives(state: SimState):
    g = state.gripper
    closed = state.gripper_cmd > 0
    sep = 0.0065 if closed else 0.014
    color = (0.22, 0.23, 0.26)
    prims = [_prim(BOX, g.apply(np.array([0.0, 0.0, -0.020])), (0.016, 0.010, 0.008),
                   color, g.orientation)]
    for side in (-1.0, 1.0):
        prims.append(_prim(BOX, g.apply(np.array([side * sep, 0.0, -0.004])),
                           (0.0035, 0.0075, 0.012), color, g.orientation))
    return prims


def build_primitives(state: SimState, include_gripper=True):
    prims = _table_primitives(state.scene.table_extent)
    for obj, pose in zip(state.scene.objects, state.object_poses):
        prims.append(_prim(obj.shape, pose.position, obj.size, obj.color,
                           pose.orientation))
    prims.extend(_fixture_primitives(state.fixture_states))
    if include_gripper:
        prims.extend(_gripper_primitives(state))
    return prims


def render_primitives(prims, camera: CameraPose, config: WorldConfig | None = None,
                      timestep=0) -> FrameObservation:
    config = config or WorldConfig()
    camera.validate()
    dirs = _camera_frame_dirs(tuple(camera.intrinsics), tuple(camera.resolution))
    d = dirs @ camera.rotation.T
    o = camera.position

    w, h = camera.resolution
    best_t = np.full((h, w), np.inf)
    best_color = np.broadcast_to(np.asarray(config.background, dtype=FLOAT),
                                 (h, w, 3)).copy()
    best_normal = np.zeros((h, w, 3))
    for prim in prims:
        t, normal = _INTERSECT[prim.kind](o, d, prim)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_color = np.where(closer[..., None], prim.color, best_color)
        best_normal = np.where(closer[..., None], normal, best_normal)

    hit = np.isfinite(best_t)
    light = np.asarray(config.light_dir, dtype=FLOAT)
    light = light / np.linalg.norm(light)
    lambert = np.clip(best_normal @ light, 0.0, 1.0)
    shade = config.ambient + (1.0 - config.ambient) * lambert
    rgb = np.where(hit[..., None], best_color * shade[..., None], best_color)
    rgb = np.clip(rgb, 0.0, 1.0)
    depth = np.where(hit, best_t, 0.0)
    return FrameObservation(rgb=rgb, depth=depth, pose=camera, timestep=timestep)


def render(scene_or_state, camera: CameraPose, config: WorldConfig | None = None,
           include_gripper=None) -> FrameObservation:
    """Render a SceneSpec (static, no gripper) or a SimState (with gripper)."""
    config = config or WorldConfig()
    if isinstance(scene_or_state, SceneSpec):
        state = initial_state(scene_or_state, config)
        include_gripper = False if include_gripper is None else include_gripper
        timestep = 0
    else:
        state = scene_or_state
        include_gripper = True if include_gripper is None else include_gripper
        timestep = state.time
    prims = build_primitives(state, include_gripper=include_gripper)
    return render_primitives(prims, camera, config, timestep=timestep)


def to_hand_camera(config: WorldConfig | None = None) -> CameraPose:
    config = config or WorldConfig()
    pos = np.asarray(config.to_hand_position, dtype=FLOAT)
    return CameraPose(
        position=pos,
        orientation=look_at(pos, config.to_hand_target),
        intrinsics=config.camera_intrinsics(),
        resolution=(config.resolution, config.resolution),
    )


def in_hand_camera(state: SimState, config: WorldConfig | None = None) -> CameraPose:
    """Wrist camera: rigidly mounted behind the gripper tip, aligned with it."""
    config = config or WorldConfig()
    g = state.gripper
    forward = quat_to_matrix(g.orientation)[:, 2]
    return CameraPose(
        position=g.position - config.in_hand_setback * forward,
        orientation=g.orientation,
        intrinsics=config.camera_intrinsics(),
        resolution=(config.resolution, config.resolution),
    )


def observe(state: SimState, config: WorldConfig | None = None):
    """Render the fixed and wrist cameras. Returns (to_hand, in_hand) frames."""
    config = config or WorldConfig()
    frame_to = render(state, to_hand_camera(config), config)
    frame_in = render(state, in_hand_camera(state, config), config)
    return frame_to, frame_in
