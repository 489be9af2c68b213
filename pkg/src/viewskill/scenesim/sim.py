"""Kinematic point-gripper simulation over a generated scene.

No contact dynamics: the gripper flies freely, grasping attaches the nearest
object within reach, released objects settle onto their support, fixture
handles drag on contact, and moving the gripper body through an object
pushes it aside in the plane. All updates are pure functions of
(state, action).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import (
    FLOAT,
    RigidTransform,
    quat_from_axis_angle,
    quat_multiply,
    quat_normalize,
    quat_to_matrix,
)
from .scene import SceneSpec, WorldConfig, fixture_axis, fixture_handle_point, fixture_travel

# gripper base orientation: fingers point down (camera forward = -z),
# image up faces the back of the table (+y)
GRIPPER_DOWN_QUAT = np.array([0.0, 1.0, 0.0, 0.0], dtype=FLOAT)


@dataclass(frozen=True)
class Action:
    """7-DoF relative command: position delta, axis-angle rotation delta, gripper."""

    dpos: np.ndarray
    drot: np.ndarray
    gripper: float  # -1 open, +1 close

    def __post_init__(self):
        object.__setattr__(self, "dpos", np.asarray(self.dpos, dtype=FLOAT))
        object.__setattr__(self, "drot", np.asarray(self.drot, dtype=FLOAT))
        object.__setattr__(self, "gripper", float(self.gripper))

    def validate(self, config: WorldConfig):
        if self.dpos.shape != (3,) or self.drot.shape != (3,):
            raise ValueError("dpos/drot must be 3-vectors")
        if np.linalg.norm(self.dpos) > config.dpos_max + 1e-9:
            raise ValueError("|dpos| exceeds limit")
        if np.linalg.norm(self.drot) > config.drot_max + 1e-9:
            raise ValueError("|drot| exceeds limit")
        if self.gripper not in (-1.0, 1.0):
            raise ValueError("gripper must be -1 or +1")

    def as_vector(self):
        return np.concatenate([self.dpos, self.drot, [self.gripper]])

    @staticmethod
    def from_vector(v):
        v = np.asarray(v, dtype=FLOAT)
        return Action(dpos=v[:3], drot=v[3:6], gripper=v[6])

    @staticmethod
    def zero(gripper=-1.0):
        return Action(np.zeros(3), np.zeros(3), gripper)


def clamp_action(dpos, drot, gripper, config: WorldConfig) -> Action:
    """Scale the deltas into the per-step limits and binarize the gripper."""
    dpos = np.asarray(dpos, dtype=FLOAT)
    drot = np.asarray(drot, dtype=FLOAT)
    np_norm = np.linalg.norm(dpos)
    if np_norm > config.dpos_max:
        dpos = dpos * (config.dpos_max / np_norm)
    nr = np.linalg.norm(drot)
    if nr > config.drot_max:
        drot = drot * (config.drot_max / nr)
    return Action(dpos, drot, 1.0 if gripper >= 0 else -1.0)


@dataclass
class SimState:
    scene: SceneSpec
    gripper: RigidTransform
    gripper_cmd: float  # last commanded gripper sign
    object_poses: list  # RigidTransform per scene object
    fixture_states: dict  # name -> float
    attached: int = -1  # object index, -1 when empty
    attach_rel: RigidTransform | None = None
    time: int = 0

    def copy(self):
        return SimState(
            scene=self.scene,
            gripper=self.gripper,
            gripper_cmd=self.gripper_cmd,
            object_poses=list(self.object_poses),
            fixture_states=dict(self.fixture_states),
            attached=self.attached,
            attach_rel=self.attach_rel,
            time=self.time,
        )

    def object_position(self, name):
        for i, o in enumerate(self.scene.objects):
            if o.name == name:
                return self.object_poses[i].position
        raise KeyError(name)

    def attached_name(self):
        if self.attached < 0:
            return None
        return self.scene.objects[self.attached].name

    @property
    def tip(self):
        return self.gripper.position

    def gripper_yaw(self):
        """Rotation of the gripper about world z relative to the base (down) pose."""
        r = quat_to_matrix(self.gripper.orientation)
        right = r[:, 0]
        return float(np.arctan2(right[1], right[0]))


def initial_state(scene: SceneSpec, config: WorldConfig | None = None,
                  gripper_position=None, gripper_yaw=0.0) -> SimState:
    config = config or WorldConfig()
    pos = np.asarray(gripper_position if gripper_position is not None
                     else config.start_pose, dtype=FLOAT)
    q = quat_multiply(quat_from_axis_angle([0, 0, gripper_yaw]), GRIPPER_DOWN_QUAT)
    return SimState(
        scene=scene,
        gripper=RigidTransform(pos, quat_normalize(q)),
        gripper_cmd=-1.0,
        object_poses=[o.pose for o in scene.objects],
        fixture_states={f.name: f.state for f in scene.fixtures},
        attached=-1,
        attach_rel=None,
        time=0,
    )


def _segment_point_dist(a, b, p):
    """Distance from point p to segment [a, b], all 2D."""
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def _resting_height(state: SimState, idx: int, xy) -> float:
    obj = state.scene.objects[idx]
    support = 0.0
    for j, other in enumerate(state.scene.objects):
        if j == idx:
            continue
        p = state.object_poses[j].position
        reach = 0.8 * (obj.footprint_radius + other.footprint_radius)
        if np.hypot(p[0] - xy[0], p[1] - xy[1]) < reach:
            support = max(support, p[2] + other.half_height)
    return support + obj.half_height


def step(state: SimState, action: Action, config: WorldConfig | None = None):
    """Advance one timestep. Returns (new_state, events)."""
    config = config or WorldConfig()
    events = []
    new = state.copy()

    dpos = np.asarray(action.dpos, dtype=FLOAT)
    drot = np.asarray(action.drot, dtype=FLOAT)
    n = np.linalg.norm(dpos)
    if n > config.dpos_max + 1e-12:
        dpos = dpos * (config.dpos_max / n)
        events.append("clamped_dpos")
    n = np.linalg.norm(drot)
    if n > config.drot_max + 1e-12:
        drot = drot * (config.drot_max / n)
        events.append("clamped_drot")

    old_tip = state.tip
    pos = old_tip + dpos
    x0, x1, y0, y1, z0, z1 = config.workspace
    clamped = np.clip(pos, [x0, y0, z0], [x1, y1, z1])
    if not np.allclose(clamped, pos):
        events.append("clamped_workspace")
    pos = clamped
    quat = quat_normalize(quat_multiply(quat_from_axis_angle(drot),
                                        state.gripper.orientation))
    new.gripper = RigidTransform(pos, quat)
    actual_dpos = pos - old_tip

    # attached object follows the gripper
    if new.attached >= 0:
        new.object_poses[new.attached] = new.gripper.compose(new.attach_rel)

    # fixture drag: handle contact transfers gripper motion along the axis
    for name in ("drawer", "slider"):
        if name not in new.fixture_states:
            continue
        s = new.fixture_states[name]
        handle = fixture_handle_point(name, s)
        if np.linalg.norm(pos - handle) <= config.handle_radius:
            delta = float(np.dot(actual_dpos, fixture_axis(name))) / fixture_travel(name)
            if delta != 0.0:
                new.fixture_states[name] = float(np.clip(s + delta, 0.0, 1.0))
                if new.fixture_states[name] != s:
                    events.append(f"fixture:{name}")
    if "button" in new.fixture_states:
        if np.linalg.norm(pos - fixture_handle_point("button", 0.0)) <= 0.03:
            if new.fixture_states["button"] != 1.0:
                new.fixture_states["button"] = 1.0
                events.append("fixture:button")

    # plane pushing: horizontal-dominant gripper motion sweeping into an
    # unattached object displaces it (vertical descents straddle for grasping)
    move_xy = actual_dpos[:2]
    if np.linalg.norm(move_xy) > max(abs(actual_dpos[2]), 1e-4):
        for i, obj in enumerate(new.scene.objects):
            if i == new.attached:
                continue
            p = new.object_poses[i].position
            if abs(pos[2] - p[2]) > obj.half_height + 0.02:
                continue
            min_dist = obj.footprint_radius + config.gripper_body_radius
            if _segment_point_dist(old_tip[:2], pos[:2], p[:2]) < min_dist:
                d = p[:2] - pos[:2]
                n_d = np.linalg.norm(d)
                direction = d / n_d if n_d > 1e-9 else move_xy / np.linalg.norm(move_xy)
                moved = p.copy()
                moved[:2] = pos[:2] + direction * min_dist
                ext_x, ext_y = new.scene.table_extent
                moved[0] = np.clip(moved[0], -ext_x / 2, ext_x / 2)
                moved[1] = np.clip(moved[1], -ext_y / 2, ext_y / 2)
                new.object_poses[i] = RigidTransform(moved,
                                                     new.object_poses[i].orientation)
                events.append(f"pushed:{obj.name}")

    # gripper command transitions
    cmd = 1.0 if action.gripper >= 0 else -1.0
    if cmd != state.gripper_cmd:
        if cmd > 0:  # closing
            best, best_d = -1, np.inf
            for i, obj in enumerate(new.scene.objects):
                d = np.linalg.norm(new.object_poses[i].position - pos)
                if d < best_d:
                    best, best_d = i, d
            if best >= 0 and best_d <= config.grasp_radius:
                new.attached = best
                new.attach_rel = new.object_poses[best].relative_to(new.gripper)
                events.append(f"grasped:{new.scene.objects[best].name}")
            else:
                events.append("grasp_miss")
        else:  # opening
            if new.attached >= 0:
                i = new.attached
                p = new.object_poses[i].position.copy()
                p[2] = _resting_height(new, i, p[:2])
                new.object_poses[i] = RigidTransform(p, new.object_poses[i].orientation)
                events.append(f"released:{new.scene.objects[i].name}")
                new.attached = -1
                new.attach_rel = None
    new.gripper_cmd = cmd
    new.time = state.time + 1
    return new, events
