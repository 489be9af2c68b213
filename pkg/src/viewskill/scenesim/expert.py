"""Scripted expert controllers, meta-skill labeling, and demonstration capture."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import FLOAT
from .render import observe
from .scene import WorldConfig, drawer_handle_point, slider_handle_point
from .sim import Action, SimState, clamp_action, initial_state, step
from .tasks import (
    DRAWER_CLOSED,
    DRAWER_OPEN,
    SLIDER_RIGHT,
    TEMPLATES,
    SubtaskTemplate,
)

TRANSLATE, ROTATE, GRASP = "translate", "rotate", "grasp"
SKILLS = (TRANSLATE, ROTATE, GRASP)

TRAVEL_SPEED = 0.04
DESCEND_SPEED = 0.03
DRAG_SPEED = 0.018
YAW_RATE = 0.15


def label_meta_skills(actions, eps_trans=0.005, eps_rot=0.02,
                      dpos_max=0.05, drot_max=0.2, initial_gripper=-1.0):
    """One categorical label per action.

    Gripper-sign flips label as grasp; otherwise whichever of the
    normalized rotation/translation magnitudes dominates (rotation must
    also clear its dead-band) decides rotate vs translate.
    """
    labels = []
    prev = initial_gripper
    for a in actions:
        g = 1.0 if a.gripper >= 0 else -1.0
        if g != prev:
            labels.append(GRASP)
        else:
            nt = np.linalg.norm(a.dpos)
            nr = np.linalg.norm(a.drot)
            if nr / drot_max > nt / dpos_max and nr > eps_rot:
                labels.append(ROTATE)
            else:
                labels.append(TRANSLATE)
        prev = g
    return labels


@dataclass(frozen=True)
class Demonstration:
    instruction: str
    frames_in_hand: tuple
    frames_to_hand: tuple
    actions: tuple
    skill_labels: tuple
    success: bool

    def __post_init__(self):
        n = len(self.actions)
        if len(self.skill_labels) != n:
            raise ValueError("labels and actions must align")
        if self.frames_in_hand and (len(self.frames_in_hand) != n
                                    or len(self.frames_to_hand) != n):
            raise ValueError("frames and actions must align")

    def __len__(self):
        return len(self.actions)


# ---------------------------------------------------------------------------
# movement helpers


def _capped(delta, speed):
    delta = np.asarray(delta, dtype=FLOAT)
    n = np.linalg.norm(delta)
    if n > speed:
        return delta * (speed / n)
    return delta


def _wrap_angle(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _staged_approach(tip, target, clearance=0.06):
    """Rise, translate laterally, then descend. Returns (dpos, arrived)."""
    target = np.asarray(target, dtype=FLOAT)
    xy_dist = np.hypot(tip[0] - target[0], tip[1] - target[1])
    safe_z = target[2] + clearance
    if xy_dist > 0.012:
        if tip[2] < safe_z - 0.006:
            return _capped([0, 0, safe_z - tip[2]], TRAVEL_SPEED), False
        return _capped([target[0] - tip[0], target[1] - tip[1], safe_z - tip[2]],
                       TRAVEL_SPEED), False
    delta = target - tip
    if np.linalg.norm(delta) <= 0.010:
        return np.zeros(3), True
    return _capped(delta, DESCEND_SPEED), False


def _release_action(state):
    return Action(np.zeros(3), np.zeros(3), -1.0)


def _hold(gripper):
    return Action(np.zeros(3), np.zeros(3), gripper)


# ---------------------------------------------------------------------------
# per-template controllers; each returns a closure state -> Action


def _make_lift(color):
    name = f"{color}_block"

    def control(state: SimState):
        g = state.gripper_cmd
        if state.attached_name() == name:
            return Action(_capped([0, 0, 0.16 - state.tip[2]], TRAVEL_SPEED),
                          np.zeros(3), 1.0)
        if state.attached >= 0:
            return _release_action(state)
        obj = state.object_position(name)
        dpos, arrived = _staged_approach(state.tip, obj + np.array([0, 0, 0.004]))
        if arrived:
            return Action(np.zeros(3), np.zeros(3), 1.0)  # close
        return Action(dpos, np.zeros(3), -1.0)

    return control


def _make_push(color, direction):
    name = f"{color}_block"
    target_yaw = 0.0 if direction > 0 else np.pi

    def control(state: SimState):
        if state.attached >= 0:
            return _release_action(state)
        yaw_err = _wrap_angle(target_yaw - state.gripper_yaw())
        if abs(yaw_err) > 0.06:
            return Action(np.zeros(3),
                          np.array([0, 0, float(np.clip(yaw_err, -YAW_RATE, YAW_RATE))]),
                          -1.0)
        obj = state.object_position(name)
        spec = state.scene.object_by_name(name)
        behind = obj + np.array([-direction * (spec.footprint_radius + 0.022), 0.0, 0.0])
        behind[2] = obj[2]
        if np.linalg.norm(state.tip - behind) > 0.016:
            dpos, _ = _staged_approach(state.tip, behind, clearance=0.06)
            return Action(dpos, np.zeros(3), -1.0)
        return Action(np.array([direction * 0.02, 0.0, 0.0]), np.zeros(3), -1.0)

    return control


def _make_place():
    def control(state: SimState):
        held = state.attached_name()
        if held == "red_block":
            red = state.object_position("red_block")
            blue = state.object_position("blue_block")
            blue_top = blue[2] + state.scene.object_by_name("blue_block").half_height
            red_half = state.scene.object_by_name("red_block").half_height
            grasp_offset = red[:2] - state.tip[:2]
            target_xy = blue[:2] - grasp_offset
            place_z = blue_top + red_half + 0.006
            target = np.array([target_xy[0], target_xy[1], place_z])
            dpos, arrived = _staged_approach(state.tip, target, clearance=0.07)
            if arrived:
                return Action(np.zeros(3), np.zeros(3), -1.0)  # open to drop
            return Action(dpos, np.zeros(3), 1.0)
        if state.attached >= 0:
            return _release_action(state)
        obj = state.object_position("red_block")
        dpos, arrived = _staged_approach(state.tip, obj + np.array([0, 0, 0.004]))
        if arrived:
            return Action(np.zeros(3), np.zeros(3), 1.0)
        return Action(dpos, np.zeros(3), -1.0)

    return control


def _make_fixture(kind, opening):
    """Drag the drawer/slider handle along its axis. ``opening``: target high state."""

    def control(state: SimState):
        if state.attached >= 0:
            return _release_action(state)
        s = state.fixture_states[kind]
        if kind == "drawer":
            handle = drawer_handle_point(s)
            drag = np.array([0.0, -1.0, 0.0]) if opening else np.array([0.0, 1.0, 0.0])
            done = s >= 0.9 if opening else s <= 0.1
        else:
            handle = slider_handle_point(s)
            drag = np.array([1.0, 0.0, 0.0]) if opening else np.array([-1.0, 0.0, 0.0])
            done = s >= 0.9 if opening else s <= 0.1
        if done:
            return _hold(-1.0)
        if np.linalg.norm(state.tip - handle) > 0.032:
            dpos, _ = _staged_approach(state.tip, handle, clearance=0.055)
            return Action(dpos, np.zeros(3), -1.0)
        correction = _capped(handle - state.tip, 0.01)
        return Action(_capped(drag * DRAG_SPEED + correction, TRAVEL_SPEED),
                      np.zeros(3), -1.0)

    return control


def make_planner(template: SubtaskTemplate, scene):
    """Controller factory; raises KeyError if the task references absent objects."""
    name = template.name
    if name in ("lift_red", "lift_blue"):
        color = name.split("_")[1]
        scene.object_by_name(f"{color}_block")
        return _make_lift(color)
    if name == "push_red_left":
        scene.object_by_name("red_block")
        return _make_push("red", -1.0)
    if name == "push_blue_right":
        scene.object_by_name("blue_block")
        return _make_push("blue", +1.0)
    if name == "place_red_on_blue":
        scene.object_by_name("red_block")
        scene.object_by_name("blue_block")
        return _make_place()
    if name == "open_drawer":
        return _make_fixture("drawer", opening=True)
    if name == "close_drawer":
        return _make_fixture("drawer", opening=False)
    if name == "slider_right":
        return _make_fixture("slider", opening=True)
    raise KeyError(f"no planner for template {name}")


def _failure(template):
    return Demonstration(instruction=template.instruction, frames_in_hand=(),
                         frames_to_hand=(), actions=(), skill_labels=(), success=False)


def jittered_start_state(scene, rng, config: WorldConfig):
    base = np.asarray(config.start_pose, dtype=FLOAT)
    pos = base + np.array([rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03),
                           rng.uniform(-0.02, 0.02)])
    yaw = rng.uniform(-0.35, 0.35)
    return initial_state(scene, config, gripper_position=pos, gripper_yaw=yaw)


def run_expert(state: SimState, template: SubtaskTemplate,
               config: WorldConfig, max_steps=120, record_frames=True):
    """Drive the scripted controller until the predicate fires or steps run out.

    Returns (frames_to, frames_in, actions, success, final_state).
    """
    start = state.copy()
    try:
        control = make_planner(template, state.scene)
    except KeyError:
        return [], [], [], False, state
    if template.satisfied(state, start):
        return [], [], [], False, state
    frames_to, frames_in, actions = [], [], []
    success = False
    for _ in range(max_steps):
        if record_frames:
            f_to, f_in = observe(state, config)
            frames_to.append(f_to)
            frames_in.append(f_in)
        action = clamp_action(*_action_parts(control(state)), config)
        actions.append(action)
        state, _ = step(state, action, config)
        if template.satisfied(state, start):
            success = True
            break
    return frames_to, frames_in, actions, success, state


def _action_parts(a: Action):
    return a.dpos, a.drot, a.gripper


def script_demonstration(scene, task, rng, config: WorldConfig | None = None,
                         max_steps=120, record_frames=True) -> Demonstration:
    """Scripted expert episode for one subtask on one scene.

    ``task`` is a template name or SubtaskTemplate. The start pose is
    jittered from ``rng`` so the demo corpus covers varied approach states.
    Returns a failure-marked Demonstration when the planner cannot reach
    the goal (or the task references an absent object / starts satisfied).
    """
    config = config or WorldConfig()
    template = TEMPLATES[task] if isinstance(task, str) else task
    state = jittered_start_state(scene, rng, config)
    frames_to, frames_in, actions, success, _ = run_expert(
        state, template, config, max_steps=max_steps, record_frames=record_frames)
    if not actions and not success:
        return _failure(template)
    labels = label_meta_skills(actions, dpos_max=config.dpos_max,
                               drot_max=config.drot_max)
    return Demonstration(
        instruction=template.instruction,
        frames_in_hand=tuple(frames_in),
        frames_to_hand=tuple(frames_to),
        actions=tuple(actions),
        skill_labels=tuple(labels),
        success=success,
    )


def replay_demonstration(scene, demo: Demonstration, start_state: SimState,
                         config: WorldConfig | None = None):
    """Re-simulate recorded actions from the given start state.

    Returns True when the demo's template predicate holds at some step.
    """
    config = config or WorldConfig()
    template = next(t for t in TEMPLATES.values() if t.instruction == demo.instruction)
    state = start_state.copy()
    start = state.copy()
    for action in demo.actions:
        state, _ = step(state, action, config)
        if template.satisfied(state, start):
            return True
    return False
