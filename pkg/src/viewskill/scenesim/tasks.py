"""Language-conditioned subtask templates, success predicates, and task chains.

A subtask succeeds when its predicate turns true during the attempt; tasks
already satisfied when the attempt starts count as failures (nothing to
demonstrate). Chains hold five subtasks sampled without immediate
repetition; the initial scene is adjusted so the first subtask is always
achievable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import SceneSpec, WorldConfig, generate_scene
from .sim import SimState

LIFT_HEIGHT = 0.09
PUSH_DISTANCE = 0.05
STACK_XY_TOL = 0.03
DRAWER_OPEN = 0.7
DRAWER_CLOSED = 0.3
SLIDER_RIGHT = 0.75


def _lift_pred(color):
    def pred(state: SimState, start: SimState):
        name = f"{color}_block"
        return (state.attached_name() == name
                and state.object_position(name)[2] >= LIFT_HEIGHT)

    return pred


def _push_pred(color, direction):
    def pred(state: SimState, start: SimState):
        name = f"{color}_block"
        dx = state.object_position(name)[0] - start.object_position(name)[0]
        return direction * dx >= PUSH_DISTANCE

    return pred


def _place_pred(state: SimState, start: SimState):
    red = state.object_position("red_block")
    blue = state.object_position("blue_block")
    return (state.attached_name() != "red_block"
            and np.hypot(red[0] - blue[0], red[1] - blue[1]) <= STACK_XY_TOL
            and red[2] > blue[2] + 0.01)


def _drawer_open_pred(state, start):
    return state.fixture_states["drawer"] >= DRAWER_OPEN


def _drawer_close_pred(state, start):
    return state.fixture_states["drawer"] <= DRAWER_CLOSED


def _slider_right_pred(state, start):
    return state.fixture_states["slider"] >= SLIDER_RIGHT


@dataclass(frozen=True)
class SubtaskTemplate:
    name: str
    instruction: str
    predicate: object  # (state, start_state) -> bool

    def satisfied(self, state, start):
        return bool(self.predicate(state, start))


TEMPLATES = {
    "lift_red": SubtaskTemplate("lift_red", "lift the red block", _lift_pred("red")),
    "lift_blue": SubtaskTemplate("lift_blue", "lift the blue block", _lift_pred("blue")),
    "push_red_left": SubtaskTemplate(
        "push_red_left", "push the red block to the left", _push_pred("red", -1.0)),
    "push_blue_right": SubtaskTemplate(
        "push_blue_right", "push the blue block to the right", _push_pred("blue", +1.0)),
    "place_red_on_blue": SubtaskTemplate(
        "place_red_on_blue", "place the red block on the blue block", _place_pred),
    "open_drawer": SubtaskTemplate("open_drawer", "open the drawer", _drawer_open_pred),
    "close_drawer": SubtaskTemplate("close_drawer", "close the drawer", _drawer_close_pred),
    "slider_right": SubtaskTemplate(
        "slider_right", "move the slider to the right", _slider_right_pred),
}

DEFAULT_POOL = tuple(TEMPLATES)
CHAIN_LENGTH = 5


@dataclass(frozen=True)
class TaskChain:
    seed: int
    subtasks: tuple  # of template names
    scene: SceneSpec

    def __post_init__(self):
        if len(self.subtasks) != CHAIN_LENGTH:
            raise ValueError(f"a chain holds exactly {CHAIN_LENGTH} subtasks")

    def templates(self):
        return [TEMPLATES[n] for n in self.subtasks]


def prepare_scene_for_task(scene: SceneSpec, task: str, rng) -> SceneSpec:
    """Adjust fixture states so ``task`` starts unsatisfied and solvable."""
    if task == "open_drawer":
        scene = scene.with_fixture_state("drawer", float(rng.uniform(0.0, 0.25)))
    elif task == "close_drawer":
        scene = scene.with_fixture_state("drawer", float(rng.uniform(0.75, 1.0)))
    elif task == "slider_right":
        scene = scene.with_fixture_state("slider", float(rng.uniform(0.05, 0.45)))
    return scene


def make_task_chain(seed: int, pool=DEFAULT_POOL, config: WorldConfig | None = None,
                    scene_seed_offset: int = 10_000) -> TaskChain:
    """Sample a 5-subtask chain without immediate repetition, deterministic per seed."""
    pool = tuple(pool)
    if not pool:
        raise ValueError("subtask pool is empty")
    if len(pool) < 2:
        raise ValueError("pool must hold at least 2 templates to avoid repetition")
    for name in pool:
        if name not in TEMPLATES:
            raise KeyError(f"unknown subtask template: {name}")
    rng = np.random.default_rng(np.random.PCG64(2 * int(seed) + 101))
    subtasks = []
    for _ in range(CHAIN_LENGTH):
        candidates = [n for n in pool if not subtasks or n != subtasks[-1]]
        subtasks.append(str(rng.choice(candidates)))
    scene = generate_scene(int(seed) + scene_seed_offset, config)
    scene = prepare_scene_for_task(scene, subtasks[0], rng)
    return TaskChain(seed=int(seed), subtasks=tuple(subtasks), scene=scene)
