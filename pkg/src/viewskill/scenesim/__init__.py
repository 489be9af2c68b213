from .scene import (
    FixtureSpec,
    ObjectSpec,
    PALETTE,
    PlacementError,
    SceneSpec,
    WorldConfig,
    generate_scene,
)
from .render import FrameObservation, in_hand_camera, observe, render, to_hand_camera
from .sim import Action, SimState, clamp_action, initial_state, step
from .tasks import CHAIN_LENGTH, DEFAULT_POOL, TEMPLATES, SubtaskTemplate, TaskChain, make_task_chain
from .expert import (
    Demonstration,
    GRASP,
    ROTATE,
    SKILLS,
    TRANSLATE,
    jittered_start_state,
    label_meta_skills,
    make_planner,
    replay_demonstration,
    run_expert,
    script_demonstration,
)

__all__ = [
    "Action", "CHAIN_LENGTH", "DEFAULT_POOL", "Demonstration", "FixtureSpec",
    "FrameObservation", "GRASP", "ObjectSpec", "PALETTE", "PlacementError",
    "ROTATE", "SKILLS", "SceneSpec", "SimState", "SubtaskTemplate", "TEMPLATES",
    "TRANSLATE", "TaskChain", "WorldConfig", "clamp_action", "generate_scene",
    "in_hand_camera", "initial_state", "jittered_start_state", "label_meta_skills",
    "make_planner", "make_task_chain", "observe", "render", "replay_demonstration",
    "run_expert", "script_demonstration", "step", "to_hand_camera",
]
