"""Procedural tabletop scenes: primitive objects plus drawer/slider/button fixtures."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..geometry import FLOAT, RigidTransform, quat_from_axis_angle

BOX = "box"
SPHERE = "sphere"
CYLINDER = "cylinder"

PALETTE = {
    "red": (0.85, 0.10, 0.10),
    "green": (0.10, 0.65, 0.15),
    "blue": (0.12, 0.25, 0.85),
    "yellow": (0.90, 0.80, 0.10),
    "purple": (0.55, 0.15, 0.65),
    "cyan": (0.10, 0.70, 0.75),
}


class PlacementError(ValueError):
    """Requested objects cannot be placed on the table."""


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    shape: str  # box | sphere | cylinder
    size: tuple  # box: (hx, hy, hz); sphere: (r,); cylinder: (r, half_h)
    color: tuple
    pose: RigidTransform

    @property
    def footprint_radius(self):
        if self.shape == BOX:
            return float(np.hypot(self.size[0], self.size[1]))
        return float(self.size[0])

    @property
    def half_height(self):
        if self.shape == BOX:
            return float(self.size[2])
        if self.shape == SPHERE:
            return float(self.size[0])
        return float(self.size[1])


@dataclass(frozen=True)
class FixtureSpec:
    name: str  # drawer | slider | button
    state: float  # in [0, 1]


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    objects: tuple
    fixtures: tuple
    table_extent: tuple

    def object_by_name(self, name):
        for o in self.objects:
            if o.name == name:
                return o
        raise KeyError(name)

    def fixture_state(self, name):
        for f in self.fixtures:
            if f.name == name:
                return f.state
        raise KeyError(name)

    def with_fixture_state(self, name, state):
        fixtures = tuple(
            replace(f, state=float(state)) if f.name == name else f for f in self.fixtures
        )
        return replace(self, fixtures=fixtures)


@dataclass
class WorldConfig:
    """Generation, simulation, and camera parameters for the tabletop world."""

    table_extent: tuple = (0.6, 0.6)
    # object spawning
    n_objects_min: int = 3
    n_objects_max: int = 5
    mandatory_blocks: tuple = ("red", "blue")
    distractor_colors: tuple = ("green", "yellow", "purple", "cyan")
    shapes: tuple = (BOX, SPHERE, CYLINDER)
    block_half_extent: float = 0.019
    size_jitter: float = 0.15  # relative
    spawn_region: tuple = (-0.20, 0.20, -0.20, 0.06)  # x0, x1, y0, y1
    slot_jitter: float = 0.008
    fill_limit: float = 0.45  # max fraction of spawn area covered by footprints
    fixtures_enabled: bool = True
    # action limits / gripper
    dpos_max: float = 0.05
    drot_max: float = 0.2
    grasp_radius: float = 0.032
    handle_radius: float = 0.042
    gripper_body_radius: float = 0.012
    workspace: tuple = (-0.28, 0.28, -0.30, 0.30, 0.012, 0.30)
    start_pose: tuple = (0.0, -0.06, 0.17)
    # cameras
    resolution: int = 64
    focal: float = 64.0
    to_hand_position: tuple = (0.02, -0.50, 0.42)
    to_hand_target: tuple = (0.0, 0.04, 0.02)
    in_hand_setback: float = 0.05
    # rendering
    background: tuple = (0.93, 0.94, 0.96)
    light_dir: tuple = (0.35, -0.45, 0.82)
    ambient: float = 0.35

    def camera_intrinsics(self):
        c = (self.resolution - 1) / 2.0
        return (self.focal, self.focal, c, c)

    def spawn_area(self):
        x0, x1, y0, y1 = self.spawn_region
        return (x1 - x0) * (y1 - y0)


# fixture geometry constants (world frame); state parameterizes the moving part
DRAWER_BODY_CENTER = (-0.17, 0.215, 0.035)
DRAWER_BODY_HALF = (0.075, 0.055, 0.035)
DRAWER_TRAVEL = 0.10
DRAWER_AXIS = (0.0, -1.0, 0.0)  # opening direction
SLIDER_RAIL_CENTER = (0.05, 0.26, 0.008)
SLIDER_RAIL_HALF = (0.13, 0.010, 0.008)
SLIDER_TRAVEL = 0.20
SLIDER_X0 = -0.06
SLIDER_AXIS = (1.0, 0.0, 0.0)
BUTTON_CENTER = (0.24, 0.16, 0.010)
BUTTON_RADIUS = 0.024


def drawer_handle_point(state):
    cx, cy, cz = DRAWER_BODY_CENTER
    y_front = cy - DRAWER_BODY_HALF[1] - state * DRAWER_TRAVEL
    return np.array([cx, y_front - 0.022, cz], dtype=FLOAT)


def slider_handle_point(state):
    x = SLIDER_X0 + state * SLIDER_TRAVEL
    return np.array([x, SLIDER_RAIL_CENTER[1], 0.034], dtype=FLOAT)


def fixture_handle_point(name, state):
    if name == "drawer":
        return drawer_handle_point(state)
    if name == "slider":
        return slider_handle_point(state)
    if name == "button":
        return np.array(BUTTON_CENTER, dtype=FLOAT) + np.array([0, 0, 0.008])
    raise KeyError(name)


def fixture_axis(name):
    if name == "drawer":
        return np.array(DRAWER_AXIS, dtype=FLOAT)
    if name == "slider":
        return np.array(SLIDER_AXIS, dtype=FLOAT)
    raise KeyError(name)


def fixture_travel(name):
    return {"drawer": DRAWER_TRAVEL, "slider": SLIDER_TRAVEL}[name]


def _grid_slots(config: WorldConfig, pitch):
    x0, x1, y0, y1 = config.spawn_region
    nx = max(1, int((x1 - x0) / pitch))
    ny = max(1, int((y1 - y0) / pitch))
    xs = np.linspace(x0 + pitch / 2, x1 - pitch / 2, nx)
    ys = np.linspace(y0 + pitch / 2, y1 - pitch / 2, ny)
    return [(x, y) for y in ys for x in xs]


def _object_size(shape, base, rng, jitter):
    scale = 1.0 + jitter * rng.uniform(-1.0, 1.0)
    s = base * scale
    if shape == BOX:
        return (s, s, s)
    if shape == SPHERE:
        return (s,)
    return (s * 0.9, s)  # cylinder: radius, half height


def generate_scene(seed: int, config: WorldConfig | None = None) -> SceneSpec:
    """Deterministically generate a tabletop scene for ``seed``.

    Raises PlacementError when the requested object count cannot fit the
    spawn region (by footprint-area accounting or slot exhaustion).
    """
    config = config or WorldConfig()
    rng = np.random.default_rng(np.random.PCG64(int(seed) * 2 + 1))

    n_objects = int(rng.integers(config.n_objects_min, config.n_objects_max + 1))
    n_objects = max(n_objects, len(config.mandatory_blocks))

    max_diameter = 2 * config.block_half_extent * (1 + config.size_jitter) * 1.5
    pitch = max_diameter * 1.7
    slots = _grid_slots(config, pitch)

    # area accounting before any placement attempt
    per_object_area = np.pi * (max_diameter / 2) ** 2
    if n_objects * per_object_area > config.fill_limit * config.spawn_area():
        raise PlacementError(
            f"{n_objects} objects exceed the spawn area budget "
            f"({n_objects * per_object_area:.4f} > "
            f"{config.fill_limit * config.spawn_area():.4f} m^2)"
        )
    if n_objects > len(slots):
        raise PlacementError(
            f"{n_objects} objects requested but only {len(slots)} grid slots fit the table"
        )

    order = rng.permutation(len(slots))
    objects = []
    for i in range(n_objects):
        x, y = slots[order[i]]
        x += rng.uniform(-config.slot_jitter, config.slot_jitter)
        y += rng.uniform(-config.slot_jitter, config.slot_jitter)
        yaw = rng.uniform(-np.pi, np.pi)
        if i < len(config.mandatory_blocks):
            color_name = config.mandatory_blocks[i]
            shape = BOX
            name = f"{color_name}_block"
        else:
            color_name = str(rng.choice(list(config.distractor_colors)))
            shape = str(rng.choice(list(config.shapes)))
            name = f"distractor_{i - len(config.mandatory_blocks)}"
        size = _object_size(shape, config.block_half_extent, rng, config.size_jitter)
        half_h = size[2] if shape == BOX else (size[0] if shape == SPHERE else size[1])
        pose = RigidTransform(
            position=np.array([x, y, half_h]),
            orientation=quat_from_axis_angle([0, 0, yaw]) if shape == BOX
            else np.array([1.0, 0, 0, 0]),
        )
        objects.append(ObjectSpec(name=name, shape=shape, size=size,
                                  color=PALETTE[color_name], pose=pose))

    fixtures = ()
    if config.fixtures_enabled:
        fixtures = (
            FixtureSpec("drawer", float(np.round(rng.uniform(0.0, 0.3), 4))),
            FixtureSpec("slider", float(np.round(rng.uniform(0.1, 0.9), 4))),
            FixtureSpec("button", 0.0),
        )

    return SceneSpec(seed=int(seed), objects=tuple(objects), fixtures=fixtures,
                     table_extent=tuple(config.table_extent))
