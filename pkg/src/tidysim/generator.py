"""Procedural episode generation across difficulty axes, with validation.

Scenes are rows of rectangular rooms joined by door gaps, furnished with
tables, articulated cabinets, and static crate clutter.  Task objects get
goal positions far enough from their starting spots that the episode always
begins at completion zero; distractors keep their poses and are protected by
the compiled harm clause.  Every emitted episode passes
:func:`validate_solvable`; generation is a pure function of (seed, params).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .geom import Box, Pose
from .goals import GoalError, compile_goal, goal_state_of
from .metrics import UnreachableTargetError, compute_legs, score, task_ids_of
from .nav import NoPathError, OccupancyGrid, astar
from .scene import AgentState, JointSpec, ObjectSpec, ObjectState, ToleranceSpec, WorldState
from .sim import EpisodeConfig, NoiseModel

__all__ = [
    "MAX_TASK_OBJECTS",
    "DOOR_WIDTH",
    "NOISE_PRESETS",
    "TRAIN_CATEGORIES",
    "TEST_CATEGORIES",
    "DifficultyParams",
    "GenerationError",
    "SolvabilityReport",
    "generate",
    "split_of",
    "categories_for",
    "validate_solvable",
]

MAX_TASK_OBJECTS = 5

ROOM_W = 5.0
ROOM_D = 5.0
WALL_HALF_T = 0.05
WALL_HALF_H = 1.25
# Door gaps are 3.5x the agent diameter; the floor of 3x keeps the inflated
# grid passable with margin to spare.
DOOR_WIDTH = 1.4

NOISE_PRESETS = {
    "off": NoiseModel.off(),
    "low": NoiseModel(pose_sigma=0.01, odom_drift_per_m=0.005, odom_heading_drift=0.001),
    "high": NoiseModel(pose_sigma=0.05, odom_drift_per_m=0.02, odom_heading_drift=0.005),
}

TRAIN_CATEGORIES = ("mug", "book", "bowl", "bottle", "toy", "can")
TEST_CATEGORIES = ("vase", "plate", "remote", "lamp")

# Seed ranges carve the dataset into splits; the test range additionally
# draws from a category pool never seen in training scenes.
VAL_SEEDS = range(100_000, 110_000)
TEST_SEEDS = range(110_000, 120_000)

_SCENE_ATTEMPTS = 30
_REACH_SNAP = 1.2  # how far a pick/place point may sit from its service cell


class GenerationError(Exception):
    def __init__(self, seed: int, attempts: int, last_problems):
        detail = "; ".join(last_problems) if last_problems else "placement failures"
        super().__init__(
            f"could not build a solvable scene for seed {seed} after {attempts} attempts ({detail})"
        )
        self.seed = seed


class _PlacementFailure(Exception):
    pass


@dataclass(frozen=True)
class DifficultyParams:
    n_task_objects: int = 1
    n_distractors: int = 0
    n_articulated: int = 0
    rooms: int = 1
    clutter_density: float = 0.0
    require_ordering: bool = False
    carry_capacity: int = 0
    noise: str = "off"

    def __post_init__(self):
        if not 1 <= self.n_task_objects <= MAX_TASK_OBJECTS:
            raise ValueError(f"n_task_objects must be in 1..{MAX_TASK_OBJECTS}")
        if self.n_distractors < 0 or self.n_articulated < 0 or self.carry_capacity < 0:
            raise ValueError("counts must be non-negative")
        if self.rooms < 1:
            raise ValueError("rooms must be at least 1")
        if not 0.0 <= self.clutter_density < 1.0:
            raise ValueError("clutter_density must be in [0, 1)")
        if self.noise not in NOISE_PRESETS:
            raise ValueError(f"noise must be one of {sorted(NOISE_PRESETS)}")
        if self.require_ordering and self.n_task_objects < 2:
            raise ValueError("require_ordering needs at least two task objects")


def split_of(seed: int) -> str:
    if seed in VAL_SEEDS:
        return "val"
    if seed in TEST_SEEDS:
        return "test"
    return "train"


def categories_for(split: str) -> tuple[str, ...]:
    return TEST_CATEGORIES if split == "test" else TRAIN_CATEGORIES


# ---------------------------------------------------------------------------
# Placement bookkeeping: everything is an axis-aligned xy rectangle.


def _rect(cx, cy, hx, hy):
    return (cx - hx, cy - hy, cx + hx, cy + hy)


def _rects_overlap(a, b, margin=0.0) -> bool:
    return (
        a[0] - margin < b[2]
        and b[0] - margin < a[2]
        and a[1] - margin < b[3]
        and b[1] - margin < a[3]
    )


def _clear(rect, rects, margin) -> bool:
    return not any(_rects_overlap(rect, r, margin) for r in rects)


@dataclass
class _Layout:
    statics: list
    rooms: list  # (x0, y0, x1, y1) interior spans
    door_keepouts: list
    floor_rects: list = field(default_factory=list)
    table_boxes: dict = field(default_factory=dict)  # room index -> (id, Box)
    table_rects: dict = field(default_factory=dict)  # table id -> occupied rects

    def room_of_xy(self, x: float) -> int:
        return min(int(x // ROOM_W), len(self.rooms) - 1)


def _room_layout(rng, k: int) -> _Layout:
    width = k * ROOM_W
    t, h = WALL_HALF_T, WALL_HALF_H
    statics = [
        ("wall-s", Box.axis_aligned((width / 2, -t, h), (width / 2 + 2 * t, t, h))),
        ("wall-n", Box.axis_aligned((width / 2, ROOM_D + t, h), (width / 2 + 2 * t, t, h))),
        ("wall-w", Box.axis_aligned((-t, ROOM_D / 2, h), (t, ROOM_D / 2 + 2 * t, h))),
        ("wall-e", Box.axis_aligned((width + t, ROOM_D / 2, h), (t, ROOM_D / 2 + 2 * t, h))),
    ]
    door_keepouts = []
    for i in range(1, k):
        x = i * ROOM_W
        gy = float(rng.uniform(0.7, ROOM_D - DOOR_WIDTH - 0.7))
        if gy > 2 * t:
            statics.append(
                (f"wall-x{i}-lo", Box.axis_aligned((x, gy / 2, h), (t, gy / 2, h)))
            )
        top = ROOM_D - gy - DOOR_WIDTH
        if top > 2 * t:
            statics.append(
                (
                    f"wall-x{i}-hi",
                    Box.axis_aligned((x, gy + DOOR_WIDTH + top / 2, h), (t, top / 2, h)),
                )
            )
        door_keepouts.append((x - 0.8, gy - 0.3, x + 0.8, gy + DOOR_WIDTH + 0.3))
    rooms = [(i * ROOM_W, 0.0, (i + 1) * ROOM_W, ROOM_D) for i in range(k)]
    return _Layout(statics, rooms, door_keepouts)


def _sample_in_room(rng, room, inset):
    x0, y0, x1, y1 = room
    return (
        float(rng.uniform(x0 + inset, x1 - inset)),
        float(rng.uniform(y0 + inset, y1 - inset)),
    )


def _place_on_floor(rng, layout, room_idx, half_xy, margin=0.35, inset=0.45, tries=120):
    room = layout.rooms[room_idx]
    hx, hy = half_xy
    for _ in range(tries):
        x, y = _sample_in_room(rng, room, inset + max(hx, hy))
        rect = _rect(x, y, hx, hy)
        if not _clear(rect, layout.door_keepouts, 0.0):
            continue
        if not _clear(rect, layout.floor_rects, margin):
            continue
        return x, y
    raise _PlacementFailure()


def _place_on_table(rng, layout, table_id, half_xy, margin=0.08, tries=60):
    box = next(b for tid, b in layout.table_boxes.values() if tid == table_id)
    lo, hi = box.aabb()
    hx, hy = half_xy
    if hi[0] - lo[0] < 2 * (hx + 0.06) or hi[1] - lo[1] < 2 * (hy + 0.06):
        raise _PlacementFailure()
    occupied = layout.table_rects.setdefault(table_id, [])
    for _ in range(tries):
        x = float(rng.uniform(lo[0] + hx + 0.05, hi[0] - hx - 0.05))
        y = float(rng.uniform(lo[1] + hy + 0.05, hi[1] - hy - 0.05))
        rect = _rect(x, y, hx, hy)
        if _clear(rect, occupied, margin):
            return x, y
    raise _PlacementFailure()


def _add_fixtures(rng, layout, params):
    """Tables (with probability per room) and the requested cabinets."""
    for ri, room in enumerate(layout.rooms):
        if rng.random() < 0.6:
            he = (0.6, 0.4, 0.4)
            for _ in range(60):
                x, y = _sample_in_room(rng, room, he[0] + 0.55)
                rect = _rect(x, y, he[0], he[1])
                if _clear(rect, layout.door_keepouts, 0.2) and _clear(
                    rect, layout.floor_rects, 0.45
                ):
                    tid = f"table-{ri}"
                    layout.statics.append((tid, Box.axis_aligned((x, y, 0.4), he)))
                    layout.floor_rects.append(rect)
                    layout.table_boxes[ri] = (tid, layout.statics[-1][1])
                    break

    cabinets = []
    for ci in range(params.n_articulated):
        ri = ci % len(layout.rooms)
        room = layout.rooms[ri]
        he = (0.35, 0.35, 0.9)
        placed = False
        for _ in range(60):
            against_north = bool(rng.random() < 0.5)
            x = float(rng.uniform(room[0] + 1.0, room[2] - 1.0))
            y = (room[3] - he[1] - 0.1) if against_north else (room[1] + he[1] + 0.1)
            rect = _rect(x, y, he[0], he[1])
            if _clear(rect, layout.door_keepouts, 0.2) and _clear(rect, layout.floor_rects, 0.35):
                kind = "prismatic" if rng.random() < 0.5 else "revolute"
                limits = (0.0, 1.0) if kind == "prismatic" else (0.0, 1.6)
                cid = f"cab-{ci}"
                cabinets.append(
                    (
                        ObjectSpec(cid, "cabinet", np.array(he), 40.0, False, JointSpec(kind, limits)),
                        ObjectState(Pose(np.array([x, y, 0.9])), joint_position=0.0),
                    )
                )
                layout.floor_rects.append(rect)
                placed = True
                break
        if not placed:
            raise _PlacementFailure()
    return cabinets


def _add_clutter(rng, layout, params):
    count = int(round(params.clutter_density * 5 * len(layout.rooms)))
    for i in range(count):
        he = rng.uniform(0.12, 0.2, size=3)
        ri = int(rng.integers(len(layout.rooms)))
        x, y = _place_on_floor(rng, layout, ri, (he[0], he[1]), margin=0.4, inset=0.6)
        layout.statics.append((f"crate-{i}", Box.axis_aligned((x, y, he[2]), he)))
        layout.floor_rects.append(_rect(x, y, he[0], he[1]))


def _spawn_agent(rng, layout):
    for _ in range(120):
        ri = int(rng.integers(len(layout.rooms)))
        x, y = _sample_in_room(rng, layout.rooms[ri], 0.5)
        rect = _rect(x, y, 0.25, 0.25)
        if _clear(rect, layout.floor_rects, 0.3) and _clear(rect, layout.door_keepouts, 0.0):
            layout.floor_rects.append(_rect(x, y, 0.45, 0.45))
            heading = float(rng.uniform(-math.pi, math.pi))
            return AgentState(position=np.array([x, y]), heading=heading)
    raise _PlacementFailure()


def _spot(rng, layout, room_idx, he, on_table_p):
    """A resting spot on the floor or a table of the room: (x, y, z, surface)."""
    table = layout.table_boxes.get(room_idx)
    if table is not None and rng.random() < on_table_p:
        tid = table[0]
        try:
            x, y = _place_on_table(rng, layout, tid, (he[0], he[1]))
            return x, y, 0.8 + he[2], tid
        except _PlacementFailure:
            pass
    x, y = _place_on_floor(rng, layout, room_idx, (he[0], he[1]))
    return x, y, float(he[2]), "floor"


def _register_spot(layout, spot, he):
    x, y, _, surface = spot
    rect = _rect(x, y, he[0], he[1])
    if surface == "floor":
        layout.floor_rects.append(rect)
    else:
        layout.table_rects.setdefault(surface, []).append(rect)


def _params_fingerprint(params: DifficultyParams) -> int:
    text = repr(tuple(getattr(params, f.name) for f in fields(params)))
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little") >> 1


def _build(rng, seed, params) -> EpisodeConfig:
    layout = _room_layout(rng, params.rooms)
    cabinets = _add_fixtures(rng, layout, params)
    _add_clutter(rng, layout, params)
    agent = _spawn_agent(rng, layout)
    agent.capacity = params.carry_capacity

    pool = categories_for(split_of(seed))
    specs: dict[str, ObjectSpec] = {}
    objects: dict[str, ObjectState] = {}
    for spec, state in cabinets:
        specs[spec.id] = spec
        objects[spec.id] = state

    k = len(layout.rooms)
    task_ids = [f"obj-{i}" for i in range(params.n_task_objects)]
    picks: dict[str, tuple] = {}
    hes: dict[str, np.ndarray] = {}

    for i, oid in enumerate(task_ids):
        he = rng.uniform(0.05, 0.11, size=3)
        on_floor_only = params.require_ordering and i <= 1
        room = int(rng.integers(k))
        spot = _spot(rng, layout, room, he, 0.0 if on_floor_only else 0.35)
        if params.require_ordering and i == 1:
            # The second object must start well clear of the first, whose
            # spot it will later occupy.
            for _ in range(60):
                d = math.hypot(spot[0] - picks[task_ids[0]][0], spot[1] - picks[task_ids[0]][1])
                if d > 1.4:
                    break
                spot = _spot(rng, layout, int(rng.integers(k)), he, 0.0)
            else:
                raise _PlacementFailure()
        _register_spot(layout, spot, he)
        picks[oid] = spot
        hes[oid] = he
        specs[oid] = ObjectSpec(oid, str(rng.choice(pool)), he, float(rng.uniform(0.2, 1.2)), True)
        objects[oid] = ObjectState(Pose(np.array([spot[0], spot[1], spot[2]])))

    for i in range(params.n_distractors):
        oid = f"dis-{i}"
        he = rng.uniform(0.05, 0.11, size=3)
        spot = _spot(rng, layout, int(rng.integers(k)), he, 0.35)
        _register_spot(layout, spot, he)
        specs[oid] = ObjectSpec(oid, str(rng.choice(pool)), he, float(rng.uniform(0.2, 1.2)), True)
        objects[oid] = ObjectState(Pose(np.array([spot[0], spot[1], spot[2]])))

    s0 = WorldState(specs, objects, agent, layout.statics)

    # Goal positions: far enough from the pick that the compiled test starts
    # out failing, in a forced different room for the first object when the
    # scene has several.
    goal_state = s0.copy()
    for i, oid in enumerate(task_ids):
        he = hes[oid]
        px, py, _, _ = picks[oid]
        if params.require_ordering and i == 1:
            x, y, z = picks[task_ids[0]][0], picks[task_ids[0]][1], float(he[2])
            goal_state.get_state(oid).pose = Pose(np.array([x, y, z]))
            continue
        placed = False
        for _ in range(120):
            if k >= 2 and i == 0:
                pick_room = layout.room_of_xy(px)
                choices = [r for r in range(k) if r != pick_room]
                room = int(choices[int(rng.integers(len(choices)))])
            else:
                room = int(rng.integers(k))
            try:
                spot = _spot(rng, layout, room, he, 0.35)
            except _PlacementFailure:
                continue
            if math.hypot(spot[0] - px, spot[1] - py) <= 1.35:
                continue
            _register_spot(layout, spot, he)
            goal_state.get_state(oid).pose = Pose(np.array([spot[0], spot[1], spot[2]]))
            placed = True
            break
        if not placed:
            raise _PlacementFailure()

    goal = compile_goal("geometric", s0, goal_state, task_ids, ToleranceSpec())
    max_ticks = 1000 + 500 * params.n_task_objects + 500 * (params.rooms - 1)
    return EpisodeConfig(
        initial=s0,
        goal=goal,
        task_ids=sorted(task_ids),
        max_ticks=max_ticks,
        seed=seed,
        episode_id=f"{split_of(seed)}-{seed:08d}",
        noise=NOISE_PRESETS[params.noise],
    )


def generate(seed: int, params: DifficultyParams = DifficultyParams()) -> EpisodeConfig:
    """Builds one validated episode, identically every time for one
    (seed, params) pair."""
    fp = _params_fingerprint(params)
    last_problems: list[str] = []
    for attempt in range(_SCENE_ATTEMPTS):
        rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), fp, attempt]))
        try:
            episode = _build(rng, seed, params)
        except _PlacementFailure:
            last_problems = ["object placement failed"]
            continue
        report = validate_solvable(episode)
        if not report.ok:
            last_problems = report.problems
            continue
        completion, _, _ = score(episode, episode.initial)
        if completion != 0.0:
            last_problems = ["initial state already scores above zero"]
            continue
        return episode
    raise GenerationError(seed, _SCENE_ATTEMPTS, last_problems)


# ---------------------------------------------------------------------------
# Solvability


@dataclass
class SolvabilityReport:
    ok: bool
    problems: list[str]

    def __bool__(self) -> bool:
        return self.ok


def _boxes_interpenetrate(a: Box, b: Box, slack=1e-9) -> bool:
    (alo, ahi), (blo, bhi) = a.aabb(), b.aabb()
    return bool(np.all(np.minimum(ahi, bhi) - np.maximum(alo, blo) > slack))


def validate_solvable(episode: EpisodeConfig) -> SolvabilityReport:
    """True when the episode can actually be carried out.

    Checks that every goal footprint is collision-free in the final
    configuration and that every pick and place point is reachable from the
    spawn on a grid blocked by statics plus every initial and goal footprint
    at once.  That union over-approximates the obstacles at any moment of any
    service order, so a pass here cannot be invalidated by the agent's own
    rearranging.
    """
    problems: list[str] = []
    s0 = episode.initial
    ids = task_ids_of(episode, s0)

    try:
        goal_state = goal_state_of(episode.goal, s0)
    except GoalError:
        goal_state = None

    if goal_state is None:
        # No explicit witness state (predicate goal): fall back to the path
        # oracle's reachability.
        try:
            compute_legs(episode)
        except UnreachableTargetError as exc:
            problems.append(str(exc))
        return SolvabilityReport(not problems, problems)

    moved = [oid for oid in ids if oid in s0.objects]
    for oid in moved:
        goal_box = goal_state.world_box(oid)
        for sid, box in s0.static_layout:
            if _boxes_interpenetrate(goal_box, box):
                problems.append(f"goal pose of '{oid}' collides with static '{sid}'")
        for other in goal_state.objects:
            if other != oid and _boxes_interpenetrate(goal_box, goal_state.world_box(other)):
                problems.append(f"goal pose of '{oid}' collides with '{other}'")

    extra = [(f"goal:{oid}", goal_state.world_box(oid)) for oid in moved]
    grid = OccupancyGrid.build(s0, include_objects=True, extra_boxes=extra)

    spawn_cell = grid.nearest_free(s0.agent.position)
    if spawn_cell is None or np.linalg.norm(
        grid.center_of(spawn_cell) - np.asarray(s0.agent.position)
    ) > 0.3:
        problems.append("agent spawn has no free cell around it")
        return SolvabilityReport(False, problems)

    def reach(point_xy, oid, endpoint):
        cell = grid.nearest_free(point_xy)
        if cell is None or np.linalg.norm(grid.center_of(cell) - point_xy[:2]) > _REACH_SNAP:
            problems.append(f"{endpoint} location of '{oid}' has no free cell near it")
            return
        try:
            astar(grid, spawn_cell, cell)
        except NoPathError:
            problems.append(f"{endpoint} location of '{oid}' is unreachable from the spawn")

    for oid in moved:
        reach(np.asarray(s0.get_state(oid).pose.translation[:2]), oid, "pick")
        reach(np.asarray(goal_state.get_state(oid).pose.translation[:2]), oid, "place")

    return SolvabilityReport(not problems, problems)
