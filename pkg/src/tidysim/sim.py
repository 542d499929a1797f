"""Kinematic environment: discrete actions, magic-pointer manipulation,
noisy observations, tick and energy accounting.

The embodiment is a holonomic disc that translates in fixed 0.25 m steps and
turns in 10 degree increments.  Manipulation is a ray cast from the eye
through a crosshair slightly below the view axis; a hit on a movable object
within `pick_range` attaches it.  All randomness (observation noise,
odometry drift) comes from one seeded stream, so a `(seed, action sequence)`
pair fully determines the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geom import Box, Pose, Ray, ray_cast
from .goals import GoalSpec, as_program
from .predicates import HARM_TOLERANCE, referenced_ids
from .scene import (
    AgentState,
    DEFAULT_CONTACT_EPS,
    ObjectState,
    ToleranceSpec,
    UnknownObjectError,
    WorldState,
    settle_height,
)

__all__ = [
    "MOVE_STEP",
    "TURN_STEP",
    "PITCH_LIMIT",
    "MoveForward",
    "TurnLeft",
    "TurnRight",
    "LookUp",
    "LookDown",
    "Grab",
    "Release",
    "Stow",
    "Unstow",
    "SetJoint",
    "Stop",
    "Action",
    "ACTION_NAMES",
    "NoiseModel",
    "ViewParams",
    "EnergyModel",
    "EpisodeConfig",
    "VisibleObject",
    "Odometry",
    "Observation",
    "Environment",
    "EpisodeOverError",
    "energy_of",
    "visibility",
    "would_grab",
    "can_set_joint",
]

MOVE_STEP = 0.25
TURN_STEP = math.pi / 18  # 10 degrees
PITCH_LIMIT = math.pi / 3  # +/- 60 degrees


# --- Actions ----------------------------------------------------------------


@dataclass(frozen=True)
class MoveForward:
    name = "move_forward"


@dataclass(frozen=True)
class TurnLeft:
    name = "turn_left"


@dataclass(frozen=True)
class TurnRight:
    name = "turn_right"


@dataclass(frozen=True)
class LookUp:
    name = "look_up"


@dataclass(frozen=True)
class LookDown:
    name = "look_down"


@dataclass(frozen=True)
class Grab:
    name = "grab"


@dataclass(frozen=True)
class Release:
    name = "release"


@dataclass(frozen=True)
class Stow:
    name = "stow"


@dataclass(frozen=True)
class Unstow:
    id: str
    name = "unstow"


@dataclass(frozen=True)
class SetJoint:
    id: str
    fraction: float
    name = "set_joint"

    def __post_init__(self):
        if not (0.0 <= self.fraction <= 1.0):
            raise ValueError(f"joint fraction must be in [0, 1], got {self.fraction}")


@dataclass(frozen=True)
class Stop:
    name = "stop"


Action = (
    MoveForward
    | TurnLeft
    | TurnRight
    | LookUp
    | LookDown
    | Grab
    | Release
    | Stow
    | Unstow
    | SetJoint
    | Stop
)

ACTION_NAMES = {
    "move_forward": MoveForward,
    "turn_left": TurnLeft,
    "turn_right": TurnRight,
    "look_up": LookUp,
    "look_down": LookDown,
    "grab": Grab,
    "release": Release,
    "stow": Stow,
    "unstow": Unstow,
    "set_joint": SetJoint,
    "stop": Stop,
}


# --- Episode configuration --------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Observation corruption; all zeros means perfectly clean sensing."""

    pose_sigma: float = 0.02
    odom_drift_per_m: float = 0.01
    odom_heading_drift: float = 0.002

    @classmethod
    def off(cls) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0)

    @property
    def enabled(self) -> bool:
        return self.pose_sigma > 0 or self.odom_drift_per_m > 0 or self.odom_heading_drift > 0


@dataclass(frozen=True)
class ViewParams:
    fov: float = math.pi / 2
    crosshair_pitch: float = -math.pi / 18  # aim slightly below the view axis
    eye_height: float = 1.5
    sense_range: float = 10.0


@dataclass(frozen=True)
class EnergyModel:
    """Declared constants for the virtual-work energy metric.  Only relative
    comparisons under the same constants are meaningful; reports carry them."""

    agent_mass: float = 20.0
    move_cost_per_kg_m: float = 2.0
    turn_cost: float = 1.0
    joint_cost: float = 5.0
    carry_height: float = 1.0
    gravity: float = 9.81

    def as_dict(self) -> dict:
        return {
            "agent_mass": self.agent_mass,
            "move_cost_per_kg_m": self.move_cost_per_kg_m,
            "turn_cost": self.turn_cost,
            "joint_cost": self.joint_cost,
            "carry_height": self.carry_height,
            "gravity": self.gravity,
        }


@dataclass
class EpisodeConfig:
    initial: WorldState
    goal: GoalSpec
    task_ids: list[str]
    max_ticks: int
    seed: int
    episode_id: str = ""
    noise: NoiseModel = field(default_factory=NoiseModel)
    pick_range: float = 1.5
    view: ViewParams = field(default_factory=ViewParams)
    energy: EnergyModel = field(default_factory=EnergyModel)
    tolerance: ToleranceSpec = field(default_factory=ToleranceSpec)
    harm_tolerance: ToleranceSpec = HARM_TOLERANCE
    contact_eps: float = DEFAULT_CONTACT_EPS
    hidden_params: bool = False

    def __post_init__(self):
        if not self.max_ticks > 0:
            raise ValueError("max_ticks must be positive")
        if not self.episode_id:
            self.episode_id = f"ep-{self.seed:016x}"


# --- Observations -----------------------------------------------------------


@dataclass(frozen=True)
class VisibleObject:
    id: str
    category: str
    pose: Pose
    open_fraction: float | None


@dataclass(frozen=True)
class Odometry:
    position: np.ndarray  # 2-vector with accumulated drift
    heading: float


@dataclass(frozen=True)
class Observation:
    tick: int
    odometry: Odometry
    visible: tuple[VisibleObject, ...]
    held: str | None
    haptic: bool
    last_action_ok: bool
    pitch: float  # convenience echo; pitch control is deterministic


class EpisodeOverError(Exception):
    def __init__(self):
        super().__init__("episode is over (Stop issued or max_ticks reached); call reset")


# --- Pure geometry helpers used by both step() and energy_of() --------------


def _wrap_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def _eye_of(agent: AgentState, view: ViewParams) -> np.ndarray:
    return np.array([agent.position[0], agent.position[1], view.eye_height])


def _crosshair_ray(agent: AgentState, view: ViewParams, max_range: float) -> Ray:
    el = agent.pitch + view.crosshair_pitch
    d = np.array(
        [
            math.cos(el) * math.cos(agent.heading),
            math.cos(el) * math.sin(agent.heading),
            math.sin(el),
        ]
    )
    return Ray(_eye_of(agent, view), d, max_range)


def _collision_boxes(state: WorldState, exclude: set[str] | None = None):
    exclude = exclude or set()
    for sid, box in state.static_layout:
        yield sid, box
    for oid in state.objects:
        if oid not in exclude:
            yield oid, state.world_box(oid)


def _z_blocks_agent(box: Box, height: float) -> bool:
    lo, hi = box.aabb()
    return hi[2] > 1e-9 and lo[2] < height - 1e-9


def _seg_point_dist2(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    d = a + t * ab - p
    return float(d @ d)


def _segment_rect_dist(a: np.ndarray, b: np.ndarray, rect) -> float:
    """Distance between segment ab and an axis-aligned rectangle, in 2D."""
    x0, y0, x1, y1 = rect

    def inside(p):
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

    if inside(a) or inside(b):
        return 0.0
    corners = [np.array([x0, y0]), np.array([x1, y0]), np.array([x1, y1]), np.array([x0, y1])]
    edges = list(zip(corners, corners[1:] + corners[:1]))
    # Segment-segment intersection against each rectangle edge.
    def seg_seg_dist(p1, p2, q1, q2):
        d1 = p2 - p1
        d2 = q2 - q1
        denom = d1[0] * d2[1] - d1[1] * d2[0]
        if abs(denom) > 1e-15:
            t = ((q1[0] - p1[0]) * d2[1] - (q1[1] - p1[1]) * d2[0]) / denom
            u = ((q1[0] - p1[0]) * d1[1] - (q1[1] - p1[1]) * d1[0]) / denom
            if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
                return 0.0
        return math.sqrt(
            min(
                _seg_point_dist2(p1, p2, q1),
                _seg_point_dist2(p1, p2, q2),
                _seg_point_dist2(q1, q2, p1),
                _seg_point_dist2(q1, q2, p2),
            )
        )

    return min(seg_seg_dist(a, b, e0, e1) for e0, e1 in edges)


def _move_blocked(state: WorldState, target: np.ndarray) -> bool:
    """Would sweeping the agent disc to `target` hit anything?"""
    agent = state.agent
    a = agent.position
    for _, box in _collision_boxes(state):
        if not _z_blocks_agent(box, agent.height):
            continue
        lo, hi = box.aabb()
        rect = (lo[0], lo[1], hi[0], hi[1])
        if _segment_rect_dist(a, target, rect) < agent.radius - 1e-12:
            return True
    return False


def visibility(state: WorldState, view: ViewParams = ViewParams()) -> list[str]:
    """Ids currently in view: inside the fov cone, within sensing range, and
    not occluded by the static layout.  Sorted for determinism."""
    agent = state.agent
    eye = _eye_of(agent, view)
    out = []
    for oid in sorted(state.objects):
        center = state.world_box(oid).center_pose.translation
        delta = center - eye
        dist = float(np.linalg.norm(delta))
        if dist > view.sense_range:
            continue
        if dist < 1e-9:
            out.append(oid)
            continue
        az = math.atan2(delta[1], delta[0])
        el = math.asin(np.clip(delta[2] / dist, -1.0, 1.0))
        if abs(_wrap_angle(az - agent.heading)) > view.fov / 2:
            continue
        if abs(el - agent.pitch) > view.fov / 2:
            continue
        ray = Ray(eye, delta / dist, max(dist, 1e-6))
        hit = ray_cast(ray, state.static_layout)
        if hit is not None and hit[1] < dist - 1e-9:
            continue
        out.append(oid)
    return out


def _resolve_grab(state: WorldState, view: ViewParams, pick_range: float):
    """(would-grab id or None, touched anything) for a Grab from this state."""
    if state.agent.held is not None:
        return None, False
    ray = _crosshair_ray(state.agent, view, pick_range)
    hit = ray_cast(ray, _collision_boxes(state))
    if hit is None:
        return None, False
    oid = hit[0]
    if oid in state.objects and state.get_spec(oid).movable:
        return oid, True
    return None, True


def would_grab(state: WorldState, view: ViewParams = ViewParams(), pick_range: float = 1.5):
    """(object id, touched) a Grab from exactly this state would resolve to.

    This is the simulator's own targeting rule exposed for planners: aim is
    valid precisely when this returns the intended id.
    """
    return _resolve_grab(state, view, pick_range)


def can_set_joint(state: WorldState, oid: str, view: ViewParams = ViewParams(), pick_range: float = 1.5) -> bool:
    """Whether SetJoint on `oid` would be accepted from this state."""
    return _set_joint_allowed(state, oid, view, pick_range)


def _set_joint_allowed(state: WorldState, oid: str, view: ViewParams, pick_range: float) -> bool:
    if oid not in state.objects:
        return False
    if state.specs[oid].articulation is None:
        return False
    if oid not in visibility(state, view):
        return False
    center = state.world_box(oid).center_pose.translation
    return float(np.linalg.norm(center - _eye_of(state.agent, view))) <= pick_range


def energy_of(
    action: Action,
    state: WorldState,
    energy: EnergyModel = EnergyModel(),
    view: ViewParams = ViewParams(),
    pick_range: float = 1.5,
) -> float:
    """Virtual work charged for taking `action` from `state`.

    Failed moves still charge (the actuators fired); failed grabs and joint
    actions charge nothing because no mass was lifted and no joint turned.
    """
    if isinstance(action, MoveForward):
        mass = energy.agent_mass
        if state.agent.held is not None:
            mass += state.get_spec(state.agent.held).mass
        return mass * energy.move_cost_per_kg_m * MOVE_STEP
    if isinstance(action, (TurnLeft, TurnRight, LookUp, LookDown)):
        return energy.turn_cost
    if isinstance(action, Grab):
        oid, _ = _resolve_grab(state, view, pick_range)
        if oid is None:
            return 0.0
        center_z = float(state.world_box(oid).center_pose.translation[2])
        lift = max(0.0, energy.carry_height - center_z)
        return state.get_spec(oid).mass * energy.gravity * lift
    if isinstance(action, SetJoint):
        if not _set_joint_allowed(state, action.id, view, pick_range):
            return 0.0
        spec = state.specs[action.id]
        lo, hi = spec.articulation.limits
        current = (state.objects[action.id].joint_position - lo) / (hi - lo)
        return energy.joint_cost * abs(action.fraction - current)
    return 0.0


# --- Environment ------------------------------------------------------------


class Environment:
    """One episode's mutable world.  Not safe to share across threads; run
    one environment per execution context."""

    def __init__(self, episode: EpisodeConfig):
        self.episode = episode
        self._world: WorldState | None = None
        self._log: list[Action] = []
        self._tick = 0
        self._done = False
        self._energy = 0.0
        self._path_length = 0.0
        self._last_ok = True
        self._haptic = False
        self._rng = np.random.default_rng(episode.seed)
        self._drift = np.zeros(2)
        self._heading_drift = 0.0

    # -- lifecycle

    def reset(self) -> Observation:
        episode = self.episode
        self._world = episode.initial.copy()
        program = as_program(episode.goal, self._world, episode.tolerance)
        unknown = referenced_ids(program) - self._world.known_ids()
        if unknown:
            raise UnknownObjectError(sorted(unknown)[0])
        self._log = []
        self._tick = 0
        self._done = False
        self._energy = 0.0
        self._path_length = 0.0
        self._last_ok = True
        self._haptic = False
        self._rng = np.random.default_rng(episode.seed)
        self._drift = np.zeros(2)
        self._heading_drift = 0.0
        return self._observe()

    @property
    def world(self) -> WorldState:
        """Live state; treat as read-only unless you are the environment."""
        if self._world is None:
            raise EpisodeOverError()
        return self._world

    @property
    def tick(self) -> int:
        return self._tick

    @property
    def done(self) -> bool:
        return self._done

    @property
    def energy(self) -> float:
        return self._energy

    @property
    def path_length(self) -> float:
        return self._path_length

    def action_log(self) -> list[Action]:
        return list(self._log)

    def snapshot(self) -> WorldState:
        return self.world.copy()

    # -- stepping

    def step(self, action: Action) -> Observation:
        if self._world is None or self._done:
            raise EpisodeOverError()
        episode = self.episode
        self._energy += energy_of(action, self._world, episode.energy, episode.view, episode.pick_range)
        ok, haptic = self._apply(action)
        self._last_ok = ok
        self._haptic = haptic
        self._tick += 1
        self._log.append(action)
        if self._tick >= episode.max_ticks:
            self._done = True
        return self._observe()

    def _apply(self, action: Action) -> tuple[bool, bool]:
        world = self._world
        agent = world.agent
        view = self.episode.view
        if isinstance(action, MoveForward):
            direction = np.array([math.cos(agent.heading), math.sin(agent.heading)])
            target = agent.position + MOVE_STEP * direction
            if _move_blocked(world, target):
                self._odom_move(0.0)
                return False, False
            agent.position = target
            self._path_length += MOVE_STEP
            self._odom_move(MOVE_STEP)
            return True, False
        if isinstance(action, TurnLeft):
            agent.heading = _wrap_angle(agent.heading + TURN_STEP)
            self._odom_turn()
            return True, False
        if isinstance(action, TurnRight):
            agent.heading = _wrap_angle(agent.heading - TURN_STEP)
            self._odom_turn()
            return True, False
        if isinstance(action, LookUp):
            agent.pitch = min(agent.pitch + TURN_STEP, PITCH_LIMIT)
            return True, False
        if isinstance(action, LookDown):
            agent.pitch = max(agent.pitch - TURN_STEP, -PITCH_LIMIT)
            return True, False
        if isinstance(action, Grab):
            oid, touched = _resolve_grab(world, view, self.episode.pick_range)
            if oid is None:
                return False, touched
            world.carried[oid] = world.objects.pop(oid)
            agent.held = oid
            return True, True
        if isinstance(action, Release):
            return self._release()
        if isinstance(action, Stow):
            if agent.held is None or len(agent.backpack) >= agent.capacity:
                return False, False
            agent.backpack.append(agent.held)
            agent.held = None
            return True, False
        if isinstance(action, Unstow):
            if agent.held is not None or action.id not in agent.backpack:
                return False, False
            agent.backpack.remove(action.id)
            agent.held = action.id
            return True, False
        if isinstance(action, SetJoint):
            if not _set_joint_allowed(world, action.id, view, self.episode.pick_range):
                return False, False
            spec = world.specs[action.id]
            lo, hi = spec.articulation.limits
            world.objects[action.id].joint_position = lo + action.fraction * (hi - lo)
            return True, True
        if isinstance(action, Stop):
            self._done = True
            return True, False
        raise TypeError(f"not an action: {action!r}")

    def _release(self) -> tuple[bool, bool]:
        world = self._world
        agent = world.agent
        held = agent.held
        if held is None:
            return False, False
        carried = world.carried[held]
        spec = world.get_spec(held)
        direction = np.array([math.cos(agent.heading), math.sin(agent.heading)])
        xy = agent.position + 0.5 * direction
        probe = Box(
            Pose(np.array([xy[0], xy[1], 0.0]), carried.pose.rotation), spec.half_extents
        )
        lo, hi = probe.aabb()
        half_height = (hi[2] - lo[2]) / 2.0
        z = settle_height(probe, world) + half_height
        placed = Box(Pose(np.array([xy[0], xy[1], z]), carried.pose.rotation), spec.half_extents)
        if self._placement_collides(placed):
            return False, True
        world.objects[held] = ObjectState(placed.center_pose, carried.joint_position)
        del world.carried[held]
        agent.held = None
        return True, True

    def _placement_collides(self, placed: Box) -> bool:
        p_lo, p_hi = placed.aabb()
        for _, box in _collision_boxes(self._world):
            lo, hi = box.aabb()
            overlap = np.minimum(p_hi, hi) - np.maximum(p_lo, lo)
            if np.all(overlap > 1e-9):
                return True
        return False

    # -- odometry and observation

    def _odom_move(self, distance: float):
        sigma = self.episode.noise.odom_drift_per_m * distance
        self._drift = self._drift + self._rng.normal(size=2) * sigma

    def _odom_turn(self):
        self._heading_drift += float(self._rng.normal()) * self.episode.noise.odom_heading_drift

    def _observe(self) -> Observation:
        world = self._world
        agent = world.agent
        noise = self.episode.noise
        view = self.episode.view
        visible = []
        for oid in visibility(world, view):
            spec = world.specs[oid]
            st = world.objects[oid]
            offset = self._rng.normal(size=3) * noise.pose_sigma
            pose = Pose(st.pose.translation + offset, st.pose.rotation)
            open_frac = None
            if spec.articulation is not None:
                lo, hi = spec.articulation.limits
                f = (st.joint_position - lo) / (hi - lo)
                f += float(self._rng.normal()) * noise.pose_sigma
                open_frac = float(np.clip(f, 0.0, 1.0))
            visible.append(VisibleObject(oid, spec.category, pose, open_frac))
        odom = Odometry(agent.position + self._drift, _wrap_angle(agent.heading + self._heading_drift))
        return Observation(
            tick=self._tick,
            odometry=odom,
            visible=tuple(visible),
            held=agent.held,
            haptic=self._haptic,
            last_action_ok=self._last_ok,
            pitch=agent.pitch,
        )
