"""World model: object specs and states, the embodied agent, relation queries.

A :class:`WorldState` is a value: the simulator mutates only its own private
copy, everything else treats states as snapshots.  Relation queries
(:func:`is_on`, :func:`is_inside`, ...) are pure functions of a state and are
the ground truth that goal programs evaluate against.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .geom import Box, Pose, rotation_angle, translation_distance

__all__ = [
    "JointSpec",
    "ObjectSpec",
    "ObjectState",
    "AgentState",
    "ToleranceSpec",
    "WorldState",
    "DiffRecord",
    "SceneError",
    "UnknownObjectError",
    "NotArticulatedError",
    "MismatchedStatesError",
    "is_on",
    "is_inside",
    "open_fraction",
    "settle_height",
    "state_diff",
    "snapshot_hash",
    "DEFAULT_CONTACT_EPS",
]

DEFAULT_CONTACT_EPS = 0.02


class SceneError(Exception):
    """Base for world-model errors."""


class UnknownObjectError(SceneError):
    def __init__(self, object_id: str):
        super().__init__(f"unknown object id: {object_id!r}")
        self.object_id = object_id


class NotArticulatedError(SceneError):
    def __init__(self, object_id: str):
        super().__init__(f"object {object_id!r} has no joint")
        self.object_id = object_id


class MismatchedStatesError(SceneError):
    def __init__(self, only_a, only_b):
        super().__init__(
            f"object id sets differ: only in first={sorted(only_a)}, only in second={sorted(only_b)}"
        )
        self.only_a = frozenset(only_a)
        self.only_b = frozenset(only_b)


@dataclass(frozen=True)
class JointSpec:
    """One degree of freedom with hard limits; `kind` is cosmetic for metrics
    since openness is always measured as a fraction of the limit range."""

    kind: str  # "revolute" | "prismatic"
    limits: tuple[float, float]

    def __post_init__(self):
        if self.kind not in ("revolute", "prismatic"):
            raise ValueError(f"joint kind must be revolute or prismatic, got {self.kind!r}")
        lo, hi = self.limits
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"joint limits must be finite with lo < hi, got {self.limits}")
        object.__setattr__(self, "limits", (float(lo), float(hi)))


@dataclass(frozen=True)
class ObjectSpec:
    id: str
    category: str
    half_extents: np.ndarray
    mass: float
    movable: bool
    articulation: JointSpec | None = None

    def __post_init__(self):
        he = np.asarray(self.half_extents, dtype=np.float64).reshape(3).copy()
        if not (np.all(np.isfinite(he)) and np.all(he > 0)):
            raise ValueError(f"{self.id}: half_extents must be positive, got {he}")
        he.flags.writeable = False
        object.__setattr__(self, "half_extents", he)
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError(f"{self.id}: mass must be positive, got {self.mass}")


@dataclass
class ObjectState:
    pose: Pose
    joint_position: float | None = None

    def copy(self) -> "ObjectState":
        return ObjectState(self.pose, self.joint_position)


@dataclass
class AgentState:
    """Holonomic disc base plus a camera pitch and a magic-pointer hand."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(2))
    heading: float = 0.0
    pitch: float = 0.0
    height: float = 1.8
    radius: float = 0.2
    held: str | None = None
    backpack: list[str] = field(default_factory=list)
    capacity: int = 0

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(2).copy()
        if not np.all(np.isfinite(p)):
            raise ValueError(f"non-finite agent position {p}")
        self.position = p
        if len(self.backpack) > self.capacity:
            raise ValueError("backpack exceeds capacity")
        if self.held is not None and self.held in self.backpack:
            raise ValueError("held object cannot also be in backpack")

    def copy(self) -> "AgentState":
        return AgentState(
            self.position.copy(),
            self.heading,
            self.pitch,
            self.height,
            self.radius,
            self.held,
            list(self.backpack),
            self.capacity,
        )


@dataclass(frozen=True)
class ToleranceSpec:
    """Thresholds for deciding that an object counts as displaced.

    `rotation` of pi disables the rotation test (no relative rotation exceeds
    pi).  `min_iou` of None disables overlap testing for the episode.
    """

    translation: float = 1.0
    rotation: float = math.pi
    min_iou: float | None = None
    open: float = 0.2

    def __post_init__(self):
        if not (self.translation > 0 and self.rotation > 0 and self.open > 0):
            raise ValueError("tolerances must be strictly positive")
        if self.min_iou is not None and not (0 < self.min_iou <= 1):
            raise ValueError(f"min_iou must be in (0, 1], got {self.min_iou}")


@dataclass
class WorldState:
    """Everything that varies over an episode, plus the immutable scene data
    (specs and static layout) needed to interpret it.

    Objects currently in the agent's hand or backpack live in `carried`, not
    `objects`: they are out of the world for collision, visibility, and
    support queries, but keep their last world state so a release can restore
    rotation and joint position.
    """

    specs: dict[str, ObjectSpec]
    objects: dict[str, ObjectState]
    agent: AgentState
    static_layout: list[tuple[str, Box]] = field(default_factory=list)
    carried: dict[str, ObjectState] = field(default_factory=dict)

    def __post_init__(self):
        for oid in list(self.objects) + list(self.carried):
            if oid not in self.specs:
                raise UnknownObjectError(oid)
        for oid, st in self.all_object_states().items():
            spec = self.specs[oid]
            if spec.articulation is None:
                if st.joint_position is not None:
                    raise ValueError(f"{oid}: joint_position on non-articulated object")
            else:
                lo, hi = spec.articulation.limits
                if st.joint_position is None or not (lo <= st.joint_position <= hi):
                    raise ValueError(
                        f"{oid}: joint_position {st.joint_position} outside limits [{lo}, {hi}]"
                    )
        in_hand = ([self.agent.held] if self.agent.held else []) + list(self.agent.backpack)
        if sorted(in_hand) != sorted(self.carried):
            raise ValueError(
                f"carried states {sorted(self.carried)} do not match agent hand/backpack {sorted(in_hand)}"
            )

    def copy(self) -> "WorldState":
        return WorldState(
            self.specs,
            {k: v.copy() for k, v in self.objects.items()},
            self.agent.copy(),
            list(self.static_layout),
            {k: v.copy() for k, v in self.carried.items()},
        )

    def all_object_states(self) -> dict[str, ObjectState]:
        """World plus carried objects; carried ones report their stashed pose."""
        merged = dict(self.objects)
        merged.update(self.carried)
        return merged

    def get_state(self, object_id: str) -> ObjectState:
        st = self.objects.get(object_id) or self.carried.get(object_id)
        if st is None:
            raise UnknownObjectError(object_id)
        return st

    def get_spec(self, object_id: str) -> ObjectSpec:
        try:
            return self.specs[object_id]
        except KeyError:
            raise UnknownObjectError(object_id) from None

    def static_box(self, object_id: str) -> Box | None:
        for sid, box in self.static_layout:
            if sid == object_id:
                return box
        return None

    def world_box(self, object_id: str) -> Box:
        """The object's collision/query box at its current pose.

        Named fixtures from the static layout resolve too, so support
        relations like "mug on table" work when the table never moves.
        """
        if object_id in self.specs:
            return Box(self.get_state(object_id).pose, self.get_spec(object_id).half_extents)
        box = self.static_box(object_id)
        if box is None:
            raise UnknownObjectError(object_id)
        return box

    def known_ids(self) -> set[str]:
        """Every id a goal program may reference: objects, carried, fixtures."""
        return set(self.specs) | {sid for sid, _ in self.static_layout}


def is_on(a: str, b: str, state: WorldState, contact_eps: float = DEFAULT_CONTACT_EPS) -> bool:
    """True when a rests on b: bottom face within `contact_eps` above b's top
    face and a's center over b's footprint."""
    box_a = state.world_box(a)
    box_b = state.world_box(b)
    bottom_a = box_a.aabb()[0][2]
    top_b = box_b.aabb()[1][2]
    gap = bottom_a - top_b
    if not (-1e-9 <= gap <= contact_eps):
        return False
    local = box_b.center_pose.inverse_transform_point(box_a.center_pose.translation)
    return bool(abs(local[0]) <= box_b.half_extents[0] and abs(local[1]) <= box_b.half_extents[1])


def is_inside(a: str, b: str, state: WorldState) -> bool:
    """True when a's center lies strictly inside b's box volume."""
    center = state.world_box(a).center_pose.translation
    return bool(state.world_box(b).contains(center, strict=True))


def open_fraction(a: str, state: WorldState) -> float:
    spec = state.get_spec(a)
    if spec.articulation is None:
        raise NotArticulatedError(a)
    lo, hi = spec.articulation.limits
    return (state.get_state(a).joint_position - lo) / (hi - lo)


def _footprints_overlap(lo_a, hi_a, lo_b, hi_b) -> bool:
    return bool(
        min(hi_a[0], hi_b[0]) - max(lo_a[0], lo_b[0]) > 1e-12
        and min(hi_a[1], hi_b[1]) - max(lo_a[1], lo_b[1]) > 1e-12
    )


def settle_height(footprint: Box, state: WorldState) -> float:
    """Height at which a box with this footprint would come to rest: the
    highest top face under its horizontal projection, floor included."""
    f_lo, f_hi = footprint.aabb()
    z = 0.0
    supports = list(state.static_layout) + [
        (oid, state.world_box(oid)) for oid in state.objects
    ]
    for _, box in supports:
        lo, hi = box.aabb()
        if _footprints_overlap(f_lo, f_hi, lo, hi):
            z = max(z, hi[2])
    return z


@dataclass(frozen=True)
class DiffRecord:
    id: str
    moved: bool
    translation: float
    rotation: float
    open_delta: float


def state_diff(s0: WorldState, s: WorldState, tol: ToleranceSpec) -> list[DiffRecord]:
    """Per-object displacement between two states of the same scene.

    `moved` is true when any component strictly exceeds its tolerance.
    Records come back sorted by id.
    """
    a_states = s0.all_object_states()
    b_states = s.all_object_states()
    if a_states.keys() != b_states.keys():
        raise MismatchedStatesError(a_states.keys() - b_states.keys(), b_states.keys() - a_states.keys())
    records = []
    for oid in sorted(a_states):
        sa, sb = a_states[oid], b_states[oid]
        t = translation_distance(sa.pose, sb.pose)
        r = rotation_angle(sa.pose, sb.pose)
        if sa.joint_position is not None and sb.joint_position is not None:
            lo, hi = s0.specs[oid].articulation.limits
            od = abs(sb.joint_position - sa.joint_position) / (hi - lo)
        else:
            od = 0.0
        moved = t > tol.translation or r > tol.rotation or od > tol.open
        records.append(DiffRecord(oid, moved, t, r, od))
    return records


def _q(v: float) -> int:
    """Quantize to 1e-9 so hash equality tolerates representation noise."""
    return int(round(v * 1e9))


def _hash_floats(h, values):
    for v in values:
        h.update(struct.pack("<q", _q(float(v))))


def snapshot_hash(state: WorldState) -> int:
    """64-bit digest of the full state, stable across runs and platforms."""
    h = hashlib.blake2b(digest_size=8)
    for label, states in (("o", state.objects), ("c", state.carried)):
        for oid in sorted(states):
            st = states[oid]
            h.update(label.encode())
            h.update(oid.encode())
            _hash_floats(h, st.pose.translation)
            _hash_floats(h, st.pose.rotation)
            if st.joint_position is not None:
                _hash_floats(h, [st.joint_position])
    ag = state.agent
    h.update(b"a")
    _hash_floats(h, [ag.position[0], ag.position[1], ag.heading, ag.pitch, ag.height, ag.radius])
    h.update(repr((ag.held, sorted(ag.backpack), ag.capacity)).encode())
    for sid, box in state.static_layout:
        h.update(b"s")
        h.update(sid.encode())
        _hash_floats(h, box.center_pose.translation)
        _hash_floats(h, box.center_pose.rotation)
        _hash_floats(h, box.half_extents)
    return int.from_bytes(h.digest(), "little")
