"""Goal specifications and their compilation into evaluation programs.

Three concrete goal forms are supported:

- :class:`GeometricGoal`: explicit target pose (and open fraction) per task
  object.
- :class:`PredicateGoal`: an arbitrary evaluation program.
- :class:`ExperienceGoal`: the goal conveyed as a full world state the agent
  may explore under a step budget; the task objects are implicit (whatever
  differs beyond tolerance).

`image` and `language` goal kinds are recognized names that fail loudly with
:class:`UnsupportedGoalError` so episode files using them are rejected
rather than misread.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .geom import Box, Pose
from .predicates import (
    Atom,
    BoxLiteral,
    PredicateProgram,
    all_of,
    atom,
)
from .scene import (
    ToleranceSpec,
    UnknownObjectError,
    WorldState,
    open_fraction,
    state_diff,
)

__all__ = [
    "GeometricGoal",
    "PredicateGoal",
    "ExperienceGoal",
    "GoalSpec",
    "GoalError",
    "UnsupportedGoalError",
    "EmptyTaskSetError",
    "compile_goal",
    "derive_task_set",
    "as_program",
    "goal_state_of",
    "DEFAULT_MIN_IOU",
    "DEFAULT_EXPLORATION_BUDGET",
    "GOAL_KINDS",
]

# Overlap threshold applied when an episode asks for IoU scoring without
# choosing its own value.
DEFAULT_MIN_IOU = 0.5
DEFAULT_EXPLORATION_BUDGET = 1000

GOAL_KINDS = ("geometric", "predicate", "experience", "image", "language")


class GoalError(Exception):
    pass


class UnsupportedGoalError(GoalError):
    def __init__(self, kind: str):
        super().__init__(
            f"goal kind {kind!r} is declared but not supported; use geometric, predicate, or experience"
        )
        self.kind = kind


class EmptyTaskSetError(GoalError):
    def __init__(self):
        super().__init__("task_ids must be nonempty")


@dataclass(frozen=True)
class GeometricGoal:
    """Target pose and optional open fraction per task object id."""

    targets: dict[str, tuple[Pose, float | None]]
    tol: dict[str, ToleranceSpec]

    kind = "geometric"

    def __post_init__(self):
        if not self.targets:
            raise EmptyTaskSetError()
        if set(self.tol) != set(self.targets):
            raise ValueError("tolerance map must cover exactly the target ids")


@dataclass(frozen=True)
class PredicateGoal:
    program: PredicateProgram

    kind = "predicate"


@dataclass(frozen=True)
class ExperienceGoal:
    goal_state: WorldState
    exploration_budget: int = DEFAULT_EXPLORATION_BUDGET
    tol: ToleranceSpec = field(default_factory=ToleranceSpec)

    kind = "experience"

    def __post_init__(self):
        if not self.exploration_budget > 0:
            raise ValueError(f"exploration budget must be positive, got {self.exploration_budget}")


GoalSpec = GeometricGoal | PredicateGoal | ExperienceGoal


def _check_target(s0: WorldState, goal_state: WorldState, oid: str):
    spec = s0.get_spec(oid)  # raises UnknownObjectError
    goal_state.get_state(oid)
    if not spec.movable and spec.articulation is None:
        raise GoalError(f"task object {oid!r} is neither movable nor articulated")


def _harm_ids(s0: WorldState, task_ids) -> list[str]:
    """Objects protected by the default do-no-harm clause: everything that
    could be disturbed (movable or articulated) and is not a task object."""
    protected = []
    for oid in sorted(s0.all_object_states()):
        spec = s0.get_spec(oid)
        if oid not in task_ids and (spec.movable or spec.articulation is not None):
            protected.append(oid)
    return protected


def _target_atoms(
    oid: str, s0: WorldState, pose: Pose, open_frac: float | None, tol: ToleranceSpec
) -> list[Atom]:
    spec = s0.get_spec(oid)
    atoms: list[Atom] = []
    if spec.movable:
        p = pose.translation
        atoms.append(atom("within_m", oid, (float(p[0]), float(p[1]), float(p[2])), tol.translation))
        if tol.min_iou is not None:
            goal_box = Box(pose, spec.half_extents)
            # The goal-region literal is axis-aligned by grammar; skip the
            # overlap test when the goal pose is not, rather than scoring
            # against a box the object cannot fill.
            if goal_box.is_axis_aligned(tol=1e-9):
                lo, hi = goal_box.aabb()
                center = (lo + hi) / 2.0
                he = (hi - lo) / 2.0
                lit = BoxLiteral(tuple(float(v) for v in center), tuple(float(v) for v in he))
                atoms.append(atom("iou_gt", oid, lit, tol.min_iou))
    if spec.articulation is not None and open_frac is not None:
        lo = max(0.0, open_frac - tol.open)
        hi = min(1.0, open_frac + tol.open)
        atoms.append(atom("open_between", oid, lo, hi))
    if not atoms:
        raise GoalError(f"no measurable goal condition for task object {oid!r}")
    return atoms


def _program_from_state(
    s0: WorldState, goal_state: WorldState, task_ids: list[str], tol_map: dict[str, ToleranceSpec]
) -> PredicateProgram:
    scored = []
    for oid in task_ids:
        st = goal_state.get_state(oid)
        open_frac = (
            open_fraction(oid, goal_state) if s0.get_spec(oid).articulation is not None else None
        )
        atoms = _target_atoms(oid, s0, st.pose, open_frac, tol_map[oid])
        scored.append(atoms[0] if len(atoms) == 1 else all_of(*atoms))
    harm_ids = _harm_ids(s0, set(task_ids))
    harm = all_of(*(atom("unmoved", oid) for oid in harm_ids)) if harm_ids else None
    return PredicateProgram(tuple(scored), harm)


def compile_goal(
    kind: str,
    s0: WorldState,
    goal_state: WorldState,
    task_ids: list[str],
    tol: ToleranceSpec,
    *,
    exploration_budget: int = DEFAULT_EXPLORATION_BUDGET,
) -> GoalSpec:
    """The goal-specification function: map (s0, goal state) to a goal form.

    `task_ids` orders the scored expressions of predicate compilation and the
    target map of geometric compilation.  The same tolerance applies to every
    task object; build :class:`GeometricGoal` directly for per-object values.
    """
    if kind in ("image", "language"):
        raise UnsupportedGoalError(kind)
    if kind not in ("geometric", "predicate", "experience"):
        raise GoalError(f"unknown goal kind {kind!r}")
    if kind == "experience":
        return ExperienceGoal(goal_state.copy(), exploration_budget, tol)
    if not task_ids:
        raise EmptyTaskSetError()
    for oid in task_ids:
        _check_target(s0, goal_state, oid)
    if kind == "geometric":
        targets = {}
        for oid in task_ids:
            st = goal_state.get_state(oid)
            open_frac = (
                open_fraction(oid, goal_state)
                if s0.get_spec(oid).articulation is not None
                else None
            )
            targets[oid] = (st.pose, open_frac)
        return GeometricGoal(targets, {oid: tol for oid in task_ids})
    return PredicateGoal(_program_from_state(s0, goal_state, list(task_ids), {oid: tol for oid in task_ids}))


def as_program(goal: GoalSpec, s0: WorldState, tol: ToleranceSpec | None = None) -> PredicateProgram:
    """Every goal form scores through one canonical evaluation program.

    Geometric goals compile their targets; experience goals first recover the
    implicit task set from the goal state (using `tol`, or the goal's own).
    """
    if isinstance(goal, PredicateGoal):
        return goal.program
    if isinstance(goal, GeometricGoal):
        scored = []
        for oid, (pose, open_frac) in goal.targets.items():
            atoms = _target_atoms(oid, s0, pose, open_frac, goal.tol[oid])
            scored.append(atoms[0] if len(atoms) == 1 else all_of(*atoms))
        harm_ids = _harm_ids(s0, set(goal.targets))
        harm = all_of(*(atom("unmoved", oid) for oid in harm_ids)) if harm_ids else None
        return PredicateProgram(tuple(scored), harm)
    if isinstance(goal, ExperienceGoal):
        use_tol = tol if tol is not None else goal.tol
        task_ids = derive_task_set(s0, goal.goal_state, use_tol)
        if not task_ids:
            # Degenerate: nothing differs. One vacuously true test keeps the
            # scored list nonempty and completion well defined.
            some_id = sorted(s0.all_object_states())[0] if s0.all_object_states() else None
            if some_id is None:
                raise GoalError("experience goal over an empty scene")
            return PredicateProgram((atom("rel_within_m", some_id, some_id, 1e9),), None)
        return _program_from_state(s0, goal.goal_state, task_ids, {oid: use_tol for oid in task_ids})
    raise GoalError(f"not a goal: {goal!r}")


def derive_task_set(s0: WorldState, goal_state: WorldState, tol: ToleranceSpec) -> list[str]:
    """Ids whose displacement between the two states exceeds tolerance,
    sorted.  Symmetric in its state arguments."""
    return [rec.id for rec in state_diff(s0, goal_state, tol) if rec.moved]


def goal_state_of(goal: GoalSpec, s0: WorldState) -> WorldState:
    """A world state that satisfies the goal, when one is recoverable.

    Experience goals carry theirs; geometric goals apply their targets to a
    copy of the initial state.  Predicate goals have no canonical witness
    state, so they are refused.
    """
    if isinstance(goal, ExperienceGoal):
        return goal.goal_state.copy()
    if isinstance(goal, GeometricGoal):
        gs = s0.copy()
        for oid, (pose, open_frac) in goal.targets.items():
            st = gs.get_state(oid)
            st.pose = pose
            if open_frac is not None:
                lo, hi = gs.get_spec(oid).articulation.limits
                st.joint_position = lo + float(open_frac) * (hi - lo)
        return gs
    raise GoalError("no explicit goal state exists for this goal kind")
