"""Episode scoring: gated completion, success, SPL, and report assembly.

Completion is the fraction of scored clauses that hold in the final state,
forced to zero when any protected object was disturbed.  SPL weighs success
by the ratio of the shortest achievable travel to the agent's actual travel.
The shortest length comes from a grid path oracle that orders the
pick-and-place legs like a small traveling-salesman tour: exhaustive
enumeration up to :data:`EXACT_TOUR_LIMIT` stops, nearest-neighbor with
2-opt refinement above that.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .goals import ExperienceGoal, GeometricGoal, PredicateGoal, as_program, derive_task_set
from .nav import NoPathError, OccupancyGrid, geodesic
from .predicates import Combinator, PredicateProgram, evaluate, print_expr
from .scene import WorldState
from .sim import EpisodeConfig

__all__ = [
    "EXACT_TOUR_LIMIT",
    "EvaluationReport",
    "TourLegs",
    "UnreachableTargetError",
    "assemble_report",
    "compute_legs",
    "exact_tour_length",
    "heuristic_tour_length",
    "score",
    "shortest_path_length",
    "spl",
    "task_ids_of",
]

# Largest stop count still solved by brute-force permutation (720 orders).
EXACT_TOUR_LIMIT = 6


class UnreachableTargetError(Exception):
    """A pick or place location cannot be reached on the occupancy grid."""

    def __init__(self, object_id: str, endpoint: str):
        super().__init__(
            f"no collision-free route to the {endpoint} location of object '{object_id}'"
        )
        self.object_id = object_id
        self.endpoint = endpoint


# ---------------------------------------------------------------------------
# Completion / success


def _gate(verdicts, harm_pass: bool) -> tuple[float, bool, bool]:
    total = len(verdicts)
    passing = sum(1 for v in verdicts if v)
    harm_pass = bool(harm_pass)
    completion = (passing / total) if (harm_pass and total) else 0.0
    success = bool(harm_pass and total and passing == total)
    return completion, harm_pass, success


def score(
    episode: EpisodeConfig,
    final_state: WorldState,
    s0: WorldState | None = None,
    s_star: WorldState | None = None,
    program: PredicateProgram | None = None,
) -> tuple[float, bool, bool]:
    """(completion, harm_pass, success) for a finished episode.

    Completion is the passing fraction of scored clauses, zero outright when
    the harm clause fails.  Success needs every clause and the harm check.
    """
    s0 = s0 if s0 is not None else episode.initial
    if program is None:
        program = as_program(episode.goal, s0, episode.tolerance)
    verdicts, harm_pass = evaluate(
        program,
        s0,
        final_state,
        s_star,
        harm_tol=episode.harm_tolerance,
        contact_eps=episode.contact_eps,
    )
    return _gate(verdicts, harm_pass)


# ---------------------------------------------------------------------------
# SPL


def spl(success: bool, shortest: float, actual: float) -> float:
    """Path-weighted success: S * l / max(l_a, l).

    `shortest` is the oracle length l, `actual` the agent's travel l_a.
    Degenerate zero-length episodes score 1.0 when successful, 0.0 otherwise.
    """
    if shortest < 0 or actual < 0:
        raise ValueError("path lengths must be non-negative")
    s = 1.0 if success else 0.0
    denom = max(actual, shortest)
    if denom == 0.0:
        return s
    return s * shortest / denom


# ---------------------------------------------------------------------------
# Shortest-path oracle


@dataclass(frozen=True)
class TourLegs:
    """Geodesic leg table for one episode's pick-and-place tour.

    `inter` maps ("start", j) to spawn->pick_j and (i, j) to place_i->pick_j
    distances; `intra` maps each object to its pick->place distance, paid
    exactly once whatever the visiting order.  The stop name "start" is
    reserved.
    """

    ids: tuple[str, ...]
    inter: dict
    intra: dict


def _subject_ids(program: PredicateProgram) -> list[str]:
    """First-position object ids of scored atoms, in first-appearance order."""
    out: list[str] = []
    seen: set[str] = set()

    def walk(e):
        if isinstance(e, Combinator):
            for o in e.operands:
                walk(o)
            return
        if e.args and isinstance(e.args[0], str) and e.args[0] not in seen:
            seen.add(e.args[0])
            out.append(e.args[0])

    for e in program.scored:
        walk(e)
    return out


def task_ids_of(episode: EpisodeConfig, s0: WorldState | None = None) -> list[str]:
    """The objects the tour must service, from the episode or its goal."""
    s0 = s0 if s0 is not None else episode.initial
    if episode.task_ids:
        return list(episode.task_ids)
    goal = episode.goal
    if isinstance(goal, GeometricGoal):
        return sorted(goal.targets)
    if isinstance(goal, ExperienceGoal):
        return derive_task_set(s0, goal.goal_state, goal.tol)
    if isinstance(goal, PredicateGoal):
        return [oid for oid in _subject_ids(goal.program) if oid in s0.specs]
    return []


def _place_hint(program: PredicateProgram, oid: str, s0: WorldState):
    """Where a predicate goal wants `oid` to end up, if it says at all."""
    hint = None

    def walk(e):
        nonlocal hint
        if hint is not None:
            return
        if isinstance(e, Combinator):
            for o in e.operands:
                walk(o)
            return
        if not e.args or e.args[0] != oid:
            return
        if e.name == "within_m":
            hint = np.asarray(e.args[1][:2], dtype=float)
        elif e.name in ("iou_gt", "in_region"):
            hint = np.asarray(e.args[1].center[:2], dtype=float)
        elif e.name in ("on", "inside"):
            hint = np.asarray(s0.world_box(e.args[1]).center_pose.translation[:2], dtype=float)

    for e in program.scored:
        walk(e)
    return hint


def compute_legs(episode: EpisodeConfig, *, grid: OccupancyGrid | None = None) -> TourLegs:
    """Geodesic distances between the spawn and every pick/place location.

    The grid covers static obstacles only: movable objects are assumed out
    of the way by the time the agent travels past their cells.
    """
    s0 = episode.initial
    ids = tuple(task_ids_of(episode, s0))
    if not ids:
        return TourLegs((), {}, {})
    if "start" in ids:
        raise ValueError("object id 'start' is reserved by the tour oracle")
    if grid is None:
        grid = OccupancyGrid.build(s0, s0.agent.radius)

    goal = episode.goal
    picks: dict[str, np.ndarray] = {}
    places: dict[str, np.ndarray] = {}
    for oid in ids:
        picks[oid] = np.asarray(s0.get_state(oid).pose.translation[:2], dtype=float)
        if isinstance(goal, GeometricGoal) and oid in goal.targets:
            places[oid] = np.asarray(goal.targets[oid][0].translation[:2], dtype=float)
        elif isinstance(goal, ExperienceGoal):
            places[oid] = np.asarray(
                goal.goal_state.get_state(oid).pose.translation[:2], dtype=float
            )
        elif isinstance(goal, PredicateGoal):
            hint = _place_hint(goal.program, oid, s0)
            places[oid] = picks[oid] if hint is None else hint
        else:
            places[oid] = picks[oid]

    def leg(a_xy, b_xy, oid: str, endpoint: str) -> float:
        try:
            return geodesic(grid, a_xy, b_xy)
        except NoPathError as exc:
            raise UnreachableTargetError(oid, endpoint) from exc

    start_xy = np.asarray(s0.agent.position, dtype=float)
    intra = {oid: leg(picks[oid], places[oid], oid, "place") for oid in ids}
    inter = {("start", oid): leg(start_xy, picks[oid], oid, "pick") for oid in ids}
    for a in ids:
        for b in ids:
            if a != b:
                inter[(a, b)] = leg(places[a], picks[b], b, "pick")
    return TourLegs(ids, inter, intra)


def _order_cost(legs: TourLegs, order) -> float:
    cost = legs.inter[("start", order[0])]
    for a, b in zip(order, order[1:]):
        cost += legs.inter[(a, b)]
    return cost


def exact_tour_length(legs: TourLegs) -> float:
    """Minimal tour by exhaustive permutation; intended for few stops."""
    if not legs.ids:
        return 0.0
    best = min(_order_cost(legs, perm) for perm in itertools.permutations(legs.ids))
    return best + sum(legs.intra.values())


def _nearest_neighbor_order(legs: TourLegs, first: str) -> list[str]:
    order = [first]
    remaining = [o for o in legs.ids if o != first]
    at = first
    while remaining:
        nxt = min(remaining, key=lambda o: (legs.inter[(at, o)], o))
        order.append(nxt)
        remaining.remove(nxt)
        at = nxt
    return order


def _local_search_cost(legs: TourLegs, order: list[str]) -> float:
    """Improve an order with 2-opt reversals and single-stop relocations."""
    best = list(order)
    best_cost = _order_cost(legs, best)
    improved = True
    while improved:
        improved = False
        for i in range(len(best) - 1):
            for j in range(i + 1, len(best)):
                cand = best[:i] + best[i : j + 1][::-1] + best[j + 1 :]
                c = _order_cost(legs, cand)
                if c < best_cost - 1e-12:
                    best, best_cost, improved = cand, c, True
        for i in range(len(best)):
            for j in range(len(best)):
                if j == i:
                    continue
                cand = best[:i] + best[i + 1 :]
                cand.insert(j, best[i])
                c = _order_cost(legs, cand)
                if c < best_cost - 1e-12:
                    best, best_cost, improved = cand, c, True
    return best_cost


def heuristic_tour_length(legs: TourLegs) -> float:
    """Nearest-neighbor tours from every possible first stop, each polished
    by 2-opt reversals and single-stop relocations; cheapest wins.

    Always a real visiting order, so never below the exact optimum.  The
    multi-start matters: a lone greedy first pick is the one mistake the
    local moves cannot undo.  Up to four stops full enumeration is cheaper
    than the search (at most 24 orders), so small tours are simply exact.
    Deterministic: ties break on object id, improvement passes repeat until
    no move helps.
    """
    if not legs.ids:
        return 0.0
    if len(legs.ids) <= 4:
        return exact_tour_length(legs)
    best_cost = min(
        _local_search_cost(legs, _nearest_neighbor_order(legs, first)) for first in legs.ids
    )
    return best_cost + sum(legs.intra.values())


def shortest_path_length(
    episode: EpisodeConfig,
    *,
    grid: OccupancyGrid | None = None,
    legs: TourLegs | None = None,
) -> float:
    """Oracle travel for the episode: spawn, then every pick->place in the
    cheapest order, one object carried at a time."""
    if legs is None:
        legs = compute_legs(episode, grid=grid)
    if len(legs.ids) <= EXACT_TOUR_LIMIT:
        return exact_tour_length(legs)
    return heuristic_tour_length(legs)


# ---------------------------------------------------------------------------
# Report assembly


@dataclass(frozen=True)
class EvaluationReport:
    """Everything an episode run is judged on.

    `decision_latency_mean_s` is wall-clock measurement and excluded from
    equality so that replays of the same run compare equal.
    """

    episode_id: str
    completion: float
    harm_pass: bool
    success: bool
    ticks: int
    energy: float
    agent_path_length: float
    shortest_path_length: float
    spl: float
    per_predicate: tuple[tuple[str, bool], ...]
    energy_constants: dict = field(default_factory=dict)
    decision_latency_mean_s: float | None = field(default=None, compare=False)
    aborted: bool = False

    def __post_init__(self):
        if not 0.0 <= self.completion <= 1.0:
            raise ValueError("completion must be in [0, 1]")
        if not self.harm_pass and self.completion != 0.0:
            raise ValueError("completion must be zero when the harm check fails")
        if self.success and self.completion != 1.0:
            raise ValueError("success requires completion 1.0")
        if not 0.0 <= self.spl <= 1.0:
            raise ValueError("spl must be in [0, 1]")
        if not self.success and self.spl != 0.0:
            raise ValueError("spl must be zero on failure")
        if self.aborted and self.success:
            raise ValueError("an aborted run cannot be a success")

    def as_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "completion": self.completion,
            "harm_pass": self.harm_pass,
            "success": self.success,
            "ticks": self.ticks,
            "energy": self.energy,
            "agent_path_length": self.agent_path_length,
            "shortest_path_length": self.shortest_path_length,
            "spl": self.spl,
            "per_predicate": [[text, verdict] for text, verdict in self.per_predicate],
            "energy_constants": dict(self.energy_constants),
            "decision_latency_mean_s": self.decision_latency_mean_s,
            "aborted": self.aborted,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(
            episode_id=d["episode_id"],
            completion=d["completion"],
            harm_pass=d["harm_pass"],
            success=d["success"],
            ticks=d["ticks"],
            energy=d["energy"],
            agent_path_length=d["agent_path_length"],
            shortest_path_length=d["shortest_path_length"],
            spl=d["spl"],
            per_predicate=tuple((t, bool(v)) for t, v in d["per_predicate"]),
            energy_constants=dict(d.get("energy_constants", {})),
            decision_latency_mean_s=d.get("decision_latency_mean_s"),
            aborted=bool(d.get("aborted", False)),
        )


def assemble_report(
    episode: EpisodeConfig,
    final_state: WorldState,
    *,
    ticks: int,
    energy: float,
    agent_path_length: float,
    s0: WorldState | None = None,
    s_star: WorldState | None = None,
    program: PredicateProgram | None = None,
    decision_latency_mean_s: float | None = None,
    grid: OccupancyGrid | None = None,
    aborted: bool = False,
) -> EvaluationReport:
    """Scores the final state and bundles it with the run's accounting.

    The energy constants ride along in the report because the joule figures
    only compare between runs that declared the same constants.  An aborted
    run (agent hung, disconnected, or broke protocol) keeps whatever partial
    completion the final state earns but can never count as a success.
    """
    s0 = s0 if s0 is not None else episode.initial
    if program is None:
        program = as_program(episode.goal, s0, episode.tolerance)
    verdicts, harm_pass = evaluate(
        program,
        s0,
        final_state,
        s_star,
        harm_tol=episode.harm_tolerance,
        contact_eps=episode.contact_eps,
    )
    completion, harm_pass, success = _gate(verdicts, harm_pass)
    if aborted:
        success = False
    shortest = shortest_path_length(episode, grid=grid)
    return EvaluationReport(
        episode_id=episode.episode_id,
        completion=completion,
        harm_pass=harm_pass,
        success=success,
        ticks=int(ticks),
        energy=float(energy),
        agent_path_length=float(agent_path_length),
        shortest_path_length=float(shortest),
        spl=spl(success, shortest, float(agent_path_length)),
        per_predicate=tuple(
            (print_expr(e), bool(v)) for e, v in zip(program.scored, verdicts)
        ),
        energy_constants=episode.energy.as_dict(),
        decision_latency_mean_s=decision_latency_mean_s,
        aborted=aborted,
    )
