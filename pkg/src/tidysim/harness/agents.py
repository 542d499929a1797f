"""Baseline agents: a random-action fuzzer and a privileged planner.

The planner (:class:`OracleAgent`) runs in process with noise disabled and
reads the true world state from its environment.  It orders the task
objects with the same leg costs the scoring oracle uses, walks A* routes on
an occupancy grid that includes movable objects, and verifies every grab
before issuing it by asking the simulator what the crosshair would take
hold of from the intended stance.  It is a solvability witness, not a
research baseline.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..geom import Box, Pose, translation_distance
from ..goals import ExperienceGoal, GeometricGoal, as_program, goal_state_of
from ..metrics import compute_legs, task_ids_of
from ..nav import NoPathError, OccupancyGrid, astar
from ..predicates import evaluate
from ..scene import WorldState, open_fraction, settle_height
from ..sim import (
    PITCH_LIMIT,
    TURN_STEP,
    Action,
    Environment,
    EpisodeConfig,
    Grab,
    LookDown,
    LookUp,
    MoveForward,
    Release,
    SetJoint,
    Stop,
    Stow,
    TurnLeft,
    TurnRight,
    Unstow,
    can_set_joint,
    would_grab,
)

__all__ = ["RandomAgent", "OracleAgent", "OracleStuckError", "OracleGoalError"]


def _wrap(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


class OracleStuckError(Exception):
    """Planning retries exhausted; names the object that could not be served."""

    def __init__(self, object_id: str, why: str):
        super().__init__(f"oracle stuck on {object_id!r}: {why}")
        self.object_id = object_id


class OracleGoalError(Exception):
    def __init__(self, why: str):
        super().__init__(why)


class RandomAgent:
    """Uniform-ish action babble for fuzzing the simulator and the wire."""

    def __init__(self, seed: int = 0, stop_prob: float = 0.002):
        self._seed = seed
        self._stop_prob = stop_prob
        self._rng = np.random.default_rng(seed)
        self._maybe_stowed: list[str] = []
        self._last_held: str | None = None

    def begin(self, episode: EpisodeConfig, env, phase: str):
        salt = 1 if phase == "explore" else 0
        self._rng = np.random.default_rng([self._seed, episode.seed & (2**63 - 1), salt])
        self._maybe_stowed = []
        self._last_held = None

    def act(self, obs) -> Action:
        rng = self._rng
        if rng.random() < self._stop_prob:
            return Stop()
        pool: list[Action] = (
            [MoveForward()] * 8
            + [TurnLeft()] * 3
            + [TurnRight()] * 3
            + [LookUp(), LookDown()]
            + [Grab()] * 2
            + [Release()] * 2
            + [Stow()]
        )
        articulated = [v.id for v in obs.visible if v.open_fraction is not None]
        if articulated:
            oid = articulated[int(rng.integers(len(articulated)))]
            pool.append(SetJoint(oid, float(rng.random())))
        if self._maybe_stowed:
            pool.append(Unstow(self._maybe_stowed[int(rng.integers(len(self._maybe_stowed)))]))
        choice = pool[int(rng.integers(len(pool)))]
        # Bookkeep possible stow targets from the held-id transitions we see.
        if isinstance(choice, Stow) and obs.held is not None:
            self._maybe_stowed.append(obs.held)
        if isinstance(choice, Unstow) and choice.id in self._maybe_stowed:
            self._maybe_stowed.remove(choice.id)
        self._last_held = obs.held
        return choice


# ---------------------------------------------------------------------------
# Oracle


@dataclass
class _MoveJob:
    oid: str
    goal_pos: np.ndarray  # 3-vector target center
    tol: float  # translation tolerance the score will apply


@dataclass
class _JointJob:
    oid: str
    fraction: float


@dataclass
class _Route:
    target_cell: tuple[int, int]
    grid: OccupancyGrid
    waypoints: deque = field(default_factory=deque)


class OracleAgent:
    """State-machine planner over privileged state access."""

    def __init__(self, *, max_replans: int = 80):
        self._max_replans = max_replans
        self._mode = "idle"

    # -- planning --------------------------------------------------------

    def begin(self, episode: EpisodeConfig, env: Environment, phase: str):
        self._episode = episode
        self._env = env
        if phase == "explore":
            # Privileged planners read the goal state directly; there is
            # nothing to learn from walking around it.
            self._mode = "explore"
            return
        self._mode = "run"
        self._pending: deque[Action] = deque()
        self._phase = "idle"
        self._replans = 0
        self._route: _Route | None = None
        self._target_cell: tuple[int, int] | None = None
        self._block_pos: np.ndarray | None = None
        self._block_streak = 0
        self._leg_blocks = 0
        self._candidates: list[tuple[int, int]] = []
        self._cand_grid: OccupancyGrid | None = None
        self._last_issued: Action | None = None
        self._job = None
        self._jobs = deque(self._plan_jobs(episode))

    def _plan_jobs(self, episode: EpisodeConfig):
        s0 = episode.initial
        program = as_program(episode.goal, s0, episode.tolerance)
        verdicts, harm = evaluate(
            program,
            s0,
            s0,
            harm_tol=episode.harm_tolerance,
            contact_eps=episode.contact_eps,
        )
        if all(verdicts) and harm:
            return []
        try:
            goal_state = goal_state_of(episode.goal, s0)
        except Exception as e:
            raise OracleGoalError(
                f"cannot recover a goal state to plan toward: {e}"
            ) from None
        task_ids = task_ids_of(episode)
        moves: list[_MoveJob] = []
        joints: list[_JointJob] = []
        for oid in task_ids:
            spec = s0.get_spec(oid)
            st0 = s0.get_state(oid)
            st1 = goal_state.get_state(oid)
            if spec.movable and translation_distance(st0.pose, st1.pose) > 1e-9:
                moves.append(_MoveJob(oid, st1.pose.translation.copy(), self._tol_for(oid)))
            if spec.articulation is not None:
                f0 = open_fraction(oid, s0)
                f1 = open_fraction(oid, goal_state)
                if abs(f1 - f0) > 1e-9:
                    joints.append(_JointJob(oid, f1))
        ordered = self._order_moves(episode, moves, s0, goal_state)
        return [*ordered, *joints]

    def _tol_for(self, oid: str) -> float:
        goal = self._episode.goal
        if isinstance(goal, GeometricGoal) and oid in goal.tol:
            return goal.tol[oid].translation
        if isinstance(goal, ExperienceGoal):
            return goal.tol.translation
        return self._episode.tolerance.translation

    def _order_moves(self, episode, moves, s0, goal_state):
        if len(moves) <= 1:
            return moves
        by_id = {m.oid: m for m in moves}
        # Service order must clear a goal footprint before filling it: if
        # object i's goal box overlaps object j's current box, j goes first.
        must_precede: set[tuple[str, str]] = set()
        for i in by_id:
            goal_box = Box(goal_state.get_state(i).pose, s0.get_spec(i).half_extents)
            g_lo, g_hi = goal_box.aabb()
            for j in by_id:
                if i == j:
                    continue
                lo, hi = s0.world_box(j).aabb()
                overlap = np.minimum(g_hi, hi) - np.maximum(g_lo, lo)
                if np.all(overlap > 1e-9):
                    must_precede.add((j, i))

        def admissible(order):
            pos = {oid: k for k, oid in enumerate(order)}
            return all(pos[a] < pos[b] for a, b in must_precede)

        legs = compute_legs(episode)
        inter, intra = legs.inter, legs.intra

        def cost(order):
            total = inter[("start", order[0])] + intra.get(order[0], 0.0)
            for a, b in zip(order, order[1:]):
                total += inter[(a, b)] + intra.get(b, 0.0)
            return total

        ids = [m.oid for m in moves]
        best = None
        if len(ids) <= 6:
            for perm in itertools.permutations(ids):
                if not admissible(perm):
                    continue
                c = cost(perm)
                if best is None or c < best[0]:
                    best = (c, perm)
        if best is None:
            # Greedy fallback: nearest admissible next stop.
            order: list[str] = []
            remaining = set(ids)
            while remaining:
                ready = [
                    o
                    for o in sorted(remaining)
                    if all(a in order for a, b in must_precede if b == o)
                ]
                if not ready:
                    raise OracleStuckError(sorted(remaining)[0], "cyclic goal-footprint conflicts")
                key = ("start", None) if not order else (order[-1], None)
                ready.sort(key=lambda o: inter[(key[0], o)])
                order.append(ready[0])
                remaining.remove(ready[0])
            best = (0.0, tuple(order))
        return [by_id[oid] for oid in best[1]]

    # -- geometry helpers ------------------------------------------------

    def _grid(self, world: WorldState) -> OccupancyGrid:
        # Pad beyond the agent radius so every point inside a free cell,
        # not just its center, keeps the body clear.  Cell centers sit up
        # to half a diagonal (~0.07) from any point in the cell, and the
        # 10-degree heading grid lets the base drift a couple of
        # centimeters off the ideal line between corrections.
        return OccupancyGrid.build(
            world, agent_radius=world.agent.radius + 0.1, include_objects=True
        )

    def _reach_limit(self, box: Box) -> float:
        eye = self._episode.view.eye_height
        lo, hi = box.aabb()
        dz = abs(eye - float(np.clip(eye, lo[2], hi[2])))
        reach_sq = self._episode.pick_range**2 - dz**2
        if reach_sq <= 0:
            return 0.0
        return math.sqrt(reach_sq)

    def _cells_near(
        self, world: WorldState, target_xy, r_max: float, r_min: float = 0.0
    ) -> list[tuple[int, int]]:
        # Stance cells only need standing clearance, so use the unpadded
        # grid here; the padded one can wipe out the whole ring around a
        # floor object whose reach ring is a single cell wide.
        grid = OccupancyGrid.build(world, include_objects=True)
        tx, ty = float(target_xy[0]), float(target_xy[1])
        out = []
        span = int(math.ceil(r_max / grid.resolution)) + 1
        ci, cj = grid.cell_of((tx, ty))
        for di in range(-span, span + 1):
            for dj in range(-span, span + 1):
                cell = (ci + di, cj + dj)
                if not grid.is_free(cell):
                    continue
                x, y = grid.center_of(cell)
                d = math.hypot(x - tx, y - ty)
                if r_min <= d <= r_max:
                    out.append((d, cell))
        out.sort()
        self._cand_grid = grid
        return [cell for _, cell in out]

    def _route_to(self, world: WorldState, cell: tuple[int, int]) -> _Route | None:
        grid = self._grid(world)
        start = grid.nearest_free(world.agent.position)
        if start is None:
            return None
        goal = cell
        tail: list[np.ndarray] = []
        if not grid.is_free(cell):
            # The stance sits inside the padded band.  Route to a nearby
            # padded-free anchor whose straight line to the stance stays in
            # cells that are free at the true radius, and walk that last
            # stretch directly.
            raw = OccupancyGrid.build(world, include_objects=True)
            goal = self._tail_anchor(grid, raw, cell)
            if goal is None:
                return None
            tail = [np.array(grid.center_of(cell))]
        try:
            _, path = astar(grid, start, goal)
        except NoPathError:
            return None
        points = deque(np.array(grid.center_of(c)) for c in path[1:])
        points.extend(tail)
        return _Route(cell, grid, points)

    def _tail_anchor(
        self, padded: OccupancyGrid, raw: OccupancyGrid, cell: tuple[int, int]
    ) -> tuple[int, int] | None:
        cx, cy = padded.center_of(cell)
        best = None
        span = int(math.ceil(0.6 / padded.resolution))
        for di in range(-span, span + 1):
            for dj in range(-span, span + 1):
                cand = (cell[0] + di, cell[1] + dj)
                if not padded.is_free(cand):
                    continue
                x, y = padded.center_of(cand)
                d = math.hypot(x - cx, y - cy)
                if d > 0.6:
                    continue
                if best is not None and d >= best[0]:
                    continue
                if self._line_free(raw, (x, y), (cx, cy)):
                    best = (d, cand)
        return best[1] if best else None

    @staticmethod
    def _line_free(grid: OccupancyGrid, a, b) -> bool:
        d = float(np.linalg.norm(np.asarray(b) - np.asarray(a)))
        steps = max(int(math.ceil(d / 0.05)), 1)
        for t in np.linspace(0.0, 1.0, steps + 1):
            p = (1 - t) * np.asarray(a) + t * np.asarray(b)
            if not grid.is_free(grid.cell_of(p)):
                return False
        return True

    def _follow(self, world: WorldState) -> Action | None:
        """Next locomotion action along the current route; None on arrival.

        Grid paths zigzag at cell granularity, so steering at the next cell
        makes the bearing flap and the base spin in place.  Instead aim at
        the farthest waypoint reachable in a straight free line and let the
        in-between ones fall away.
        """
        agent = world.agent
        route = self._route
        wp = route.waypoints
        while wp and np.linalg.norm(wp[0] - agent.position) < 0.15:
            wp.popleft()
        if not wp:
            return None
        ahead = 0
        for k in range(1, min(len(wp), 40)):
            if self._line_free(route.grid, agent.position, wp[k]):
                ahead = k
            else:
                break
        for _ in range(ahead):
            wp.popleft()
        target = wp[0]
        dist = float(np.linalg.norm(target - agent.position))
        if len(wp) == 1 and dist < 0.2:
            wp.popleft()
            return None
        delta = target - agent.position
        desired = math.atan2(delta[1], delta[0])
        err = _wrap(desired - agent.heading)
        if abs(err) > TURN_STEP / 2 + 1e-9:
            turn = TurnLeft() if err > 0 else TurnRight()
            # A target whose bearing sits between two reachable headings
            # would make left/right alternate forever; stepping through is
            # cheaper and pops the waypoint.
            opposite = TurnLeft if isinstance(turn, TurnRight) else TurnRight
            if abs(err) < math.pi / 4 and isinstance(self._last_issued, opposite):
                return MoveForward()
            return turn
        return MoveForward()

    def _turns_to(self, current: float, target: float) -> list[Action]:
        k = round(_wrap(target - current) / TURN_STEP)
        step = TurnLeft() if k > 0 else TurnRight()
        return [step] * abs(k)

    def _pitch_moves(self, current: float, target: float) -> list[Action]:
        k = round((target - current) / TURN_STEP)
        step = LookUp() if k > 0 else LookDown()
        return [step] * abs(k)

    def _hypothetical(
        self, world: WorldState, heading: float, pitch: float, position=None
    ) -> WorldState:
        agent = world.agent.copy()
        agent.heading = heading
        agent.pitch = pitch
        if position is not None:
            agent.position = np.array([position[0], position[1]], dtype=float)
        return WorldState(world.specs, world.objects, agent, world.static_layout, world.carried)

    def _aim_grab(self, world: WorldState, oid: str, at=None) -> list[Action] | None:
        """Turn/pitch sequence after which a Grab takes hold of `oid`, or
        None if no stance from the current spot works.

        With `at` set the check runs as if standing there instead; the
        returned actions are then only a feasibility witness.  Headings and
        pitches live on a fixed 10-degree lattice, so feasibility does not
        depend on the agent's current orientation.
        """
        agent = world.agent
        view = self._episode.view
        center = world.world_box(oid).center_pose.translation
        pos = agent.position if at is None else np.asarray(at, dtype=float)
        eye = np.array([pos[0], pos[1], view.eye_height])
        delta = center - eye
        az = math.atan2(delta[1], delta[0])
        horiz = math.hypot(delta[0], delta[1])
        el = math.atan2(delta[2], horiz)
        turn_options = sorted(
            (i for i in range(-18, 19) if abs(_wrap(agent.heading + i * TURN_STEP - az)) < 0.25),
            key=abs,
        )
        pitch_now = round(agent.pitch / TURN_STEP)
        pitch_want = el - view.crosshair_pitch
        pitch_options = sorted(
            (
                k
                for k in range(-6, 7)
                if abs(k * TURN_STEP - pitch_want) < 0.3 and abs(k * TURN_STEP) <= PITCH_LIMIT + 1e-9
            ),
            key=lambda k: abs(k * TURN_STEP - pitch_want),
        )
        for i in turn_options:
            for k in pitch_options:
                hypo = self._hypothetical(
                    world, agent.heading + i * TURN_STEP, k * TURN_STEP, position=pos
                )
                hit, _ = would_grab(hypo, view, self._episode.pick_range)
                if hit == oid:
                    turn = TurnLeft() if i > 0 else TurnRight()
                    look = LookUp() if k > pitch_now else LookDown()
                    return [turn] * abs(i) + [look] * abs(k - pitch_now)
        return None

    def _placement_collides(self, world: WorldState, placed: Box) -> bool:
        p_lo, p_hi = placed.aabb()
        boxes = [box for _, box in world.static_layout]
        boxes += [world.world_box(oid) for oid in world.objects]
        for box in boxes:
            lo, hi = box.aabb()
            overlap = np.minimum(p_hi, hi) - np.maximum(p_lo, lo)
            if np.all(overlap > 1e-9):
                return True
        return False

    def _aim_release(self, world: WorldState, job: _MoveJob) -> list[Action] | None:
        """Turn sequence that makes Release land within tolerance, or None."""
        agent = world.agent
        held = agent.held
        if held is None:
            return None
        spec = world.get_spec(held)
        rot = world.carried[held].pose.rotation
        best = None
        for i in range(-18, 19):
            heading = agent.heading + i * TURN_STEP
            xy = agent.position + 0.5 * np.array([math.cos(heading), math.sin(heading)])
            probe = Box(Pose(np.array([xy[0], xy[1], 0.0]), rot), spec.half_extents)
            lo, hi = probe.aabb()
            z = settle_height(probe, world) + (hi[2] - lo[2]) / 2.0
            placed = Box(Pose(np.array([xy[0], xy[1], z]), rot), spec.half_extents)
            if self._placement_collides(world, placed):
                continue
            err = float(np.linalg.norm(placed.center_pose.translation - job.goal_pos))
            if err > 0.8 * job.tol:
                continue
            if best is None or (err, abs(i)) < best[:2]:
                best = (err, abs(i), i)
        if best is None:
            return None
        return self._turns_to(agent.heading, agent.heading + best[2] * TURN_STEP)

    def _aim_joint(self, world: WorldState, job: _JointJob, at=None) -> list[Action] | None:
        agent = world.agent
        view = self._episode.view
        center = world.world_box(job.oid).center_pose.translation
        pos = agent.position if at is None else np.asarray(at, dtype=float)
        eye = np.array([pos[0], pos[1], view.eye_height])
        delta = center - eye
        if float(np.linalg.norm(delta)) > self._episode.pick_range:
            return None
        az = math.atan2(delta[1], delta[0])
        el = math.asin(float(np.clip(delta[2] / max(np.linalg.norm(delta), 1e-9), -1, 1)))
        pitch_target = np.clip(TURN_STEP * round(el / TURN_STEP), -PITCH_LIMIT, PITCH_LIMIT)
        moves = self._turns_to(agent.heading, az) + self._pitch_moves(agent.pitch, float(pitch_target))
        final_heading = agent.heading + TURN_STEP * round(_wrap(az - agent.heading) / TURN_STEP)
        hypo = self._hypothetical(world, final_heading, float(pitch_target), position=pos)
        if not can_set_joint(hypo, job.oid, view, self._episode.pick_range):
            return None
        return moves

    # -- the state machine ----------------------------------------------

    def act(self, obs) -> Action:
        if self._mode == "explore":
            return Stop()
        world = self._env.world
        if (
            isinstance(self._last_issued, MoveForward)
            and not obs.last_action_ok
            and self._route is not None
        ):
            self._bump(self._job.oid if self._job else "?", "move blocked")
            pos = world.agent.position
            same_spot = (
                self._block_pos is not None
                and float(np.linalg.norm(pos - self._block_pos)) < 0.05
            )
            self._block_streak = self._block_streak + 1 if same_spot else 1
            self._block_pos = pos.copy()
            self._route = None
            self._leg_blocks += 1
            if self._leg_blocks >= 3:
                # This stance keeps producing clipped approaches; write it
                # off and try the next one.
                self._pending.clear()
                if not self._advance_candidate(world):
                    raise OracleStuckError(
                        self._job.oid if self._job else "?", "stances exhausted after blocks"
                    )
                self._block_streak = 0
            elif self._block_streak >= 2:
                # Rerouting from the same pose found the same dead end, so
                # physically back out the way we came first.
                heading = world.agent.heading
                self._pending.extend(self._turns_to(heading, heading + math.pi))
                self._pending.append(MoveForward())
        action = self._decide(world)
        self._last_issued = action
        return action

    def _bump(self, oid: str, why: str):
        self._replans += 1
        if self._replans > self._max_replans:
            raise OracleStuckError(oid, f"replan budget exhausted ({why})")

    def _decide(self, world: WorldState) -> Action:
        while True:
            if self._pending:
                return self._pending.popleft()
            if self._phase == "idle":
                if not self._jobs:
                    return Stop()
                self._job = self._jobs.popleft()
                if isinstance(self._job, _MoveJob):
                    box = world.world_box(self._job.oid)
                    target = box.center_pose.translation[:2]
                    ring = self._cells_near(
                        world, target, max(self._reach_limit(box), 0.3)
                    )
                    # A ring distance inside reach is not enough: near the
                    # pitch limit the crosshair ray can pass clean over a
                    # low object, so keep only cells an aim actually works
                    # from.
                    self._candidates = [
                        c
                        for c in ring
                        if self._aim_grab(world, self._job.oid, at=self._cand_grid.center_of(c))
                        is not None
                    ]
                    self._phase = "goto_pick"
                    if not self._advance_candidate(world):
                        raise OracleStuckError(self._job.oid, "no reachable stance for pickup")
                else:
                    # SetJoint range is measured eye to center, not to the
                    # nearest face, so compute the stance ring from that.
                    center = world.world_box(self._job.oid).center_pose.translation
                    dz = self._episode.view.eye_height - float(center[2])
                    reach_sq = self._episode.pick_range**2 - dz**2
                    reach = math.sqrt(reach_sq) if reach_sq > 0 else 0.0
                    ring = self._cells_near(world, center[:2], max(reach - 0.1, 0.2))
                    self._candidates = [
                        c
                        for c in ring
                        if self._aim_joint(world, self._job, at=self._cand_grid.center_of(c))
                        is not None
                    ]
                    self._phase = "goto_joint"
                    if not self._advance_candidate(world):
                        raise OracleStuckError(self._job.oid, "no reachable stance at the joint")
                continue
            if self._phase in ("goto_pick", "goto_place", "goto_joint"):
                if self._route is None:
                    self._route = self._route_to(world, self._target_cell)
                    if self._route is None and not self._advance_candidate(world):
                        raise OracleStuckError(self._job.oid, "stance unreachable after replan")
                    continue
                step = self._follow(world)
                if step is not None:
                    return step
                self._phase = {
                    "goto_pick": "aim_grab",
                    "goto_place": "aim_release",
                    "goto_joint": "aim_joint",
                }[self._phase]
                continue
            if self._phase == "aim_grab":
                aim = self._aim_grab(world, self._job.oid)
                if aim is None:
                    self._bump(self._job.oid, "no grab stance here")
                    if not self._advance_candidate(world):
                        raise OracleStuckError(self._job.oid, "pickup stances exhausted")
                    self._phase = "goto_pick"
                    continue
                self._pending.extend(aim)
                self._pending.append(Grab())
                self._phase = "grab_check"
                continue
            if self._phase == "grab_check":
                if world.agent.held == self._job.oid:
                    self._candidates = self._cells_near(world, self._job.goal_pos[:2], 0.68, 0.3)
                    self._phase = "goto_place"
                    if not self._advance_candidate(world):
                        raise OracleStuckError(self._job.oid, "no reachable stance at the target")
                else:
                    self._bump(self._job.oid, "grab missed")
                    self._phase = "aim_grab"
                continue
            if self._phase == "aim_release":
                aim = self._aim_release(world, self._job)
                if aim is None:
                    self._bump(self._job.oid, "no placement stance here")
                    if not self._advance_candidate(world):
                        raise OracleStuckError(self._job.oid, "placement stances exhausted")
                    self._phase = "goto_place"
                    continue
                self._pending.extend(aim)
                self._pending.append(Release())
                self._phase = "release_check"
                continue
            if self._phase == "release_check":
                if world.agent.held is None:
                    self._phase = "idle"
                else:
                    self._bump(self._job.oid, "release rejected")
                    self._phase = "aim_release"
                continue
            if self._phase == "aim_joint":
                aim = self._aim_joint(world, self._job)
                if aim is None:
                    self._bump(self._job.oid, "no joint stance here")
                    if not self._advance_candidate(world):
                        raise OracleStuckError(self._job.oid, "joint stances exhausted")
                    self._phase = "goto_joint"
                    continue
                self._pending.extend(aim)
                self._pending.append(SetJoint(self._job.oid, self._job.fraction))
                self._phase = "joint_check"
                continue
            if self._phase == "joint_check":
                if abs(open_fraction(self._job.oid, world) - self._job.fraction) < 1e-6:
                    self._phase = "idle"
                else:
                    self._bump(self._job.oid, "joint action rejected")
                    self._phase = "aim_joint"
                continue
            raise AssertionError(f"unknown phase {self._phase!r}")

    def _advance_candidate(self, world: WorldState) -> bool:
        # Retries should not march around the ring in target order; the
        # nearest remaining stance keeps the detour short.
        pos = world.agent.position
        self._candidates.sort(
            key=lambda c: math.dist(self._cand_grid.center_of(c), (pos[0], pos[1]))
        )
        while self._candidates:
            cell = self._candidates.pop(0)
            route = self._route_to(world, cell)
            if route is not None:
                self._route = route
                self._target_cell = cell
                self._leg_blocks = 0
                return True
        return False
