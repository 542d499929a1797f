import math

import numpy as np
import pytest

from tidysim.geom import Box, Pose
from tidysim.goals import GeometricGoal, PredicateGoal
from tidysim.metrics import (
    EvaluationReport,
    TourLegs,
    UnreachableTargetError,
    assemble_report,
    compute_legs,
    exact_tour_length,
    heuristic_tour_length,
    score,
    shortest_path_length,
    spl,
    task_ids_of,
)
from tidysim.nav import OccupancyGrid, geodesic
from tidysim.predicates import parse
from tidysim.scene import ToleranceSpec
from tidysim.sim import EnergyModel, EpisodeConfig, NoiseModel

from .oracles import brute_force_tour, reference_spl
from .worlds import simple_room

pytestmark = []


def make_episode(world, goal, task_ids=(), seed=3, max_ticks=500):
    return EpisodeConfig(
        initial=world,
        goal=goal,
        task_ids=list(task_ids),
        max_ticks=max_ticks,
        seed=seed,
        noise=NoiseModel.off(),
    )


def geometric_goal(targets_xyz: dict) -> GeometricGoal:
    targets = {}
    tol = {}
    for oid, xyz in targets_xyz.items():
        targets[oid] = (Pose(np.asarray(xyz, dtype=float)), None)
        tol[oid] = ToleranceSpec()
    return GeometricGoal(targets=targets, tol=tol)


class TestSpl:
    def test_textbook_value(self):
        assert spl(True, 10.0, 12.5) == 0.8

    def test_failure_is_zero(self):
        assert spl(False, 10.0, 12.5) == 0.0
        assert spl(False, 0.0, 0.0) == 0.0

    def test_optimal_path_is_one(self):
        assert spl(True, 7.3, 7.3) == 1.0

    def test_shorter_than_oracle_clamps_to_one(self):
        # An agent cannot beat the oracle; if l_a < l the denominator is l.
        assert spl(True, 5.0, 4.0) == 1.0

    def test_degenerate_zero_lengths(self):
        assert spl(True, 0.0, 0.0) == 1.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            spl(True, -1.0, 2.0)
        with pytest.raises(ValueError):
            spl(True, 1.0, -2.0)

    def test_monotone_in_actual_travel(self):
        values = [spl(True, 6.0, la) for la in np.linspace(0.0, 30.0, 40)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_matches_reference_on_random_triples(self):
        rng = np.random.default_rng(0x5715)
        for _ in range(1000):
            success = bool(rng.random() < 0.5)
            shortest = float(rng.choice([0.0, rng.uniform(0, 25)]))
            actual = float(rng.choice([0.0, rng.uniform(0, 25)]))
            assert spl(success, shortest, actual) == reference_spl(success, shortest, actual)


def five_cube_setup():
    spots = {"a": (1.0, 1.0), "b": (2.0, 1.0), "c": (3.0, 1.0), "d": (4.0, 1.0), "e": (5.0, 1.0)}
    world = simple_room(cubes={**spots, "f": (1.0, 5.0)}, agent_xy=(0.5, 3.0))
    clauses = " ".join(f"(within_m {o} ({x} {y} 0.1) 0.5)" for o, (x, y) in sorted(spots.items()))
    program = parse(f"(score {clauses}) (harm (unmoved f))")
    episode = make_episode(world, PredicateGoal(program))
    return world, episode


def shove(world, oid, dx, dy):
    st = world.objects[oid]
    st.pose = Pose(st.pose.translation + np.array([dx, dy, 0.0]), st.pose.rotation)


class TestScore:
    def test_three_of_five(self):
        world, episode = five_cube_setup()
        final = world.copy()
        shove(final, "b", 2.0, 0.0)
        shove(final, "d", 0.0, 2.0)
        completion, harm_pass, success = score(episode, final)
        assert completion == 0.6
        assert harm_pass and not success

    def test_all_pass(self):
        world, episode = five_cube_setup()
        assert score(episode, world.copy()) == (1.0, True, True)

    def test_harm_failure_zeroes_completion(self):
        world, episode = five_cube_setup()
        final = world.copy()
        shove(final, "f", 0.2, 0.0)  # protected object pushed past 0.05 m
        completion, harm_pass, success = score(episode, final)
        assert completion == 0.0
        assert not harm_pass and not success

    def test_none_pass(self):
        world, episode = five_cube_setup()
        final = world.copy()
        for oid in "abcde":
            shove(final, oid, 0.0, 3.0)
        assert score(episode, final) == (0.0, True, False)

    def test_gating_fuzz(self):
        world, episode = five_cube_setup()
        rng = np.random.default_rng(77)
        for _ in range(100):
            final = world.copy()
            for oid in "abcde":
                if rng.random() < 0.5:
                    shove(final, oid, float(rng.uniform(-3, 3)), float(rng.uniform(-2, 2)))
            shove(final, "f", float(rng.uniform(0.06, 1.0)), 0.0)
            completion, harm_pass, _ = score(episode, final)
            assert not harm_pass
            assert completion == 0.0


class TestTaskIds:
    def test_explicit_ids_win(self):
        world, episode = five_cube_setup()
        episode.task_ids = ["c", "a"]
        assert task_ids_of(episode) == ["c", "a"]

    def test_predicate_subjects_in_order(self):
        world, episode = five_cube_setup()
        assert task_ids_of(episode) == ["a", "b", "c", "d", "e"]

    def test_unknown_subjects_skipped(self):
        world = simple_room(cubes={"m": (2.0, 1.0)}, table=(4.0, 4.0))
        goal = PredicateGoal(parse("(score (on m table))"))
        episode = make_episode(world, goal)
        assert task_ids_of(episode) == ["m"]

    def test_geometric_targets(self):
        world = simple_room(cubes={"m": (2.0, 1.0), "n": (3.0, 1.0)})
        episode = make_episode(world, geometric_goal({"n": (3.0, 4.0, 0.1), "m": (2.0, 4.0, 0.1)}))
        assert task_ids_of(episode) == ["m", "n"]


class TestTourOracle:
    def test_no_task_objects(self):
        # A program about a fixture only: nothing needs servicing.
        world = simple_room(cubes={"m": (2.0, 1.0)}, table=(4.0, 4.0))
        episode = make_episode(world, PredicateGoal(parse("(score (unmoved table))")))
        assert task_ids_of(episode) == []
        assert shortest_path_length(episode) == 0.0

    def test_single_object_straight_legs(self):
        # Spawn to pick 3 m, pick to place 4 m, nothing in the way: about 7.
        world = simple_room(cubes={"m": (4.0, 1.0)}, agent_xy=(1.0, 1.0), size=12.0)
        episode = make_episode(world, geometric_goal({"m": (4.0, 5.0, 0.1)}))
        assert shortest_path_length(episode) == pytest.approx(7.0, abs=0.25)

    def test_three_objects_match_brute_force(self):
        world = simple_room(
            cubes={"m": (1.0, 1.0), "n": (5.0, 1.0), "p": (3.0, 5.0)},
            agent_xy=(3.0, 3.0),
        )
        episode = make_episode(
            world,
            geometric_goal(
                {"m": (5.0, 5.0, 0.1), "n": (1.0, 5.0, 0.1), "p": (3.0, 1.0, 0.1)}
            ),
        )
        legs = compute_legs(episode)
        want, _ = brute_force_tour(legs.inter, list(legs.ids))
        want += sum(legs.intra.values())
        assert shortest_path_length(episode) == want
        assert exact_tour_length(legs) == want

    def test_heuristic_never_beats_exact(self):
        rng = np.random.default_rng(0xBEEF)
        for _ in range(30):
            n = int(rng.integers(1, 8))
            ids = tuple(f"o{i}" for i in range(n))
            inter = {("start", o): float(rng.uniform(0.5, 10)) for o in ids}
            for a in ids:
                for b in ids:
                    if a != b:
                        inter[(a, b)] = float(rng.uniform(0.5, 10))
            intra = {o: float(rng.uniform(0, 5)) for o in ids}
            legs = TourLegs(ids, inter, intra)
            exact = exact_tour_length(legs)
            heur = heuristic_tour_length(legs)
            assert heur >= exact - 1e-9
            if n <= 2:
                assert heur == pytest.approx(exact, abs=1e-12)

    def test_unreachable_place_names_object(self):
        world = simple_room(cubes={"m": (1.0, 1.0)}, agent_xy=(0.5, 0.5))
        # Seal off a 1.5 m chamber around the place location (4, 4).
        for cx, cy, hx, hy in [
            (4.0, 3.25, 0.85, 0.05),
            (4.0, 4.75, 0.85, 0.05),
            (3.25, 4.0, 0.05, 0.85),
            (4.75, 4.0, 0.05, 0.85),
        ]:
            world.static_layout.append(
                (f"seal-{cx}-{cy}", Box.axis_aligned((cx, cy, 0.5), (hx, hy, 0.5)))
            )
        episode = make_episode(world, geometric_goal({"m": (4.0, 4.0, 0.1)}))
        with pytest.raises(UnreachableTargetError) as err:
            shortest_path_length(episode)
        assert "m" in str(err.value)
        assert err.value.object_id == "m"

    def test_predicate_within_hint_matches_geometric(self):
        world = simple_room(cubes={"m": (4.0, 1.0)}, agent_xy=(1.0, 1.0), size=12.0)
        geo = make_episode(world, geometric_goal({"m": (4.0, 5.0, 0.1)}))
        pred = make_episode(
            world, PredicateGoal(parse("(score (within_m m (4 5 0.1) 0.4))"))
        )
        assert shortest_path_length(pred) == shortest_path_length(geo)

    def test_on_hint_targets_support_center(self):
        world = simple_room(cubes={"m": (1.0, 1.0)}, table=(4.0, 4.0), agent_xy=(0.5, 0.5))
        episode = make_episode(world, PredicateGoal(parse("(score (on m table))")))
        legs = compute_legs(episode)
        grid = OccupancyGrid.build(world, world.agent.radius)
        want = geodesic(grid, np.array([1.0, 1.0]), np.array([4.0, 4.0]))
        assert legs.intra["m"] == want

    def test_unhinted_subject_stays_put(self):
        world = simple_room(cubes={"m": (2.0, 2.0)}, agent_xy=(0.5, 0.5))
        episode = make_episode(world, PredicateGoal(parse("(score (unmoved m))")))
        legs = compute_legs(episode)
        assert legs.intra["m"] == 0.0
        assert shortest_path_length(episode) == legs.inter[("start", "m")]

    def test_deterministic(self):
        world = simple_room(
            cubes={"m": (1.0, 1.0), "n": (5.0, 1.0)}, agent_xy=(3.0, 3.0)
        )
        episode = make_episode(
            world, geometric_goal({"m": (5.0, 5.0, 0.1), "n": (1.0, 5.0, 0.1)})
        )
        assert shortest_path_length(episode) == shortest_path_length(episode)


class TestReport:
    def _episode(self, trivially_true=False):
        world = simple_room(cubes={"a": (2.0, 1.0)}, agent_xy=(0.5, 0.5))
        text = "(score (rel_within_m a a 99))" if trivially_true else "(score (within_m a (5 5 0.1) 0.3))"
        return world, make_episode(world, PredicateGoal(parse(text)))

    def test_idle_failure(self):
        world, episode = self._episode()
        report = assemble_report(
            episode, world.copy(), ticks=0, energy=0.0, agent_path_length=0.0
        )
        assert report.agent_path_length == 0.0
        assert report.spl == 0.0
        assert not report.success and report.completion == 0.0
        assert report.harm_pass  # no harm clause declared
        assert report.ticks == 0

    def test_success_without_travel(self):
        world, episode = self._episode(trivially_true=True)
        report = assemble_report(
            episode, world.copy(), ticks=4, energy=4.0, agent_path_length=0.0
        )
        assert report.success and report.completion == 1.0
        assert report.spl == 1.0  # l_a below the oracle length clamps to 1
        assert report.shortest_path_length > 0.0

    def test_per_predicate_sources_parse_back(self):
        world, episode = five_cube_setup()
        final = world.copy()
        shove(final, "b", 2.0, 0.0)
        report = assemble_report(episode, final, ticks=9, energy=1.0, agent_path_length=3.0)
        assert len(report.per_predicate) == 5
        verdicts = dict(report.per_predicate)
        for text, verdict in report.per_predicate:
            parse(f"(score {text})")  # each entry is valid source
        assert sum(1 for _, v in report.per_predicate if v) == 4

    def test_energy_constants_travel_with_report(self):
        world, episode = self._episode()
        report = assemble_report(episode, world.copy(), ticks=0, energy=0.0, agent_path_length=0.0)
        assert report.energy_constants == EnergyModel().as_dict()

    def test_round_trip_dict(self):
        world, episode = self._episode(trivially_true=True)
        report = assemble_report(
            episode,
            world.copy(),
            ticks=4,
            energy=4.0,
            agent_path_length=1.0,
            decision_latency_mean_s=0.002,
        )
        again = EvaluationReport.from_dict(report.as_dict())
        assert again == report

    def test_latency_excluded_from_equality(self):
        world, episode = self._episode(trivially_true=True)
        kw = dict(ticks=4, energy=4.0, agent_path_length=1.0)
        r1 = assemble_report(episode, world.copy(), decision_latency_mean_s=0.1, **kw)
        r2 = assemble_report(episode, world.copy(), decision_latency_mean_s=0.9, **kw)
        assert r1 == r2

    def test_inconsistent_reports_rejected(self):
        base = dict(
            episode_id="x",
            ticks=1,
            energy=0.0,
            agent_path_length=0.0,
            shortest_path_length=0.0,
            per_predicate=(("(unmoved a)", True),),
        )
        with pytest.raises(ValueError):
            EvaluationReport(completion=0.5, harm_pass=False, success=False, spl=0.0, **base)
        with pytest.raises(ValueError):
            EvaluationReport(completion=0.5, harm_pass=True, success=True, spl=1.0, **base)
        with pytest.raises(ValueError):
            EvaluationReport(completion=0.5, harm_pass=True, success=False, spl=0.3, **base)
