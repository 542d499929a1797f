import math

import numpy as np
import pytest

from tidysim.generator import (
    DOOR_WIDTH,
    NOISE_PRESETS,
    TEST_CATEGORIES,
    TEST_SEEDS,
    TRAIN_CATEGORIES,
    DifficultyParams,
    ROOM_W,
    categories_for,
    generate,
    split_of,
    validate_solvable,
)
from tidysim.geom import Box, Pose
from tidysim.goals import GeometricGoal, as_program, derive_task_set, goal_state_of
from tidysim.metrics import score
from tidysim.predicates import print_program, referenced_ids
from tidysim.scene import ToleranceSpec, snapshot_hash

from .worlds import simple_room


class TestParams:
    def test_task_object_bounds(self):
        with pytest.raises(ValueError):
            DifficultyParams(n_task_objects=0)
        with pytest.raises(ValueError):
            DifficultyParams(n_task_objects=6)

    def test_clutter_range(self):
        with pytest.raises(ValueError):
            DifficultyParams(clutter_density=1.0)
        DifficultyParams(clutter_density=0.0)

    def test_noise_preset_names(self):
        with pytest.raises(ValueError):
            DifficultyParams(noise="medium")
        assert set(NOISE_PRESETS) == {"off", "low", "high"}

    def test_ordering_needs_two(self):
        with pytest.raises(ValueError):
            DifficultyParams(n_task_objects=1, require_ordering=True)


class TestDeterminism:
    def test_same_seed_same_episode(self):
        p = DifficultyParams(n_task_objects=2, n_distractors=2, clutter_density=0.3)
        a = generate(41, p)
        b = generate(41, p)
        assert snapshot_hash(a.initial) == snapshot_hash(b.initial)
        assert a.episode_id == b.episode_id
        assert a.task_ids == b.task_ids
        assert a.max_ticks == b.max_ticks
        assert print_program(as_program(a.goal, a.initial)) == print_program(
            as_program(b.goal, b.initial)
        )

    def test_different_seeds_differ(self):
        p = DifficultyParams(n_task_objects=2)
        assert snapshot_hash(generate(1, p).initial) != snapshot_hash(generate(2, p).initial)

    def test_params_change_episode(self):
        a = generate(7, DifficultyParams(n_task_objects=1))
        b = generate(7, DifficultyParams(n_task_objects=1, n_distractors=1))
        assert snapshot_hash(a.initial) != snapshot_hash(b.initial)


class TestStructure:
    def test_goal_references_exactly_n(self):
        episode = generate(11, DifficultyParams(n_task_objects=3))
        assert isinstance(episode.goal, GeometricGoal)
        assert sorted(episode.goal.targets) == ["obj-0", "obj-1", "obj-2"]
        assert episode.task_ids == ["obj-0", "obj-1", "obj-2"]

    def test_distractors_protected_not_tasked(self):
        episode = generate(13, DifficultyParams(n_task_objects=1, n_distractors=3))
        program = as_program(episode.goal, episode.initial)
        assert program.harm is not None
        harmed = referenced_ids(program) - {"obj-0"}
        assert {"dis-0", "dis-1", "dis-2"} <= harmed

    def test_distractors_unmoved_in_goal(self):
        episode = generate(17, DifficultyParams(n_task_objects=2, n_distractors=2))
        gs = goal_state_of(episode.goal, episode.initial)
        for oid in ("dis-0", "dis-1"):
            np.testing.assert_array_equal(
                gs.get_state(oid).pose.translation,
                episode.initial.get_state(oid).pose.translation,
            )

    def test_derived_task_set_matches(self):
        episode = generate(19, DifficultyParams(n_task_objects=3, n_distractors=2))
        gs = goal_state_of(episode.goal, episode.initial)
        assert derive_task_set(episode.initial, gs, ToleranceSpec()) == episode.task_ids

    def test_initial_completion_zero(self):
        for seed in (23, 29, 31):
            episode = generate(seed, DifficultyParams(n_task_objects=2, n_distractors=1))
            completion, harm_pass, success = score(episode, episode.initial)
            assert completion == 0.0 and harm_pass and not success

    def test_articulated_fixture_present_and_closed(self):
        episode = generate(37, DifficultyParams(n_task_objects=1, n_articulated=2))
        for cid in ("cab-0", "cab-1"):
            spec = episode.initial.get_spec(cid)
            assert spec.articulation is not None and not spec.movable
            assert episode.initial.get_state(cid).joint_position == 0.0

    def test_clutter_adds_statics(self):
        bare = generate(43, DifficultyParams(n_task_objects=1))
        full = generate(43, DifficultyParams(n_task_objects=1, clutter_density=0.8))
        crates = [sid for sid, _ in full.initial.static_layout if sid.startswith("crate-")]
        assert len(crates) >= 3
        assert not any(sid.startswith("crate-") for sid, _ in bare.initial.static_layout)

    def test_carry_capacity_and_noise_propagate(self):
        episode = generate(47, DifficultyParams(n_task_objects=1, carry_capacity=2, noise="high"))
        assert episode.initial.agent.capacity == 2
        assert episode.noise == NOISE_PRESETS["high"]

    def test_require_ordering_chains_spots(self):
        episode = generate(53, DifficultyParams(n_task_objects=2, require_ordering=True))
        gs = goal_state_of(episode.goal, episode.initial)
        first_pick = episode.initial.get_state("obj-0").pose.translation
        second_place = gs.get_state("obj-1").pose.translation
        np.testing.assert_allclose(second_place[:2], first_pick[:2], atol=1e-12)

    def test_multi_room_crossing(self):
        episode = generate(59, DifficultyParams(n_task_objects=2, rooms=2))
        gs = goal_state_of(episode.goal, episode.initial)
        crossed = False
        for oid in episode.task_ids:
            pick_room = int(episode.initial.get_state(oid).pose.translation[0] // ROOM_W)
            place_room = int(gs.get_state(oid).pose.translation[0] // ROOM_W)
            crossed = crossed or pick_room != place_room
        assert crossed

    def test_door_gap_wide_enough(self):
        episode = generate(61, DifficultyParams(n_task_objects=1, rooms=3))
        agent_diameter = 2 * episode.initial.agent.radius
        assert DOOR_WIDTH >= 3 * agent_diameter
        # The interior wall segments leave a DOOR_WIDTH opening.
        for i in (1, 2):
            segs = sorted(
                (float(box.aabb()[0][1]), float(box.aabb()[1][1]))
                for sid, box in episode.initial.static_layout
                if sid.startswith(f"wall-x{i}-")
            )
            assert len(segs) == 2, "interior wall should be two segments around a doorway"
            gap = segs[1][0] - segs[0][1]
            assert gap == pytest.approx(DOOR_WIDTH, abs=1e-9)


class TestSolvability:
    def test_emitted_episodes_validate(self):
        cases = [
            (71, DifficultyParams(n_task_objects=1)),
            (73, DifficultyParams(n_task_objects=3, n_distractors=2, clutter_density=0.4)),
            (79, DifficultyParams(n_task_objects=2, rooms=2, n_articulated=1)),
            (83, DifficultyParams(n_task_objects=5, n_distractors=3)),
            (89, DifficultyParams(n_task_objects=2, require_ordering=True, noise="low")),
        ]
        for seed, params in cases:
            episode = generate(seed, params)
            report = validate_solvable(episode)
            assert report.ok, report.problems

    def test_goal_in_wall_diagnosed(self):
        episode = generate(97, DifficultyParams(n_task_objects=1))
        wall_center = None
        for sid, box in episode.initial.static_layout:
            if sid == "wall-n":
                wall_center = box.center_pose.translation
        bad_goal = GeometricGoal(
            targets={"obj-0": (Pose(np.array([wall_center[0], wall_center[1], 0.1])), None)},
            tol={"obj-0": ToleranceSpec()},
        )
        episode.goal = bad_goal
        report = validate_solvable(episode)
        assert not report.ok
        assert any("obj-0" in p for p in report.problems)

    def test_sealed_object_diagnosed(self):
        world = simple_room(cubes={"m": (3.0, 3.0)}, agent_xy=(0.7, 0.7))
        for cx, cy, hx, hy in [
            (3.0, 2.2, 0.9, 0.05),
            (3.0, 3.8, 0.9, 0.05),
            (2.2, 3.0, 0.05, 0.9),
            (3.8, 3.0, 0.05, 0.9),
        ]:
            world.static_layout.append(
                (f"seal-{cx}-{cy}", Box.axis_aligned((cx, cy, 0.9), (hx, hy, 0.9)))
            )
        from tidysim.sim import EpisodeConfig, NoiseModel

        episode = EpisodeConfig(
            initial=world,
            goal=GeometricGoal(
                targets={"m": (Pose(np.array([1.0, 1.0, 0.1])), None)},
                tol={"m": ToleranceSpec()},
            ),
            task_ids=["m"],
            max_ticks=100,
            seed=0,
            noise=NoiseModel.off(),
        )
        report = validate_solvable(episode)
        assert not report.ok
        assert any("m" in p and "unreachable" in p for p in report.problems)


class TestSplits:
    def test_seed_ranges(self):
        assert split_of(0) == "train"
        assert split_of(99_999) == "train"
        assert split_of(100_000) == "val"
        assert split_of(109_999) == "val"
        assert split_of(110_000) == "test"
        assert split_of(119_999) == "test"
        assert split_of(500_000) == "train"

    def test_category_pools_disjoint(self):
        assert not set(TRAIN_CATEGORIES) & set(TEST_CATEGORIES)
        assert categories_for("test") == TEST_CATEGORIES
        assert categories_for("train") == TRAIN_CATEGORIES
        assert categories_for("val") == TRAIN_CATEGORIES

    def test_test_split_uses_held_out_categories(self):
        episode = generate(TEST_SEEDS.start + 5, DifficultyParams(n_task_objects=2, n_distractors=1))
        for oid in ("obj-0", "obj-1", "dis-0"):
            assert episode.initial.get_spec(oid).category in TEST_CATEGORIES

    def test_train_split_uses_train_categories(self):
        episode = generate(5, DifficultyParams(n_task_objects=2))
        for oid in ("obj-0", "obj-1"):
            assert episode.initial.get_spec(oid).category in TRAIN_CATEGORIES
