"""The console entry point, driven through main() with captured output."""

import dataclasses
import json

import numpy as np
import pytest

from tidysim.generator import DifficultyParams, generate
from tidysim.goals import GeometricGoal, ToleranceSpec
from tidysim.scene import Pose
from tidysim.harness import files
from tidysim.harness.cli import main


@pytest.fixture()
def dataset(tmp_path):
    """A three-episode dataset directory, built through the CLI itself."""
    out = tmp_path / "ds"
    code = main(["gen", "--out", str(out), "--seeds", "0:3"])
    assert code == 0
    return out


def episode_path(dataset, index=0):
    manifest = json.loads((dataset / "manifest.json").read_text())
    return dataset / manifest["episodes"][index]["file"]


class TestGen:
    def test_writes_a_loadable_manifest(self, dataset, capsys):
        manifest = json.loads((dataset / "manifest.json").read_text())
        assert len(manifest["episodes"]) == 3
        for entry in manifest["episodes"]:
            episode = files.load_episode(dataset / entry["file"])
            assert episode.seed == entry["seed"]

    def test_prints_the_manifest_path(self, tmp_path, capsys):
        out = tmp_path / "ds2"
        assert main(["gen", "--out", str(out), "--seeds", "5"]) == 0
        assert "manifest.json" in capsys.readouterr().out

    def test_needs_an_output_directory(self, monkeypatch, capsys):
        monkeypatch.delenv("TIDYSIM_DATASET_ROOT", raising=False)
        assert main(["gen", "--seeds", "0:2"]) == 2
        assert "--out" in capsys.readouterr().err

    def test_env_var_supplies_the_directory(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TIDYSIM_DATASET_ROOT", str(tmp_path / "from-env"))
        assert main(["gen", "--seeds", "1"]) == 0
        assert (tmp_path / "from-env" / "manifest.json").exists()

    def test_rejects_malformed_seed_ranges(self, tmp_path, capsys):
        assert main(["gen", "--out", str(tmp_path), "--seeds", "a:b"]) == 2
        assert "--seeds" in capsys.readouterr().err


class TestRun:
    def test_oracle_succeeds_and_writes_artifacts(self, dataset, tmp_path, capsys):
        ep = episode_path(dataset)
        report_p = tmp_path / "report.json"
        log_p = tmp_path / "log.json"
        state_p = tmp_path / "final.json"
        code = main([
            "run", "--episode", str(ep), "--agent", "oracle",
            "--report", str(report_p), "--log", str(log_p),
            "--final-state", str(state_p),
        ])
        assert code == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["success"] is True
        saved = files.load_report(report_p)
        assert saved.success and saved.episode_id == printed["episode_id"]
        episode = files.load_episode(ep)
        _, actions = files.load_action_log(log_p)
        assert len(actions) == saved.ticks
        state, meta = files.load_final_state(state_p, episode)
        assert meta["ticks"] == saved.ticks

    def test_random_agent_usually_fails(self, dataset, capsys):
        code = main([
            "run", "--episode", str(episode_path(dataset)),
            "--agent", "random", "--agent-seed", "3",
        ])
        assert code == 1
        assert json.loads(capsys.readouterr().out)["success"] is False

    def test_unknown_agent_is_a_usage_error(self, dataset, capsys):
        code = main(["run", "--episode", str(episode_path(dataset)), "--agent", "psychic"])
        assert code == 2
        assert "unknown agent" in capsys.readouterr().err

    def test_missing_episode_is_a_usage_error(self, capsys):
        assert main(["run", "--episode", "nope.json", "--agent", "oracle"]) == 2
        assert "no such file" in capsys.readouterr().err

    def test_relative_paths_fall_back_to_dataset_root(self, dataset, monkeypatch, capsys):
        monkeypatch.setenv("TIDYSIM_DATASET_ROOT", str(dataset))
        rel = episode_path(dataset).relative_to(dataset)
        assert main(["run", "--episode", str(rel), "--agent", "oracle"]) == 0
        assert json.loads(capsys.readouterr().out)["success"] is True


class TestEvalAndReplay:
    def run_oracle(self, dataset, tmp_path, capsys):
        ep = episode_path(dataset)
        log_p = tmp_path / "log.json"
        state_p = tmp_path / "final.json"
        main([
            "run", "--episode", str(ep), "--agent", "oracle",
            "--log", str(log_p), "--final-state", str(state_p),
        ])
        return ep, log_p, state_p, json.loads(capsys.readouterr().out)

    def test_eval_recovers_the_run_report(self, dataset, tmp_path, capsys):
        ep, _, state_p, printed = self.run_oracle(dataset, tmp_path, capsys)
        code = main(["eval", "--episode", str(ep), "--final-state", str(state_p)])
        assert code == 0
        scored = json.loads(capsys.readouterr().out)
        for key in ("completion", "success", "energy", "spl", "ticks"):
            assert scored[key] == printed[key]

    def test_replay_recovers_the_run_report(self, dataset, tmp_path, capsys):
        ep, log_p, _, printed = self.run_oracle(dataset, tmp_path, capsys)
        code = main(["replay", "--episode", str(ep), "--log", str(log_p)])
        assert code == 0
        replayed = json.loads(capsys.readouterr().out)
        assert replayed == {**printed, "decision_latency_mean_s": replayed["decision_latency_mean_s"]}

    def test_replay_refuses_a_foreign_log(self, dataset, tmp_path, capsys):
        ep, log_p, _, _ = self.run_oracle(dataset, tmp_path, capsys)
        other = episode_path(dataset, index=1)
        code = main(["replay", "--episode", str(other), "--log", str(log_p)])
        assert code == 2
        assert "action log is for episode" in capsys.readouterr().err


class TestValidate:
    def test_generated_episodes_pass(self, dataset, capsys):
        paths = [str(episode_path(dataset, i)) for i in range(3)]
        assert main(["validate", *paths]) == 0
        out = capsys.readouterr().out
        assert out.count(": ok") == 3

    def test_impossible_goal_is_flagged(self, dataset, tmp_path, capsys):
        episode = files.load_episode(episode_path(dataset))
        oid = episode.task_ids[0]
        out_of_bounds = Pose(translation=np.array([40.0, 40.0, 0.1]))
        broken = dataclasses.replace(
            episode,
            goal=GeometricGoal({oid: (out_of_bounds, None)}, {oid: ToleranceSpec()}),
        )
        bad_path = tmp_path / "broken.json"
        files.save_episode(broken, bad_path)
        assert main(["validate", str(bad_path)]) == 1
        assert "UNSOLVABLE" in capsys.readouterr().out


def test_unknown_subcommand_exits_with_usage_code(capsys):
    assert main(["frobnicate"]) == 2
