"""On-disk document formats: episodes, reports, action logs, final states,
and dataset directories.

Every document is JSON with sorted keys and compact separators, so the same
value always serializes to the same bytes.  Each file carries a `format` tag
and a `version` so a reader can reject what it does not understand instead
of misreading it.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from ..generator import DifficultyParams, generate
from ..geom import Box, Pose
from ..goals import (
    ExperienceGoal,
    GeometricGoal,
    GoalSpec,
    PredicateGoal,
)
from ..metrics import EvaluationReport
from ..predicates import parse, print_program
from ..scene import (
    AgentState,
    JointSpec,
    ObjectSpec,
    ObjectState,
    ToleranceSpec,
    WorldState,
)
from ..sim import (
    ACTION_NAMES,
    Action,
    EnergyModel,
    EpisodeConfig,
    NoiseModel,
    SetJoint,
    Unstow,
    ViewParams,
)

__all__ = [
    "FORMAT_VERSION",
    "FileFormatError",
    "dumps_doc",
    "dump_doc",
    "load_doc",
    "action_to_doc",
    "action_from_doc",
    "episode_to_doc",
    "episode_from_doc",
    "save_episode",
    "load_episode",
    "save_report",
    "load_report",
    "save_action_log",
    "load_action_log",
    "save_final_state",
    "load_final_state",
    "write_dataset",
    "load_manifest",
]

FORMAT_VERSION = 1

EPISODE_FORMAT = "tidysim-episode"
REPORT_FORMAT = "tidysim-report"
ACTIONS_FORMAT = "tidysim-actions"
STATE_FORMAT = "tidysim-state"
MANIFEST_FORMAT = "tidysim-dataset"


class FileFormatError(Exception):
    pass


def dumps_doc(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def dump_doc(doc: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_doc(doc) + "\n")
    return path


def load_doc(path, expected_format: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise FileFormatError(f"{path}: expected a JSON object")
    if doc.get("format") != expected_format:
        raise FileFormatError(
            f"{path}: format is {doc.get('format')!r}, expected {expected_format!r}"
        )
    if doc.get("version") != FORMAT_VERSION:
        raise FileFormatError(f"{path}: unsupported version {doc.get('version')!r}")
    return doc


# ---------------------------------------------------------------------------
# Leaf value codecs


def _floats(xs) -> list[float]:
    return [float(v) for v in xs]


def pose_to_doc(pose: Pose) -> dict:
    return {"t": _floats(pose.translation), "q": _floats(pose.rotation)}


def pose_from_doc(d: dict) -> Pose:
    return Pose(np.array(d["t"], dtype=np.float64), np.array(d["q"], dtype=np.float64))


def box_to_doc(box: Box) -> dict:
    return {"pose": pose_to_doc(box.center_pose), "half_extents": _floats(box.half_extents)}


def box_from_doc(d: dict) -> Box:
    return Box(pose_from_doc(d["pose"]), np.array(d["half_extents"], dtype=np.float64))


def tol_to_doc(tol: ToleranceSpec) -> dict:
    return {
        "translation": tol.translation,
        "rotation": tol.rotation,
        "min_iou": tol.min_iou,
        "open": tol.open,
    }


def tol_from_doc(d: dict) -> ToleranceSpec:
    return ToleranceSpec(d["translation"], d["rotation"], d["min_iou"], d["open"])


def spec_to_doc(spec: ObjectSpec) -> dict:
    doc = {
        "id": spec.id,
        "category": spec.category,
        "half_extents": _floats(spec.half_extents),
        "mass": spec.mass,
        "movable": spec.movable,
        "articulation": None,
    }
    if spec.articulation is not None:
        doc["articulation"] = {
            "kind": spec.articulation.kind,
            "limits": list(spec.articulation.limits),
        }
    return doc


def spec_from_doc(d: dict) -> ObjectSpec:
    art = d.get("articulation")
    joint = JointSpec(art["kind"], tuple(art["limits"])) if art else None
    return ObjectSpec(
        d["id"], d["category"], np.array(d["half_extents"]), d["mass"], d["movable"], joint
    )


def object_state_to_doc(st: ObjectState) -> dict:
    return {"pose": pose_to_doc(st.pose), "joint_position": st.joint_position}


def object_state_from_doc(d: dict) -> ObjectState:
    return ObjectState(pose_from_doc(d["pose"]), d.get("joint_position"))


def agent_to_doc(agent: AgentState) -> dict:
    return {
        "position": _floats(agent.position),
        "heading": agent.heading,
        "pitch": agent.pitch,
        "height": agent.height,
        "radius": agent.radius,
        "held": agent.held,
        "backpack": list(agent.backpack),
        "capacity": agent.capacity,
    }


def agent_from_doc(d: dict) -> AgentState:
    return AgentState(
        np.array(d["position"], dtype=np.float64),
        d["heading"],
        d["pitch"],
        d["height"],
        d["radius"],
        d.get("held"),
        list(d.get("backpack", [])),
        d.get("capacity", 0),
    )


# ---------------------------------------------------------------------------
# World states.  The immutable scene (specs + statics) and the variable part
# (object states, agent, carried) serialize separately so that a final-state
# file does not have to repeat the whole scene.


def scene_to_doc(state: WorldState) -> dict:
    return {
        "statics": [{"id": sid, **box_to_doc(box)} for sid, box in state.static_layout],
        "objects": [spec_to_doc(state.specs[oid]) for oid in sorted(state.specs)],
    }


def variables_to_doc(state: WorldState) -> dict:
    return {
        "states": {oid: object_state_to_doc(st) for oid, st in sorted(state.objects.items())},
        "agent": agent_to_doc(state.agent),
        "carried": {oid: object_state_to_doc(st) for oid, st in sorted(state.carried.items())},
    }


def world_from_docs(scene: dict, variables: dict) -> WorldState:
    specs = {d["id"]: spec_from_doc(d) for d in scene["objects"]}
    statics = [(d["id"], box_from_doc(d)) for d in scene["statics"]]
    return WorldState(
        specs,
        {oid: object_state_from_doc(d) for oid, d in variables["states"].items()},
        agent_from_doc(variables["agent"]),
        statics,
        {oid: object_state_from_doc(d) for oid, d in variables.get("carried", {}).items()},
    )


# ---------------------------------------------------------------------------
# Goals


def goal_to_doc(goal: GoalSpec) -> dict:
    if isinstance(goal, GeometricGoal):
        return {
            "kind": "geometric",
            "targets": {
                oid: {
                    "pose": pose_to_doc(pose),
                    "open": open_frac,
                    "tolerance": tol_to_doc(goal.tol[oid]),
                }
                for oid, (pose, open_frac) in sorted(goal.targets.items())
            },
        }
    if isinstance(goal, PredicateGoal):
        return {"kind": "predicate", "program": print_program(goal.program)}
    if isinstance(goal, ExperienceGoal):
        return {
            "kind": "experience",
            "goal_variables": variables_to_doc(goal.goal_state),
            "exploration_budget": goal.exploration_budget,
            "tolerance": tol_to_doc(goal.tol),
        }
    raise FileFormatError(f"cannot serialize goal {goal!r}")


def goal_from_doc(d: dict, scene: dict) -> GoalSpec:
    kind = d.get("kind")
    if kind == "geometric":
        targets = {}
        tol = {}
        for oid, t in d["targets"].items():
            targets[oid] = (pose_from_doc(t["pose"]), t.get("open"))
            tol[oid] = tol_from_doc(t["tolerance"])
        return GeometricGoal(targets, tol)
    if kind == "predicate":
        return PredicateGoal(parse(d["program"]))
    if kind == "experience":
        return ExperienceGoal(
            world_from_docs(scene, d["goal_variables"]),
            d["exploration_budget"],
            tol_from_doc(d["tolerance"]),
        )
    raise FileFormatError(f"unknown goal kind {kind!r} in episode file")


# ---------------------------------------------------------------------------
# Actions


def action_to_doc(action: Action) -> dict:
    doc = {"name": action.name}
    if isinstance(action, Unstow):
        doc["id"] = action.id
    elif isinstance(action, SetJoint):
        doc["id"] = action.id
        doc["fraction"] = action.fraction
    return doc


def action_from_doc(d: dict) -> Action:
    name = d.get("name")
    cls = ACTION_NAMES.get(name)
    if cls is None:
        raise FileFormatError(f"unknown action name {name!r}")
    try:
        if cls is Unstow:
            return Unstow(d["id"])
        if cls is SetJoint:
            return SetJoint(d["id"], d["fraction"])
        return cls()
    except (KeyError, TypeError, ValueError) as e:
        raise FileFormatError(f"malformed action {d!r}: {e}") from None


# ---------------------------------------------------------------------------
# Episode files


def noise_to_doc(noise: NoiseModel) -> dict:
    return {
        "pose_sigma": noise.pose_sigma,
        "odom_drift_per_m": noise.odom_drift_per_m,
        "odom_heading_drift": noise.odom_heading_drift,
    }


def noise_from_doc(d: dict) -> NoiseModel:
    return NoiseModel(d["pose_sigma"], d["odom_drift_per_m"], d["odom_heading_drift"])


def view_to_doc(view: ViewParams) -> dict:
    return {
        "fov": view.fov,
        "crosshair_pitch": view.crosshair_pitch,
        "eye_height": view.eye_height,
        "sense_range": view.sense_range,
    }


def view_from_doc(d: dict) -> ViewParams:
    return ViewParams(d["fov"], d["crosshair_pitch"], d["eye_height"], d["sense_range"])


def episode_to_doc(episode: EpisodeConfig) -> dict:
    return {
        "format": EPISODE_FORMAT,
        "version": FORMAT_VERSION,
        "episode_id": episode.episode_id,
        "seed": episode.seed,
        "scene": scene_to_doc(episode.initial),
        "initial": variables_to_doc(episode.initial),
        "goal": goal_to_doc(episode.goal),
        "task_ids": list(episode.task_ids),
        "budgets": {"max_ticks": episode.max_ticks},
        "tolerances": {
            "default": tol_to_doc(episode.tolerance),
            "harm": tol_to_doc(episode.harm_tolerance),
        },
        "noise": noise_to_doc(episode.noise),
        "embodiment": {
            "pick_range": episode.pick_range,
            "view": view_to_doc(episode.view),
            "energy": episode.energy.as_dict(),
            "contact_eps": episode.contact_eps,
        },
        "hidden_params": episode.hidden_params,
    }


def episode_from_doc(doc: dict) -> EpisodeConfig:
    initial = world_from_docs(doc["scene"], doc["initial"])
    emb = doc["embodiment"]
    return EpisodeConfig(
        initial=initial,
        goal=goal_from_doc(doc["goal"], doc["scene"]),
        task_ids=list(doc["task_ids"]),
        max_ticks=doc["budgets"]["max_ticks"],
        seed=doc["seed"],
        episode_id=doc["episode_id"],
        noise=noise_from_doc(doc["noise"]),
        pick_range=emb["pick_range"],
        view=view_from_doc(emb["view"]),
        energy=EnergyModel(**emb["energy"]),
        tolerance=tol_from_doc(doc["tolerances"]["default"]),
        harm_tolerance=tol_from_doc(doc["tolerances"]["harm"]),
        contact_eps=emb["contact_eps"],
        hidden_params=doc.get("hidden_params", False),
    )


def save_episode(episode: EpisodeConfig, path) -> Path:
    return dump_doc(episode_to_doc(episode), path)


def load_episode(path) -> EpisodeConfig:
    return episode_from_doc(load_doc(path, EPISODE_FORMAT))


# ---------------------------------------------------------------------------
# Reports, action logs, final states


def save_report(report: EvaluationReport, path) -> Path:
    doc = {"format": REPORT_FORMAT, "version": FORMAT_VERSION, **report.as_dict()}
    return dump_doc(doc, path)


def load_report(path) -> EvaluationReport:
    return EvaluationReport.from_dict(load_doc(path, REPORT_FORMAT))


def save_action_log(actions, episode: EpisodeConfig, path) -> Path:
    doc = {
        "format": ACTIONS_FORMAT,
        "version": FORMAT_VERSION,
        "episode_id": episode.episode_id,
        "seed": episode.seed,
        "actions": [action_to_doc(a) for a in actions],
    }
    return dump_doc(doc, path)


def load_action_log(path) -> tuple[str, list[Action]]:
    doc = load_doc(path, ACTIONS_FORMAT)
    return doc["episode_id"], [action_from_doc(d) for d in doc["actions"]]


def save_final_state(
    state: WorldState,
    episode: EpisodeConfig,
    path,
    *,
    ticks: int = 0,
    energy: float = 0.0,
    agent_path_length: float = 0.0,
) -> Path:
    doc = {
        "format": STATE_FORMAT,
        "version": FORMAT_VERSION,
        "episode_id": episode.episode_id,
        "variables": variables_to_doc(state),
        "ticks": ticks,
        "energy": energy,
        "agent_path_length": agent_path_length,
    }
    return dump_doc(doc, path)


def load_final_state(path, episode: EpisodeConfig) -> tuple[WorldState, dict]:
    """The recorded state, rebuilt against the episode's scene, plus the run
    accounting stored with it (zeros when the file was written by hand)."""
    doc = load_doc(path, STATE_FORMAT)
    scene = scene_to_doc(episode.initial)
    state = world_from_docs(scene, doc["variables"])
    meta = {
        "ticks": doc.get("ticks", 0),
        "energy": doc.get("energy", 0.0),
        "agent_path_length": doc.get("agent_path_length", 0.0),
    }
    return state, meta


# ---------------------------------------------------------------------------
# Dataset directories


def params_to_doc(params: DifficultyParams) -> dict:
    return dataclasses.asdict(params)


def params_from_doc(d: dict) -> DifficultyParams:
    return DifficultyParams(**d)


def write_dataset(root, seeds, params: DifficultyParams) -> Path:
    """One episode file per seed plus a manifest listing them all.

    Returns the manifest path.  Generation failures propagate; a partial
    directory holds only episodes written before the failure and no manifest.
    """
    root = Path(root)
    entries = []
    for seed in seeds:
        episode = generate(seed, params)
        rel = f"episodes/{episode.episode_id}.json"
        save_episode(episode, root / rel)
        entries.append({"seed": seed, "episode_id": episode.episode_id, "file": rel})
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": FORMAT_VERSION,
        "params": params_to_doc(params),
        "episodes": entries,
    }
    return dump_doc(manifest, root / "manifest.json")


def load_manifest(root) -> tuple[DifficultyParams, list[dict]]:
    doc = load_doc(Path(root) / "manifest.json", MANIFEST_FORMAT)
    return params_from_doc(doc["params"]), list(doc["episodes"])
