"""Newline-delimited JSON wire protocol between the episode runner and an
external agent process.

One JSON object per line.  Five message kinds flow on the wire:

- ``hello``: sent once by the runner; carries the protocol version, an
  episode summary, and the goal (subject to the visibility rules below).
- ``observation``: runner to agent, one per tick, plus a ``phase`` field
  ("explore" during an experience goal's exploration phase, else "score").
- ``action``: agent to runner, exactly one in reply to each observation.
- ``done``: runner to agent when the episode ends; carries the report.
- ``error``: either direction; ``code`` and ``text``; the sender closes.

Receivers ignore unknown fields, so the format can grow without breaking
old agents.  A version mismatch is answered with an error and a closed
connection rather than a guess.

Goal visibility: geometric goals are sent in full.  Predicate goals are
sent as program text; when the episode marks its parameters hidden, the
numeric thresholds in that text are replaced with ``?`` (structure and
object ids stay, pass margins do not).  Experience goals are never sent as
state: the agent is told only the exploration budget and must look around.
"""

from __future__ import annotations

import json

from ..goals import ExperienceGoal, GeometricGoal, PredicateGoal
from ..metrics import EvaluationReport
from ..predicates import Atom, BoxLiteral, Combinator, PredicateProgram, PredExpr
from ..sim import Action, EpisodeConfig, Observation
from .files import (
    action_from_doc,
    action_to_doc,
    goal_to_doc,
    noise_to_doc,
    view_to_doc,
    FileFormatError,
)

__all__ = [
    "PROTOCOL_VERSION",
    "MESSAGE_KINDS",
    "ProtocolError",
    "encode",
    "decode",
    "hello_message",
    "observation_message",
    "action_message",
    "parse_action",
    "done_message",
    "error_message",
    "redacted_program_text",
]

PROTOCOL_VERSION = "1"
MESSAGE_KINDS = ("hello", "observation", "action", "done", "error")


class ProtocolError(Exception):
    def __init__(self, code: str, text: str):
        super().__init__(f"{code}: {text}")
        self.code = code
        self.text = text


def encode(message: dict) -> bytes:
    """One message, one line, stable bytes (sorted keys, no spaces)."""
    return json.dumps(message, sort_keys=True, separators=(",", ":")).encode() + b"\n"


def decode(line: bytes | str) -> dict:
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="replace")
    try:
        message = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolError("bad-json", f"line is not valid JSON: {e}") from None
    if not isinstance(message, dict):
        raise ProtocolError("bad-message", "message must be a JSON object")
    kind = message.get("kind")
    if kind not in MESSAGE_KINDS:
        raise ProtocolError("bad-kind", f"unknown message kind {kind!r}")
    return message


# ---------------------------------------------------------------------------
# Runner-side message builders


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _redact_expr(e: PredExpr) -> str:
    if isinstance(e, Combinator):
        return "(" + " ".join([e.op] + [_redact_expr(o) for o in e.operands]) + ")"
    parts = [e.name]
    for arg in e.args:
        if isinstance(arg, str):
            parts.append(arg)
        elif isinstance(arg, BoxLiteral):
            c = " ".join(_fmt(v) for v in arg.center)
            h = " ".join(_fmt(v) for v in arg.half_extents)
            parts.append(f"(box ({c}) ({h}))")
        elif isinstance(arg, tuple):
            parts.append("(" + " ".join(_fmt(v) for v in arg) + ")")
        else:
            parts.append("?")
    return "(" + " ".join(parts) + ")"


def redacted_program_text(program: PredicateProgram) -> str:
    """Program text with every scalar threshold replaced by ``?``.

    Target points and region boxes stay (they say where), thresholds go
    (they say how exactly the check will be scored).  The result is for
    reading, not for :func:`tidysim.predicates.parse`.
    """
    text = "(score " + " ".join(_redact_expr(e) for e in program.scored) + ")"
    if program.harm is not None:
        text += "\n(harm " + _redact_expr(program.harm) + ")"
    return text


def _goal_view(episode: EpisodeConfig) -> dict:
    goal = episode.goal
    if isinstance(goal, GeometricGoal):
        return goal_to_doc(goal)
    if isinstance(goal, PredicateGoal):
        doc = goal_to_doc(goal)
        if episode.hidden_params:
            doc["program"] = redacted_program_text(goal.program)
            doc["thresholds_hidden"] = True
        return doc
    if isinstance(goal, ExperienceGoal):
        return {"kind": "experience", "exploration_budget": goal.exploration_budget}
    raise ProtocolError("bad-goal", f"cannot describe goal {goal!r}")


def hello_message(episode: EpisodeConfig) -> dict:
    return {
        "kind": "hello",
        "version": PROTOCOL_VERSION,
        "episode": {
            "episode_id": episode.episode_id,
            "max_ticks": episode.max_ticks,
            "task_ids": list(episode.task_ids),
            "carry_capacity": episode.initial.agent.capacity,
            "pick_range": episode.pick_range,
            "view": view_to_doc(episode.view),
            "noise": noise_to_doc(episode.noise),
        },
        "goal": _goal_view(episode),
    }


def observation_message(obs: Observation, phase: str = "score") -> dict:
    return {
        "kind": "observation",
        "phase": phase,
        "tick": obs.tick,
        "position": [float(obs.odometry.position[0]), float(obs.odometry.position[1])],
        "heading": obs.odometry.heading,
        "pitch": obs.pitch,
        "held": obs.held,
        "haptic": obs.haptic,
        "last_action_ok": obs.last_action_ok,
        "visible": [
            {
                "id": v.id,
                "category": v.category,
                "position": [float(x) for x in v.pose.translation],
                "rotation": [float(x) for x in v.pose.rotation],
                "open_fraction": v.open_fraction,
            }
            for v in obs.visible
        ],
    }


def action_message(action: Action) -> dict:
    return {"kind": "action", **action_to_doc(action)}


def parse_action(message: dict) -> Action:
    if message.get("kind") != "action":
        raise ProtocolError("bad-kind", f"expected an action, got {message.get('kind')!r}")
    try:
        return action_from_doc(message)
    except FileFormatError as e:
        raise ProtocolError("bad-action", str(e)) from None


def done_message(report: EvaluationReport) -> dict:
    return {"kind": "done", "report": report.as_dict()}


def error_message(code: str, text: str) -> dict:
    return {"kind": "error", "code": code, "text": text}
