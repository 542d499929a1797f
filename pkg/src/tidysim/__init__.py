"""Deterministic desk-scale rearrangement: simulator, generator, evaluation.

The commonly used names are re-exported here; the submodules stay importable
directly when you need the full surface (``tidysim.predicates``,
``tidysim.harness.files``, ...).
"""

from .scene import (
    AgentState,
    Box,
    JointSpec,
    ObjectSpec,
    ObjectState,
    Pose,
    SceneError,
    ToleranceSpec,
    WorldState,
    snapshot_hash,
    state_diff,
)
from .goals import (
    ExperienceGoal,
    GeometricGoal,
    GoalError,
    GoalSpec,
    PredicateGoal,
    derive_task_set,
    goal_state_of,
)
from .predicates import ParseError, PredicateProgram, parse, print_program
from .sim import (
    Environment,
    EnergyModel,
    EpisodeConfig,
    Grab,
    LookDown,
    LookUp,
    MoveForward,
    NoiseModel,
    Observation,
    Release,
    SetJoint,
    Stop,
    Stow,
    TurnLeft,
    TurnRight,
    Unstow,
    ViewParams,
)
from .metrics import (
    EvaluationReport,
    assemble_report,
    score,
    shortest_path_length,
    spl,
)
from .generator import DifficultyParams, GenerationError, generate, validate_solvable
from .harness.runner import RunResult, replay_episode, run_episode, run_many
from .harness.agents import OracleAgent, RandomAgent

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "Box",
    "DifficultyParams",
    "EnergyModel",
    "Environment",
    "EpisodeConfig",
    "EvaluationReport",
    "ExperienceGoal",
    "GenerationError",
    "GeometricGoal",
    "GoalError",
    "GoalSpec",
    "Grab",
    "JointSpec",
    "LookDown",
    "LookUp",
    "MoveForward",
    "NoiseModel",
    "ObjectSpec",
    "ObjectState",
    "Observation",
    "OracleAgent",
    "ParseError",
    "Pose",
    "PredicateGoal",
    "PredicateProgram",
    "RandomAgent",
    "Release",
    "RunResult",
    "SceneError",
    "SetJoint",
    "Stop",
    "Stow",
    "ToleranceSpec",
    "TurnLeft",
    "TurnRight",
    "Unstow",
    "ViewParams",
    "WorldState",
    "assemble_report",
    "derive_task_set",
    "generate",
    "goal_state_of",
    "parse",
    "print_program",
    "replay_episode",
    "run_episode",
    "run_many",
    "score",
    "shortest_path_length",
    "snapshot_hash",
    "spl",
    "state_diff",
    "validate_solvable",
    "__version__",
]
