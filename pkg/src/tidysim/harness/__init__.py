"""Episode runner, wire protocol, file formats, baseline agents, CLI."""

from .agents import OracleAgent, OracleStuckError, RandomAgent
from .files import (
    FileFormatError,
    load_action_log,
    load_episode,
    load_final_state,
    load_manifest,
    load_report,
    save_action_log,
    save_episode,
    save_final_state,
    save_report,
    write_dataset,
)
from .protocol import (
    MESSAGE_KINDS,
    PROTOCOL_VERSION,
    ProtocolError,
    decode,
    encode,
    redacted_program_text,
)
from .runner import (
    DEFAULT_WATCHDOG_S,
    Connection,
    RunResult,
    replay_episode,
    run_episode,
    run_many,
)

__all__ = [
    "OracleAgent",
    "OracleStuckError",
    "RandomAgent",
    "FileFormatError",
    "load_action_log",
    "load_episode",
    "load_final_state",
    "load_manifest",
    "load_report",
    "save_action_log",
    "save_episode",
    "save_final_state",
    "save_report",
    "write_dataset",
    "MESSAGE_KINDS",
    "PROTOCOL_VERSION",
    "ProtocolError",
    "decode",
    "encode",
    "redacted_program_text",
    "DEFAULT_WATCHDOG_S",
    "Connection",
    "RunResult",
    "replay_episode",
    "run_episode",
    "run_many",
]
