"""Episode execution: in-process agents, external agents over subprocess
pipes or TCP, exploration phases, watchdogs, and report assembly.

One environment per execution context: :func:`run_many` gives each episode
its own thread, connection, and :class:`~tidysim.sim.Environment`, so many
episodes can be in flight without sharing mutable state.
"""

from __future__ import annotations

import dataclasses
import queue
import shlex
import socket
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from ..goals import ExperienceGoal
from ..metrics import EvaluationReport, assemble_report
from ..scene import WorldState
from ..sim import Action, Environment, EpisodeConfig
from .protocol import (
    PROTOCOL_VERSION,
    ProtocolError,
    decode,
    done_message,
    encode,
    error_message,
    hello_message,
    observation_message,
    parse_action,
)

__all__ = [
    "DEFAULT_WATCHDOG_S",
    "RunResult",
    "AgentAbort",
    "Connection",
    "run_episode",
    "replay_episode",
    "run_many",
]

DEFAULT_WATCHDOG_S = 30.0

# Exploration runs in a separate environment; salting the seed keeps its
# noise stream distinct from the scored phase without a second seed field.
_EXPLORE_SEED_SALT = 0x5EED


class AgentAbort(Exception):
    """The agent side failed: disconnect, silence, or a protocol breach."""

    def __init__(self, code: str, text: str):
        super().__init__(f"{code}: {text}")
        self.code = code
        self.text = text


@dataclass(frozen=True)
class RunResult:
    report: EvaluationReport
    actions: tuple[Action, ...]
    final_state: WorldState
    error: str | None = None


# ---------------------------------------------------------------------------
# Transports


class _Reader(threading.Thread):
    """Pushes decoded messages from a byte stream into a queue; a None item
    marks end of stream, a ProtocolError item marks an undecodable line."""

    def __init__(self, stream, out: queue.Queue):
        super().__init__(daemon=True)
        self._stream = stream
        self._out = out

    def run(self):
        try:
            for line in iter(self._stream.readline, b""):
                if not line.strip():
                    continue
                try:
                    self._out.put(decode(line))
                except ProtocolError as e:
                    self._out.put(e)
        except (OSError, ValueError):
            pass
        self._out.put(None)


class Connection:
    """One agent endpoint: framed send, queued receive with a timeout."""

    def __init__(self, reader_stream, writer_stream, on_close=None):
        self._writer = writer_stream
        self._queue: queue.Queue = queue.Queue()
        self._on_close = on_close
        self._closed = False
        _Reader(reader_stream, self._queue).start()

    @classmethod
    def open(cls, endpoint: str) -> "Connection":
        if endpoint.startswith("exec:"):
            command = shlex.split(endpoint[len("exec:") :])
            if not command:
                raise ValueError("exec: endpoint needs a command")
            proc = subprocess.Popen(command, stdin=subprocess.PIPE, stdout=subprocess.PIPE)

            def close():
                try:
                    proc.stdin.close()
                except OSError:
                    pass
                try:
                    proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    proc.kill()
                    proc.wait()

            return cls(proc.stdout, proc.stdin, close)
        if endpoint.startswith("tcp:"):
            host, _, port = endpoint[len("tcp:") :].rpartition(":")
            if not host or not port.isdigit():
                raise ValueError(f"tcp: endpoint must be tcp:HOST:PORT, got {endpoint!r}")
            sock = socket.create_connection((host, int(port)), timeout=10)
            reader = sock.makefile("rb")
            writer = sock.makefile("wb")

            def close():
                try:
                    sock.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                sock.close()

            return cls(reader, writer, close)
        raise ValueError(f"unknown endpoint {endpoint!r}; use exec:COMMAND or tcp:HOST:PORT")

    def send(self, message: dict):
        self._writer.write(encode(message))
        self._writer.flush()

    def try_send(self, message: dict):
        try:
            self.send(message)
        except (OSError, ValueError):
            pass

    def recv(self, timeout: float | None):
        """Next message dict; None on end of stream.

        Raises AgentAbort on watchdog expiry and ProtocolError on an
        undecodable line.
        """
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise AgentAbort("watchdog", f"agent silent for {timeout:g} s") from None
        if isinstance(item, ProtocolError):
            raise item
        return item

    def close(self):
        if self._closed:
            return
        self._closed = True
        try:
            self._writer.close()
        except (OSError, ValueError):
            pass
        if self._on_close is not None:
            self._on_close()


# ---------------------------------------------------------------------------
# Episode loops


def _exploration_config(episode: EpisodeConfig) -> EpisodeConfig:
    goal: ExperienceGoal = episode.goal
    return dataclasses.replace(
        episode,
        initial=goal.goal_state.copy(),
        max_ticks=goal.exploration_budget,
        seed=episode.seed ^ _EXPLORE_SEED_SALT,
        episode_id=episode.episode_id,
    )


def _result(
    episode: EpisodeConfig,
    env: Environment,
    latencies: list[float],
    error: str | None,
) -> RunResult:
    mean_latency = sum(latencies) / len(latencies) if latencies else None
    report = assemble_report(
        episode,
        env.snapshot(),
        ticks=env.tick,
        energy=env.energy,
        agent_path_length=env.path_length,
        decision_latency_mean_s=mean_latency,
        aborted=error is not None,
    )
    return RunResult(report, tuple(env.action_log()), env.snapshot(), error)


def _run_inprocess(agent, episode: EpisodeConfig) -> RunResult:
    latencies: list[float] = []
    error = None
    env = Environment(episode)
    try:
        if isinstance(episode.goal, ExperienceGoal):
            explore_env = Environment(_exploration_config(episode))
            obs = explore_env.reset()
            agent.begin(episode, explore_env, phase="explore")
            while not explore_env.done:
                obs = explore_env.step(agent.act(obs))
        obs = env.reset()
        agent.begin(episode, env, phase="score")
        while not env.done:
            t0 = time.perf_counter()
            action = agent.act(obs)
            latencies.append(time.perf_counter() - t0)
            obs = env.step(action)
    except Exception as e:  # noqa: BLE001 - a crashing agent aborts, not the runner
        error = f"{type(e).__name__}: {e}"
        if env.tick == 0 and not env.done:
            env.reset()
    return _result(episode, env, latencies, error)


def _next_action(conn: Connection, watchdog: float | None, latencies: list[float]) -> Action:
    t0 = time.perf_counter()
    while True:
        message = conn.recv(watchdog)
        if message is None:
            raise AgentAbort("disconnect", "agent closed the connection")
        kind = message["kind"]
        if kind == "action":
            latencies.append(time.perf_counter() - t0)
            return parse_action(message)
        if kind == "hello":
            version = message.get("version")
            if version != PROTOCOL_VERSION:
                raise AgentAbort(
                    "version-mismatch",
                    f"agent speaks version {version!r}, runner speaks {PROTOCOL_VERSION!r}",
                )
            continue  # a compatible greeting is harmless chatter
        if kind == "error":
            raise AgentAbort(message.get("code", "agent-error"), message.get("text", ""))
        raise ProtocolError("bad-kind", f"runner expected an action, got {kind!r}")


def _run_remote(endpoint: str, episode: EpisodeConfig, watchdog: float | None) -> RunResult:
    latencies: list[float] = []
    error = None
    env = Environment(episode)
    conn = Connection.open(endpoint)
    try:
        try:
            conn.send(hello_message(episode))
            if isinstance(episode.goal, ExperienceGoal):
                explore_env = Environment(_exploration_config(episode))
                obs = explore_env.reset()
                while not explore_env.done:
                    conn.send(observation_message(obs, "explore"))
                    obs = explore_env.step(_next_action(conn, watchdog, latencies))
            obs = env.reset()
            while not env.done:
                conn.send(observation_message(obs, "score"))
                obs = env.step(_next_action(conn, watchdog, latencies))
        except ProtocolError as e:
            conn.try_send(error_message(e.code, e.text))
            error = str(e)
        except AgentAbort as e:
            if e.code == "watchdog":
                conn.try_send(error_message(e.code, e.text))
            error = str(e)
        except OSError as e:
            error = f"transport failure: {e}"
        if env.tick == 0 and not env.done:
            env.reset()
        result = _result(episode, env, latencies, error)
        conn.try_send(done_message(result.report))
        return result
    finally:
        conn.close()


def run_episode(
    agent,
    episode: EpisodeConfig,
    *,
    watchdog: float | None = DEFAULT_WATCHDOG_S,
) -> RunResult:
    """Drive one episode to its report.

    `agent` is either an endpoint string (``exec:COMMAND`` or
    ``tcp:HOST:PORT``) or an in-process object with ``begin(episode, env,
    phase)`` and ``act(observation) -> action``.  Agent failures of any kind
    surface as a normal result whose report is flagged aborted.
    """
    if isinstance(agent, str):
        return _run_remote(agent, episode, watchdog)
    return _run_inprocess(agent, episode)


def replay_episode(episode: EpisodeConfig, actions) -> RunResult:
    """Re-derive a report by applying a recorded action sequence."""
    env = Environment(episode)
    env.reset()
    for action in actions:
        if env.done:
            break
        env.step(action)
    return _result(episode, env, [], None)


def run_many(
    episodes,
    agent_factory,
    *,
    watchdog: float | None = DEFAULT_WATCHDOG_S,
    max_workers: int = 4,
) -> list[RunResult]:
    """Run episodes concurrently, one environment and one agent each.

    `agent_factory(episode)` supplies a fresh agent object or endpoint
    string per episode; results come back in episode order.
    """
    episodes = list(episodes)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [
            pool.submit(run_episode, agent_factory(ep), ep, watchdog=watchdog)
            for ep in episodes
        ]
        return [f.result() for f in futures]
