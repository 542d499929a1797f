"""
Run an agent in a separate process over the line-delimited JSON protocol
========================================================================

The harness launches any command via an ``exec:`` endpoint and speaks
newline-delimited JSON with it: a ``hello`` with the episode summary and
goal, then one ``observation`` per tick, expecting one ``action`` back,
and finally a ``done`` carrying the report.  The agent below is written
against nothing but stdin/stdout and the json module, which is the point:
any language can play.
"""

import sys
import tempfile
import textwrap
from pathlib import Path

from tidysim import DifficultyParams, generate, run_episode

AGENT_SOURCE = """
    import json, sys

    def send(doc):
        sys.stdout.write(json.dumps(doc) + "\\n")
        sys.stdout.flush()

    spin = 0
    for line in sys.stdin:
        msg = json.loads(line)
        if msg["kind"] == "hello":
            print("agent: goal is", json.dumps(msg["goal"]), file=sys.stderr)
        elif msg["kind"] == "observation":
            # Turn on the spot for a few ticks, then give up politely.
            spin += 1
            send({"kind": "action", "name": "turn_left" if spin <= 8 else "stop"})
        elif msg["kind"] in ("done", "error"):
            break
"""

with tempfile.TemporaryDirectory() as d:
    agent_py = Path(d) / "spinner.py"
    agent_py.write_text(textwrap.dedent(AGENT_SOURCE))

    episode = generate(seed=3, params=DifficultyParams(n_task_objects=1))
    result = run_episode(f"exec:{sys.executable} {agent_py}", episode)

print(f"agent ran {result.report.ticks} ticks, success={result.report.success}")
print("actions seen by the harness:", [a.name for a in result.actions])
