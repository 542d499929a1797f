#!/usr/bin/env python3
# Hand-build a one-room world, then drive the simulator step by step.
# No generator, no agents: just the raw environment loop.

import numpy as np

from tidysim import (
    AgentState,
    Box,
    Environment,
    EpisodeConfig,
    Grab,
    LookDown,
    MoveForward,
    NoiseModel,
    ObjectSpec,
    ObjectState,
    Pose,
    PredicateGoal,
    Release,
    Stop,
    WorldState,
    parse,
)

size = 4.0
walls = [
    ("wall_s", Box.axis_aligned((size / 2, -0.05, 1.0), (size / 2 + 0.1, 0.05, 1.0))),
    ("wall_n", Box.axis_aligned((size / 2, size + 0.05, 1.0), (size / 2 + 0.1, 0.05, 1.0))),
    ("wall_w", Box.axis_aligned((-0.05, size / 2, 1.0), (0.05, size / 2 + 0.1, 1.0))),
    ("wall_e", Box.axis_aligned((size + 0.05, size / 2, 1.0), (0.05, size / 2 + 0.1, 1.0))),
]

world = WorldState(
    specs={"mug": ObjectSpec("mug", "mug", np.array([0.1, 0.1, 0.1]), 0.4, True)},
    objects={"mug": ObjectState(Pose.from_xyz(1.5, 0.5, 0.1))},
    agent=AgentState(position=np.array([0.5, 0.5]), heading=0.0, capacity=0),
    static_layout=walls,
)

# Score: mug ends up within 30 cm of (2.5, 0.5).
goal = PredicateGoal(parse("(score (within_m mug (2.5 0.5 0.1) 0.3))"))

episode = EpisodeConfig(
    initial=world,
    goal=goal,
    task_ids=["mug"],
    max_ticks=100,
    seed=1,
    episode_id="by-hand",
    noise=NoiseModel.off(),
)

env = Environment(episode)
obs = env.reset()

# Walk east to a half-meter standoff (0.25 m per MoveForward), tip the view
# down far enough that the crosshair ray meets a floor object, pick it up,
# carry it east, and drop it.  Release places the load 0.5 m ahead, so
# stopping at x=2.0 sets the mug down on the goal point exactly.
plan = (
    [MoveForward()] * 2
    + [LookDown()] * 6
    + [Grab()]
    + [MoveForward()] * 4
    + [Release(), Stop()]
)

for action in plan:
    obs = env.step(action)
    seen = ", ".join(v.id for v in obs.visible) or "nothing"
    print(
        f"tick {obs.tick:2d}  {type(action).__name__:12s}"
        f" ok={str(obs.last_action_ok):5s} held={obs.held or '-':4s} sees: {seen}"
    )
    if env.done:
        break

print(f"\nenergy spent: {env.energy:.0f} J over {env.path_length:.2f} m")
print("mug now at:", np.round(env.world.world_box("mug").center_pose.translation, 2))
