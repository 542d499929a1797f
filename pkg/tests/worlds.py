"""Hand-built scenes shared by the simulator and metrics tests."""

from __future__ import annotations

import numpy as np

from tidysim.geom import Box, Pose
from tidysim.scene import AgentState, JointSpec, ObjectSpec, ObjectState, WorldState


def walls(size=6.0, thickness=0.05, height=1.0):
    t, s, h = thickness, size, height
    return [
        ("wall_s", Box.axis_aligned((s / 2, -t, h), (s / 2 + 2 * t, t, h))),
        ("wall_n", Box.axis_aligned((s / 2, s + t, h), (s / 2 + 2 * t, t, h))),
        ("wall_w", Box.axis_aligned((-t, s / 2, h), (t, s / 2 + 2 * t, h))),
        ("wall_e", Box.axis_aligned((s + t, s / 2, h), (t, s / 2 + 2 * t, h))),
    ]


def simple_room(
    cubes=None,
    agent_xy=(0.5, 0.5),
    heading=0.0,
    table=None,
    fridge=None,
    capacity=0,
    size=6.0,
):
    """A walled room with optional floor cubes, a table, and an articulated
    fridge.  `cubes` maps id -> (x, y); cube half extent is 0.1 so centers
    sit at z=0.1.
    """
    statics = walls(size)
    specs = {}
    objects = {}
    if table is not None:
        statics.append(("table", Box.axis_aligned((table[0], table[1], 0.4), (0.6, 0.4, 0.4))))
    for oid, (x, y) in (cubes or {}).items():
        specs[oid] = ObjectSpec(oid, "cube", np.array([0.1, 0.1, 0.1]), 0.5, True)
        objects[oid] = ObjectState(Pose.from_xyz(x, y, 0.1))
    if fridge is not None:
        specs["fridge"] = ObjectSpec(
            "fridge",
            "fridge",
            np.array([0.35, 0.35, 0.9]),
            45.0,
            False,
            JointSpec("revolute", (0.0, 1.0)),
        )
        objects["fridge"] = ObjectState(
            Pose.from_xyz(fridge[0], fridge[1], 0.9), joint_position=fridge[2]
        )
    agent = AgentState(position=np.array(agent_xy, dtype=float), heading=heading, capacity=capacity)
    return WorldState(specs=specs, objects=objects, agent=agent, static_layout=statics)


def put_on_table(world, oid, x, y, he=(0.1, 0.1, 0.1), mass=0.5):
    """Add a cube resting on the table top (z=0.8)."""
    world.specs[oid] = ObjectSpec(oid, "cube", np.array(he), mass, True)
    world.objects[oid] = ObjectState(Pose.from_xyz(x, y, 0.8 + he[2]))
    world.__post_init__()
    return world
