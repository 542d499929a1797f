"""Occupancy-grid navigation: rasterization, A*, geodesic distances.

The grid discretizes the floor plane at 0.1 m.  A cell is blocked when its
center comes within the agent radius of an obstacle footprint, so paths found
here are traversable by the disc-based agent.  Used by the metrics engine
(shortest-path oracle), the generator (solvability checks), and the
privileged agent (waypoint planning).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geom import Box
from .scene import WorldState

__all__ = ["GRID_RESOLUTION", "OccupancyGrid", "astar", "geodesic", "NoPathError"]

GRID_RESOLUTION = 0.1
_SQRT2 = math.sqrt(2.0)


class NoPathError(Exception):
    def __init__(self, start, goal):
        super().__init__(f"no grid path from {start} to {goal}")
        self.start = start
        self.goal = goal


def _footprint(box: Box) -> tuple[float, float, float, float]:
    lo, hi = box.aabb()
    return lo[0], lo[1], hi[0], hi[1]


def _z_overlaps_agent(box: Box, agent_height: float) -> bool:
    lo, hi = box.aabb()
    return hi[2] > 1e-9 and lo[2] < agent_height - 1e-9


def _point_rect_dist(px: float, py: float, rect) -> float:
    x0, y0, x1, y1 = rect
    dx = max(x0 - px, 0.0, px - x1)
    dy = max(y0 - py, 0.0, py - y1)
    return math.hypot(dx, dy)


@dataclass
class OccupancyGrid:
    origin: np.ndarray  # world xy of the grid's min corner
    resolution: float
    blocked: np.ndarray  # bool, shape (nx, ny)

    @classmethod
    def build(
        cls,
        state: WorldState,
        agent_radius: float | None = None,
        *,
        include_objects: bool = False,
        exclude_ids: set[str] | None = None,
        extra_boxes=None,
        resolution: float = GRID_RESOLUTION,
        margin: float = 0.5,
    ) -> "OccupancyGrid":
        """Rasterize a world's obstacles, inflated by the agent radius.

        Static layout always blocks; movable objects only when
        `include_objects` is set (the shortest-path oracle plans over statics
        alone, the in-process agent also avoids loose objects).  `extra_boxes`
        adds (id, Box) obstacles beyond what the state holds, e.g. goal-pose
        footprints during solvability checks.
        """
        if agent_radius is None:
            agent_radius = state.agent.radius
        height = state.agent.height
        exclude_ids = exclude_ids or set()
        rects = []
        boxes = list(state.static_layout)
        if include_objects:
            boxes += [(oid, state.world_box(oid)) for oid in state.objects if oid not in exclude_ids]
        if extra_boxes:
            boxes += list(extra_boxes)
        all_pts = [np.asarray(state.agent.position, dtype=np.float64)]
        for _, box in boxes:
            lo, hi = box.aabb()
            all_pts.append(lo[:2])
            all_pts.append(hi[:2])
            if _z_overlaps_agent(box, height):
                rects.append(_footprint(box))
        pts = np.array(all_pts)
        lo_xy = pts.min(axis=0) - margin
        hi_xy = pts.max(axis=0) + margin
        nx = max(1, int(math.ceil((hi_xy[0] - lo_xy[0]) / resolution)))
        ny = max(1, int(math.ceil((hi_xy[1] - lo_xy[1]) / resolution)))
        blocked = np.zeros((nx, ny), dtype=bool)
        xs = lo_xy[0] + (np.arange(nx) + 0.5) * resolution
        ys = lo_xy[1] + (np.arange(ny) + 0.5) * resolution
        for rect in rects:
            # Only sweep the cells near this rectangle.
            x0, y0, x1, y1 = rect
            i0 = max(0, int((x0 - agent_radius - lo_xy[0]) / resolution) - 1)
            i1 = min(nx, int((x1 + agent_radius - lo_xy[0]) / resolution) + 2)
            j0 = max(0, int((y0 - agent_radius - lo_xy[1]) / resolution) - 1)
            j1 = min(ny, int((y1 + agent_radius - lo_xy[1]) / resolution) + 2)
            for i in range(i0, i1):
                for j in range(j0, j1):
                    if not blocked[i, j] and _point_rect_dist(xs[i], ys[j], rect) <= agent_radius:
                        blocked[i, j] = True
        return cls(np.asarray(lo_xy), resolution, blocked)

    @property
    def shape(self) -> tuple[int, int]:
        return self.blocked.shape

    def cell_of(self, xy) -> tuple[int, int]:
        p = np.asarray(xy, dtype=np.float64)
        i = int(math.floor((p[0] - self.origin[0]) / self.resolution))
        j = int(math.floor((p[1] - self.origin[1]) / self.resolution))
        return (min(max(i, 0), self.shape[0] - 1), min(max(j, 0), self.shape[1] - 1))

    def center_of(self, cell: tuple[int, int]) -> np.ndarray:
        i, j = cell
        return self.origin + (np.array([i, j]) + 0.5) * self.resolution

    def is_free(self, cell: tuple[int, int]) -> bool:
        i, j = cell
        if not (0 <= i < self.shape[0] and 0 <= j < self.shape[1]):
            return False
        return not self.blocked[i, j]

    def nearest_free(self, xy, max_radius_cells: int = 30) -> tuple[int, int] | None:
        """The free cell closest to a world point; deterministic tie-break."""
        ci, cj = self.cell_of(xy)
        if self.is_free((ci, cj)):
            return (ci, cj)
        best = None
        for r in range(1, max_radius_cells + 1):
            ring = []
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    if max(abs(di), abs(dj)) != r:
                        continue
                    cell = (ci + di, cj + dj)
                    if self.is_free(cell):
                        d = float(np.linalg.norm(self.center_of(cell) - np.asarray(xy)[:2]))
                        ring.append((d, cell))
            if ring:
                ring.sort()
                best = ring[0][1]
                break
        return best


def astar(grid: OccupancyGrid, start: tuple[int, int], goal: tuple[int, int]):
    """Shortest 8-connected path; returns (length in meters, cell path).

    Diagonal steps cost sqrt(2) cells and are disallowed when either adjacent
    orthogonal cell is blocked (no corner cutting).  Raises
    :class:`NoPathError` when the goal is unreachable.
    """
    if not grid.is_free(start):
        raise NoPathError(start, goal)
    if not grid.is_free(goal):
        raise NoPathError(start, goal)
    res = grid.resolution

    def h(cell):
        dx = abs(cell[0] - goal[0])
        dy = abs(cell[1] - goal[1])
        return (max(dx, dy) + (_SQRT2 - 1.0) * min(dx, dy)) * res

    open_heap = [(h(start), 0.0, start)]
    g_cost = {start: 0.0}
    came = {}
    closed = set()
    while open_heap:
        f, g, cell = heapq.heappop(open_heap)
        if cell in closed:
            continue
        if cell == goal:
            path = [cell]
            while cell in came:
                cell = came[cell]
                path.append(cell)
            path.reverse()
            return g, path
        closed.add(cell)
        ci, cj = cell
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                nxt = (ci + di, cj + dj)
                if not grid.is_free(nxt):
                    continue
                if di != 0 and dj != 0:
                    if not (grid.is_free((ci + di, cj)) and grid.is_free((ci, cj + dj))):
                        continue
                    step = _SQRT2 * res
                else:
                    step = res
                ng = g + step
                if ng < g_cost.get(nxt, math.inf) - 1e-12:
                    g_cost[nxt] = ng
                    came[nxt] = cell
                    heapq.heappush(open_heap, (ng + h(nxt), ng, nxt))
    raise NoPathError(start, goal)


def geodesic(grid: OccupancyGrid, a_xy, b_xy) -> float:
    """Grid path length between two world points, snapping each endpoint to
    its nearest free cell."""
    ca = grid.nearest_free(a_xy)
    cb = grid.nearest_free(b_xy)
    if ca is None or cb is None:
        raise NoPathError(grid.cell_of(a_xy), grid.cell_of(b_xy))
    length, _ = astar(grid, ca, cb)
    return length
