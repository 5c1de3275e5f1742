"""Collision-free path benchmark on voxel grids.

Paths move one voxel at a time along a single axis (6-connected), and
lengths count moves, so the obstacle-free distance is the L1 distance
between voxel indices.
"""
from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import EndpointError
from .geometry.voxel import OccupancyGrid
from .utils.validation import check_random_state

_MOVES = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))

REPORT_HEADER = ("model_id", "episodes", "skipped", "success_rate", "optimality")


class GridPath(tuple):
    """Voxel indices from start to goal; consecutive entries differ by one
    unit step along exactly one axis."""

    def __new__(cls, voxels):
        voxels = tuple(tuple(int(c) for c in v) for v in voxels)
        for a, b in zip(voxels, voxels[1:]):
            if sum(abs(p - q) for p, q in zip(a, b)) != 1:
                raise ValueError(f"non-rectilinear step {a} -> {b}")
        return super().__new__(cls, voxels)

    @property
    def length(self):
        return max(0, len(self) - 1)

    def collides(self, grid: OccupancyGrid):
        occ = grid.occupied
        return any(occ[v] for v in self)


@dataclass(frozen=True)
class Episode:
    start: tuple
    goal: tuple

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(int(c) for c in self.start))
        object.__setattr__(self, "goal", tuple(int(c) for c in self.goal))
        if self.start == self.goal:
            raise ValueError("start and goal coincide")

    @classmethod
    def from_direction(cls, v, n):
        """Endpoints of ``+-d`` with ``d = (n/2) v / |v|_1``, measured in
        voxels from the grid centre."""
        v = np.asarray(v, dtype=np.float64)
        d = (n / 2.0) * v / np.sum(np.abs(v))
        centre = n / 2.0
        to_index = lambda p: tuple(np.clip(np.floor(centre + p), 0, n - 1).astype(int))
        return cls(to_index(d), to_index(-d))

    def l1(self):
        return sum(abs(a - b) for a, b in zip(self.start, self.goal))


def sample_episodes(n, count, rng=None):
    """``count`` episodes from directions drawn uniformly on the unit sphere."""
    rng = check_random_state(rng)
    out = []
    while len(out) < count:
        v = rng.standard_normal(3)
        if not np.any(v):
            continue
        try:
            out.append(Episode.from_direction(v / np.linalg.norm(v), n))
        except ValueError:
            continue
    return out


def _check_endpoints(grid, ep):
    n = grid.n
    for name, p in (("start", ep.start), ("goal", ep.goal)):
        if not all(0 <= c < n for c in p):
            raise EndpointError(f"{name} {p} outside the {n}^3 grid")
        if grid.occupied[p]:
            raise EndpointError(f"{name} {p} is occupied")


def astar(grid: OccupancyGrid, ep: Episode):
    """Shortest 6-connected path avoiding occupied voxels, or ``None``.

    The L1 heuristic is consistent for unit moves, so the first time the
    goal is popped its cost is optimal.
    """
    _check_endpoints(grid, ep)
    occ = grid.occupied
    n = grid.n
    goal = ep.goal
    h = lambda p: abs(p[0] - goal[0]) + abs(p[1] - goal[1]) + abs(p[2] - goal[2])
    start = ep.start
    best = {start: 0}
    parent = {start: None}
    counter = 0
    heap = [(h(start), 0, counter, start)]
    while heap:
        _, g, _, node = heapq.heappop(heap)
        if node == goal:
            path = [node]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return GridPath(reversed(path))
        if g > best[node]:
            continue
        x, y, z = node
        for dx, dy, dz in _MOVES:
            nb = (x + dx, y + dy, z + dz)
            if not (0 <= nb[0] < n and 0 <= nb[1] < n and 0 <= nb[2] < n) or occ[nb]:
                continue
            ng = g + 1
            if ng < best.get(nb, math.inf):
                best[nb] = ng
                parent[nb] = node
                counter += 1
                heapq.heappush(heap, (ng + h(nb), ng, counter, nb))
    return None


def baseline_shortest_l1(ep: Episode) -> GridPath:
    """Straight rectilinear path ignoring obstacles: x first, then y, then z."""
    cur = list(ep.start)
    path = [tuple(cur)]
    for axis in range(3):
        step = 1 if ep.goal[axis] > cur[axis] else -1
        while cur[axis] != ep.goal[axis]:
            cur[axis] += step
            path.append(tuple(cur))
    return GridPath(path)


def baseline_sabb(gt_grid: OccupancyGrid, ep: Episode):
    """A* around the filled bounding box of the ground-truth voxels."""
    return astar(gt_grid.bounding_box(), ep)


@dataclass
class PathReport:
    model_id: str
    episodes: int
    skipped: int
    successes: int
    success_rate: float
    optimality: float

    def row(self):
        return [self.model_id, self.episodes, self.skipped,
                repr(float(self.success_rate)), repr(float(self.optimality))]


METHODS = ("astar", "shortest_l1", "sabb")


def evaluate_paths(pred_grid, gt_grid: OccupancyGrid, episodes, method="astar", model_id=""):
    """Plan each episode and score it against the ground truth.

    ``method`` picks the planner: ``"astar"`` on ``pred_grid``,
    ``"shortest_l1"`` (obstacles ignored) or ``"sabb"`` (ground-truth
    bounding box). Success means the planned path touches no ground-truth
    voxel; optimality averages ``len(gt-optimal) / len(planned)`` over the
    successes. Episodes with an occupied endpoint, in the planning grid or
    the ground truth, are skipped and counted.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if method == "astar":
        if pred_grid.n != gt_grid.n:
            raise ValueError("grids differ in size")
        plan_grid = pred_grid
    elif method == "sabb":
        plan_grid = gt_grid.bounding_box()
    else:
        plan_grid = OccupancyGrid.empty(gt_grid.n)

    skipped = evaluated = successes = 0
    ratios = []
    for ep in episodes:
        try:
            _check_endpoints(gt_grid, ep)
            _check_endpoints(plan_grid, ep)
        except EndpointError:
            skipped += 1
            continue
        optimal = astar(gt_grid, ep)
        if optimal is None:
            skipped += 1
            continue
        evaluated += 1
        path = baseline_shortest_l1(ep) if method == "shortest_l1" else astar(plan_grid, ep)
        if path is None or path.collides(gt_grid):
            continue
        successes += 1
        ratios.append(optimal.length / path.length)

    return PathReport(
        model_id=model_id,
        episodes=len(episodes),
        skipped=skipped,
        successes=successes,
        success_rate=successes / evaluated if evaluated else math.nan,
        optimality=float(np.mean(ratios)) if ratios else math.nan,
    )


def format_report(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()
