from dataclasses import dataclass

import numpy as np

from ..exceptions import BoundsError, ShapeError
from ..utils.validation import check_points


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """An n x n x n boolean lattice over the cube [-1, 1]^3."""

    occupied: np.ndarray

    def __post_init__(self):
        occ = np.array(self.occupied, dtype=bool)
        if occ.ndim != 3 or len(set(occ.shape)) != 1 or occ.shape[0] < 1:
            raise ShapeError(f"occupancy must be a nonempty n^3 cube, got {occ.shape}")
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, n, n), dtype=bool))

    @property
    def n(self):
        return self.occupied.shape[0]

    @property
    def voxel_size(self):
        return 2.0 / self.n

    def __getitem__(self, ijk):
        return bool(self.occupied[tuple(ijk)])

    def __eq__(self, other):
        return isinstance(other, OccupancyGrid) and np.array_equal(self.occupied, other.occupied)

    def count(self):
        return int(self.occupied.sum())

    def index_of(self, points):
        """Voxel index triple for each point, clamping the upper face inward."""
        pts = check_points(points, dim=3)
        return point_to_index(pts, self.n)

    def center_of(self, ijk):
        return -1.0 + (np.asarray(ijk, dtype=np.float64) + 0.5) * self.voxel_size

    def bounding_box(self):
        """Filled grid covering the axis-aligned bounding box of the occupied voxels."""
        box = np.zeros_like(self.occupied)
        if self.count():
            idx = np.argwhere(self.occupied)
            lo, hi = idx.min(axis=0), idx.max(axis=0) + 1
            box[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
        return OccupancyGrid(box)

    def union(self, other):
        return OccupancyGrid(self.occupied | other.occupied)


def point_to_index(points, n):
    idx = np.floor((points + 1.0) * (n / 2.0)).astype(np.int64)
    return np.clip(idx, 0, n - 1)


def voxelize(cloud, n):
    """Occupancy grid of voxel side 2/n marking every cell that holds a point."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    pts = check_points(cloud, dim=3, name="cloud")
    outside = np.any(np.abs(pts) > 1.0, axis=1)
    if outside.any():
        bad = pts[np.argmax(outside)]
        raise BoundsError(f"point {bad.tolist()} lies outside [-1, 1]^3")
    occ = np.zeros((n, n, n), dtype=bool)
    idx = point_to_index(pts, n)
    occ[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return OccupancyGrid(occ)
