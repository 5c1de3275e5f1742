from dataclasses import dataclass, field

import numpy as np

from ..utils.validation import check_points


@dataclass(frozen=True, eq=False)
class PointCloud:
    """A finite set of c-dimensional points, 2 <= c <= 4."""

    points: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = check_points(self.points, name="PointCloud.points")
        if not 2 <= arr.shape[1] <= 4:
            raise ValueError(f"point dimension must be in [2, 4], got {arr.shape[1]}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.points, dtype=dtype)
