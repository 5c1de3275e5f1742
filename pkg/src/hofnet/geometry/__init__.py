from .io import read_points, write_points
from .kdtree import KDTree, brute_force_nn, nearest_neighbors
from .metrics import chamfer_asym, chamfer_sym, default_f1_threshold, f1_score, precision_recall
from .pointcloud import PointCloud
from .sampling import SAMPLER_KINDS, CanonicalSampler, sample, sample_canonical
from .voxel import OccupancyGrid, voxelize

__all__ = [
    "SAMPLER_KINDS",
    "CanonicalSampler",
    "KDTree",
    "OccupancyGrid",
    "PointCloud",
    "brute_force_nn",
    "chamfer_asym",
    "chamfer_sym",
    "default_f1_threshold",
    "f1_score",
    "nearest_neighbors",
    "precision_recall",
    "read_points",
    "sample",
    "sample_canonical",
    "voxelize",
    "write_points",
]
