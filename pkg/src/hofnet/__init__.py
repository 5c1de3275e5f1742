"""Higher-order function networks: an encoder emits the weights of a small
mapping network that turns canonical samples into an object's point cloud."""
from .composition import (CompositionPlan, KMapping, compose_interpolate, param_interpolate,
                          power_eval, reg_distance_traveled, reg_projection)
from .estimator import HOFReconstructor
from .exceptions import HofError
from .funcnets import (HOF1, HOF3, EncoderNet, FlatParams, LvcSpec, MlpSpec, complexity_lvc,
                       count_params, encoder_forward, init_params, lvc_collision_demo, lvc_forward,
                       lvc_to_hof, mapping_forward)
from .geometry import (CanonicalSampler, KDTree, OccupancyGrid, PointCloud, chamfer_asym,
                       chamfer_sym, f1_score, sample_canonical, voxelize)
from .planning import Episode, astar, evaluate_paths
from .shapes import gen_dataset, make_shape
from .training import Checkpoint, TrainConfig, load_checkpoint, save_checkpoint, train_step

__version__ = "0.1.0"

__all__ = [
    "HOF1", "HOF3", "CanonicalSampler", "Checkpoint", "CompositionPlan", "EncoderNet", "Episode",
    "FlatParams", "HOFReconstructor", "HofError", "KDTree", "KMapping", "LvcSpec", "MlpSpec",
    "OccupancyGrid", "PointCloud", "TrainConfig", "astar", "chamfer_asym", "chamfer_sym",
    "complexity_lvc", "compose_interpolate", "count_params", "encoder_forward", "evaluate_paths",
    "f1_score", "gen_dataset", "init_params", "load_checkpoint", "lvc_collision_demo",
    "lvc_forward", "lvc_to_hof", "make_shape", "mapping_forward", "param_interpolate",
    "power_eval", "reg_distance_traveled", "reg_projection", "sample_canonical",
    "save_checkpoint", "train_step", "voxelize",
]
