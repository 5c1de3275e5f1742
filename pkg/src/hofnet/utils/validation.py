"""Input validation helpers shared by the estimator and the metric functions."""
import numpy as np

from ..exceptions import EmptySetError, NonFiniteError, ShapeError


def check_points(points, *, dim=None, name="points", allow_empty=False):
    """Return ``points`` as a C-contiguous float64 array of shape (n, c).

    Accepts anything array-like, or an object exposing a ``points`` array
    (such as :class:`hofnet.geometry.PointCloud`).
    """
    points = getattr(points, "points", points)
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim == 1 and dim is not None and arr.shape[0] == dim:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D (n, dim), got shape {arr.shape}")
    if arr.shape[0] == 0 and not allow_empty:
        raise EmptySetError(f"{name} is empty")
    if dim is not None and arr.shape[1] != dim:
        raise ShapeError(f"{name} has dim {arr.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or infinite values")
    return arr


def check_pair(x, y, names=("x", "y")):
    x = check_points(x, name=names[0])
    y = check_points(y, name=names[1])
    if x.shape[1] != y.shape[1]:
        raise ShapeError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return x, y


def check_vector(v, *, size=None, name="vector"):
    arr = np.ascontiguousarray(v, dtype=np.float64).ravel()
    if size is not None and arr.shape[0] != size:
        raise ShapeError(f"{name} has length {arr.shape[0]}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains NaN or infinite values")
    return arr


def check_rasters(X, n_features=None):
    """Flatten a stack of observations to shape (n_samples, n_features)."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    elif arr.ndim > 2:
        arr = arr.reshape(arr.shape[0], -1)
    if arr.shape[0] == 0:
        raise EmptySetError("no observations given")
    if n_features is not None and arr.shape[1] != n_features:
        raise ShapeError(f"observations have {arr.shape[1]} features, expected {n_features}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("observations contain NaN or infinite values")
    return arr


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
