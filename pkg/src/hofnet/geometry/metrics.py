"""Point-set distances: Chamfer (one-sided and symmetric) and F1@tau."""
import numpy as np

from ..utils.validation import check_pair
from .kdtree import nearest_neighbors


def chamfer_asym(x, y, backend="auto"):
    """Mean over ``x`` of the squared distance to the nearest point of ``y``.

    Defined for any nonempty sets of the same dimension; the cardinalities
    need not match.
    """
    x, y = check_pair(x, y)
    d2, _ = nearest_neighbors(x, y, backend=backend)
    return float(d2.mean())


def chamfer_sym(x, y, backend="auto"):
    return chamfer_asym(x, y, backend) + chamfer_asym(y, x, backend)


def default_f1_threshold(gt, fraction=0.01):
    """``fraction`` of the diagonal of the bounding box of ``gt``."""
    gt = np.asarray(getattr(gt, "points", gt), dtype=np.float64)
    diag = float(np.linalg.norm(gt.max(axis=0) - gt.min(axis=0)))
    return fraction * diag


def precision_recall(pred, gt, tau, backend="auto"):
    pred, gt = check_pair(pred, gt, names=("pred", "gt"))
    tau = float(tau)
    if not tau > 0:
        raise ValueError("tau must be positive")
    d_pred, _ = nearest_neighbors(pred, gt, backend=backend)
    d_gt, _ = nearest_neighbors(gt, pred, backend=backend)
    tau2 = tau * tau
    return float(np.mean(d_pred <= tau2)), float(np.mean(d_gt <= tau2))


def f1_score(pred, gt, tau, backend="auto"):
    """Harmonic mean of precision and recall at distance threshold ``tau``.

    A predicted point is correct when some ground-truth point lies within
    Euclidean distance ``tau``; recall is the same test the other way round.
    Returns 0 when both precision and recall are 0.
    """
    p, r = precision_recall(pred, gt, tau, backend)
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)
