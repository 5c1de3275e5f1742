"""Self-composition of mapping networks, interpolation by composing two of
them, the parameter-averaging baseline, and the travel/projection
regularisers."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .exceptions import ShapeError, SpecError
from .funcnets import FlatParams, mapping_forward, mlp_apply
from .geometry.kdtree import nearest_neighbors
from .utils.validation import check_points

DEFAULT_REG_LAMBDA = 0.01


def _require_endomorphism(spec):
    if spec.n_in != spec.n_out:
        raise ShapeError(
            f"composition needs equal input and output dims, got {spec.n_in} -> {spec.n_out}"
        )


@dataclass(frozen=True)
class KMapping:
    """A mapping network whose k-th self-composition is the reconstruction."""

    params: FlatParams
    k: int = 1

    def __post_init__(self):
        _require_endomorphism(self.params.spec)
        if int(self.k) < 0:
            raise ValueError("k must be nonnegative")


def power_eval(m: KMapping, x) -> np.ndarray:
    """``f^k(x)``, with ``f^0`` the identity. No renormalisation between stages."""
    x = check_points(x, dim=m.params.spec.n_in, name="x")
    out = x.copy()
    for _ in range(m.k):
        out = mapping_forward(m.params, out)
    return out


def power_apply(spec, theta, x, k):
    """On-tape ``f^k`` for training; ``theta`` and ``x`` are nodes."""
    _require_endomorphism(spec)
    for _ in range(k):
        x = mlp_apply(spec, theta, x)
    return x


@dataclass(frozen=True)
class CompositionPlan:
    """Which of two mappings to apply at each stage, first stage first.

    ``"AB"`` means apply A, then B: ``f_B(f_A(x))``.
    """

    stages: str

    def __post_init__(self):
        stages = str(self.stages).strip().upper()
        if not stages:
            raise ValueError("a composition plan needs at least one stage")
        bad = set(stages) - {"A", "B"}
        if bad:
            raise ValueError(f"plan {self.stages!r} has characters outside {{A, B}}: {sorted(bad)}")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def parse(cls, text) -> "CompositionPlan":
        return cls(text)

    @property
    def k(self):
        return len(self.stages)

    def __str__(self):
        return self.stages

    @staticmethod
    def enumerate(k):
        """All ``2**k`` plans of length ``k``."""
        return [CompositionPlan("".join(p)) for p in itertools.product("AB", repeat=k)]


def compose_interpolate(a: FlatParams, b: FlatParams, plan, x) -> np.ndarray:
    if a.spec != b.spec:
        raise SpecError("both mappings must share one spec")
    _require_endomorphism(a.spec)
    if not isinstance(plan, CompositionPlan):
        plan = CompositionPlan(plan)
    out = check_points(x, dim=a.spec.n_in, name="x").copy()
    for stage in plan.stages:
        out = mapping_forward(a if stage == "A" else b, out)
    return out


def param_interpolate(a: FlatParams, b: FlatParams) -> FlatParams:
    """Baseline: the mapping whose parameters are the average of ``a`` and ``b``."""
    if a.spec != b.spec:
        raise SpecError("both mappings must share one spec")
    return FlatParams(a.spec, (a.theta + b.theta) / 2.0)


def reg_distance_traveled(params: FlatParams, xs) -> float:
    """Mean squared displacement ``|f(x) - x|^2`` over the sample."""
    _require_endomorphism(params.spec)
    xs = check_points(xs, dim=params.spec.n_in, name="xs")
    moved = mapping_forward(params, xs) - xs
    return float(np.mean(np.sum(moved * moved, axis=1)))


def reg_projection(params: FlatParams, xs, target) -> float:
    """Mean squared distance between ``f(x)`` and the target point nearest to ``x``."""
    _require_endomorphism(params.spec)
    xs = check_points(xs, dim=params.spec.n_in, name="xs")
    target = check_points(target, dim=params.spec.n_out, name="target")
    _, idx = nearest_neighbors(xs, target)
    diff = mapping_forward(params, xs) - target[idx]
    return float(np.mean(np.sum(diff * diff, axis=1)))


def travel_penalty(x_node, mapped_node):
    """On-tape version of :func:`reg_distance_traveled` for a given ``f(x)``."""
    n = x_node.shape[0]
    return T.scale(T.sq_norm(T.sub(mapped_node, x_node)), 1.0 / n)
