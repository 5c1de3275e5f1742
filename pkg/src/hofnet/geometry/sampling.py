"""Uniform samplers over the canonical input sets."""
from dataclasses import dataclass

import numpy as np

from ..utils.validation import check_random_state
from .pointcloud import PointCloud

SAMPLER_KINDS = ("ball3_interior", "sphere3_surface", "cube3_interior", "ball4_interior")

SAMPLER_DIMS = {
    "ball3_interior": 3,
    "sphere3_surface": 3,
    "cube3_interior": 3,
    "ball4_interior": 4,
}


def _unit_directions(rng, count, dim):
    g = rng.standard_normal((count, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # a zero Gaussian draw has probability zero; guard anyway
    bad = norms[:, 0] == 0.0
    while np.any(bad):
        g[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        bad = norms[:, 0] == 0.0
    return g / norms


def sample_canonical(kind, count, rng=None):
    """Draw ``count`` i.i.d. uniform points from the canonical set ``kind``.

    Ball interiors use a Gaussian direction scaled by ``u ** (1/d)``, the
    sphere surface a normalised Gaussian, and the cube ``[-1, 1]^3``
    independent uniforms.
    """
    if kind not in SAMPLER_DIMS:
        raise ValueError(f"unknown sampler kind {kind!r}; choose from {SAMPLER_KINDS}")
    count = int(count)
    if count < 1:
        raise ValueError("count must be positive")
    rng = check_random_state(rng)
    dim = SAMPLER_DIMS[kind]
    if kind == "cube3_interior":
        return rng.uniform(-1.0, 1.0, size=(count, dim))
    dirs = _unit_directions(rng, count, dim)
    if kind == "sphere3_surface":
        return dirs
    radii = rng.random(count) ** (1.0 / dim)
    return dirs * radii[:, None]


@dataclass(frozen=True)
class CanonicalSampler:
    kind: str = "ball3_interior"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SAMPLER_DIMS:
            raise ValueError(f"unknown sampler kind {self.kind!r}")

    @property
    def dim(self):
        return SAMPLER_DIMS[self.kind]

    def sample(self, count) -> PointCloud:
        pts = sample_canonical(self.kind, count, np.random.default_rng(self.seed))
        return PointCloud(pts, label=f"{self.kind}:seed={self.seed}")


def sample(sampler: CanonicalSampler, count) -> PointCloud:
    return sampler.sample(count)
