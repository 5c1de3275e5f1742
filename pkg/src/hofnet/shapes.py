"""Synthetic solids with surface samples and orthographic silhouettes.

Each primitive is a solid ``{p : gauge(p) <= 1}`` in its own frame, so its
surface is the level set ``gauge == 1``:

* ellipsoid, semi-axes (a, b, c):  sqrt((x/a)^2 + (y/b)^2 + (z/c)^2)
* box, half-extents (a, b, c):     max(|x|/a, |y|/b, |z|/c)
* cylinder along z, radius r and half-height h: max(rho/r, |z|/h)

Silhouettes look down the world z axis onto a pixel grid spanning
[-1, 1]^2; row 0 is y = +1, column 0 is x = -1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import FormatError
from .geometry.pointcloud import PointCloud

SHAPE_KINDS = ("ellipsoid", "box", "cylinder", "two_primitive_union")
_FIT_RADIUS = 0.9


@dataclass(frozen=True)
class Primitive:
    kind: str
    dims: tuple
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def gauge(self, p):
        """Gauge of points given in this primitive's local frame."""
        d = np.asarray(self.dims, dtype=np.float64)
        if self.kind == "ellipsoid":
            return np.sqrt(np.sum((p / d) ** 2, axis=1))
        if self.kind == "box":
            return np.max(np.abs(p) / d, axis=1)
        if self.kind == "cylinder":
            r, h = d
            return np.maximum(np.hypot(p[:, 0], p[:, 1]) / r, np.abs(p[:, 2]) / h)
        raise ValueError(self.kind)

    def area(self):
        d = self.dims
        if self.kind == "ellipsoid":
            a, b, c = d
            q = 1.6075  # Knud Thomsen's approximation, within ~1.1%
            return 4 * np.pi * (((a * b) ** q + (a * c) ** q + (b * c) ** q) / 3) ** (1 / q)
        if self.kind == "box":
            a, b, c = d
            return 8.0 * (a * b + a * c + b * c)
        r, h = d
        return 2 * np.pi * r * 2 * h + 2 * np.pi * r * r

    def bounding_radius(self):
        d = self.dims
        if self.kind == "ellipsoid":
            return max(d)
        if self.kind == "box":
            return float(np.linalg.norm(d))
        return float(np.hypot(*d))

    def sample_local(self, count, rng):
        """``count`` points uniform by area on the surface, local frame."""
        if self.kind == "ellipsoid":
            return _ellipsoid_surface(np.asarray(self.dims), count, rng)
        if self.kind == "box":
            return _box_surface(np.asarray(self.dims), count, rng)
        return _cylinder_surface(*self.dims, count, rng)

    def hit(self, origin, direction):
        """Whether lines ``origin + s * direction`` (local frame) meet the solid."""
        o, dvec = origin, direction
        d = np.asarray(self.dims, dtype=np.float64)
        if self.kind == "ellipsoid":
            os_, ds = o / d, dvec / d
            qa = ds @ ds
            qb = 2 * os_ @ ds
            qc = np.sum(os_ * os_, axis=1) - 1.0
            return qb * qb - 4 * qa * qc >= 0
        if self.kind == "box":
            lo, hi = _slabs(o, dvec, d)
            return lo <= hi
        r, h = d
        lo, hi = _slabs(o[:, 2:], dvec[2:], np.array([h]))
        dxy = dvec[:2]
        qa = dxy @ dxy
        oxy = o[:, :2]
        if qa < 1e-15:
            inside = np.sum(oxy * oxy, axis=1) <= r * r
            return inside & (lo <= hi)
        qb = 2 * oxy @ dxy
        qc = np.sum(oxy * oxy, axis=1) - r * r
        disc = qb * qb - 4 * qa * qc
        root = np.sqrt(np.maximum(disc, 0.0))
        s0, s1 = (-qb - root) / (2 * qa), (-qb + root) / (2 * qa)
        return (disc >= 0) & (np.maximum(lo, s0) <= np.minimum(hi, s1))


def _slabs(o, dvec, half):
    lo = np.full(o.shape[0], -np.inf)
    hi = np.full(o.shape[0], np.inf)
    for axis in range(len(half)):
        if abs(dvec[axis]) < 1e-15:
            outside = np.abs(o[:, axis]) > half[axis]
            lo = np.where(outside, np.inf, lo)
            continue
        t1 = (-half[axis] - o[:, axis]) / dvec[axis]
        t2 = (half[axis] - o[:, axis]) / dvec[axis]
        lo = np.maximum(lo, np.minimum(t1, t2))
        hi = np.minimum(hi, np.maximum(t1, t2))
    return lo, hi


def _ellipsoid_surface(axes, count, rng):
    # rejection on the sphere, weighting by the local area stretch
    a, b, c = axes
    g_max = max(b * c, a * c, a * b)
    out = []
    need = count
    while need > 0:
        u = rng.standard_normal((2 * need + 16, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        g = np.sqrt((b * c * u[:, 0]) ** 2 + (a * c * u[:, 1]) ** 2 + (a * b * u[:, 2]) ** 2)
        keep = u[rng.random(len(u)) * g_max < g][:need]
        out.append(keep)
        need -= len(keep)
    return np.concatenate(out) * axes


def _box_surface(half, count, rng):
    a, b, c = half
    areas = np.array([b * c, b * c, a * c, a * c, a * b, a * b])
    face = rng.choice(6, size=count, p=areas / areas.sum())
    pts = rng.uniform(-1.0, 1.0, size=(count, 3)) * half
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    pts[np.arange(count), axis] = sign * half[axis]
    return pts


def _cylinder_surface(r, h, count, rng):
    lateral, cap = 2 * np.pi * r * 2 * h, np.pi * r * r
    part = rng.choice(3, size=count, p=np.array([lateral, cap, cap]) / (lateral + 2 * cap))
    theta = rng.uniform(0, 2 * np.pi, count)
    rho = np.where(part == 0, r, r * np.sqrt(rng.random(count)))
    z = np.where(part == 0, rng.uniform(-h, h, count), np.where(part == 1, h, -h))
    return np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])


def random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@dataclass(frozen=True)
class SynthShape:
    """One or two primitives under a global rotation + translation."""

    kind: str
    primitives: tuple
    rotation: np.ndarray
    translation: np.ndarray
    seed: int | None = None

    def _world(self, prim):
        R = self.rotation @ prim.rotation
        t = self.rotation @ prim.translation + self.translation
        return R, t

    def sample_surface(self, count, rng, posed=True):
        """Area-uniform surface samples of the (union) solid."""
        if len(self.primitives) == 1:
            prim = self.primitives[0]
            pts = prim.sample_local(count, rng) @ prim.rotation.T + prim.translation
        else:
            pts = self._sample_union(count, rng)
        return pts @ self.rotation.T + self.translation if posed else pts

    def _sample_union(self, count, rng):
        areas = np.array([p.area() for p in self.primitives])
        chunks, have = [], 0
        while have < count:
            batch = 2 * (count - have) + 32
            which = rng.choice(len(areas), size=batch, p=areas / areas.sum())
            for i, prim in enumerate(self.primitives):
                n_i = int(np.sum(which == i))
                if n_i == 0:
                    continue
                local = prim.sample_local(n_i, rng)
                shape_pts = local @ prim.rotation.T + prim.translation
                keep = np.ones(n_i, dtype=bool)
                for j, other in enumerate(self.primitives):
                    if j != i:
                        keep &= other.gauge(self.to_local(other, shape_pts)) >= 1.0
                chunks.append(shape_pts[keep])
                have += int(keep.sum())
        pts = np.concatenate(chunks)
        return pts[rng.permutation(len(pts))[:count]]

    @staticmethod
    def to_local(prim, shape_pts):
        return (shape_pts - prim.translation) @ prim.rotation

    def surface_residual(self, shape_pts):
        """Distance of each unposed point's gauge from 1 on the nearest-fitting
        primitive surface (0 means exactly on some primitive's surface)."""
        res = np.full(len(shape_pts), np.inf)
        for prim in self.primitives:
            g = prim.gauge(self.to_local(prim, shape_pts))
            res = np.minimum(res, np.abs(g - 1.0))
        return res

    def silhouette(self, size=32):
        centers = -1.0 + (np.arange(size) + 0.5) * (2.0 / size)
        xs, ys = np.meshgrid(centers, centers[::-1])
        origins = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(size * size)])
        hit = np.zeros(size * size, dtype=bool)
        for prim in self.primitives:
            R, t = self._world(prim)
            o = (origins - t) @ R
            d = np.array([0.0, 0.0, 1.0]) @ R
            hit |= prim.hit(o, d)
        return hit.reshape(size, size).astype(np.float64)


def make_shape(kind, rng, posed=True) -> SynthShape:
    if kind not in SHAPE_KINDS:
        raise ValueError(f"unknown shape kind {kind!r}")
    if kind == "ellipsoid":
        prims = [Primitive("ellipsoid", tuple(rng.uniform(0.25, 0.7, 3)))]
    elif kind == "box":
        prims = [Primitive("box", tuple(rng.uniform(0.15, 0.5, 3)))]
    elif kind == "cylinder":
        prims = [Primitive("cylinder", (rng.uniform(0.15, 0.45), rng.uniform(0.2, 0.6)))]
    else:
        prims = []
        for sub in rng.choice(["ellipsoid", "box", "cylinder"], size=2):
            dims = rng.uniform(0.15, 0.4, 2 if sub == "cylinder" else 3)
            prims.append(Primitive(str(sub), tuple(dims), random_rotation(rng), rng.uniform(-0.25, 0.25, 3)))
    radius = max(np.linalg.norm(p.translation) + p.bounding_radius() for p in prims)
    if radius > _FIT_RADIUS:
        s = _FIT_RADIUS / radius
        prims = [Primitive(p.kind, tuple(np.asarray(p.dims) * s), p.rotation, p.translation * s) for p in prims]
        radius = _FIT_RADIUS
    if posed:
        rotation = random_rotation(rng)
        slack = min(0.1, 0.95 - radius)
        translation = rng.uniform(-slack, slack, 3)
    else:
        rotation, translation = np.eye(3), np.zeros(3)
    return SynthShape(kind, tuple(prims), rotation, translation)


@dataclass(frozen=True, eq=False)
class Sample:
    observation: np.ndarray
    gt: PointCloud
    shape: SynthShape


def gen_dataset(count, seed, n_points=2000, raster_size=32, kinds=SHAPE_KINDS):
    """``count`` (silhouette, surface cloud) pairs, deterministic in ``seed``.

    Shape ``i`` has kind ``kinds[i % len(kinds)]`` and depends only on
    ``seed`` and ``i``, so a longer dataset extends a shorter one.
    """
    count = int(count)
    if count < 1:
        raise ValueError("count must be positive")
    children = np.random.SeedSequence(int(seed)).spawn(count)
    out = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        shape = make_shape(kinds[i % len(kinds)], rng)
        shape = SynthShape(shape.kind, shape.primitives, shape.rotation, shape.translation, seed=int(seed))
        gt = PointCloud(shape.sample_surface(n_points, rng), label=f"{shape.kind}-{i}")
        out.append(Sample(shape.silhouette(raster_size), gt, shape))
    return out


def format_raster(raster):
    raster = np.asarray(raster, dtype=np.float64)
    return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in raster) + "\n"


def parse_raster(text):
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([float(t) for t in line.split()])
        except ValueError:
            raise FormatError(f"bad raster row {line[:40]!r}") from None
    if not rows or len({len(r) for r in rows}) != 1 or len(rows) != len(rows[0]):
        raise FormatError("raster must be a nonempty square grid of numbers")
    arr = np.array(rows)
    if np.any((arr < 0) | (arr > 1)):
        raise FormatError("raster values must lie in [0, 1]")
    return arr
