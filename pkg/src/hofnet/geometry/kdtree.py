"""Exact nearest-neighbour search: a bucketed, median-split k-d tree and a
chunked brute-force scan.

Both backends compute squared distances with the same arithmetic (a
per-axis sum in fixed axis order) and break ties towards the lowest point
index, so their answers agree bit for bit.
"""
import numpy as np

from ..utils.validation import check_points

BACKENDS = ("kdtree", "brute", "auto")

_BRUTE_CHUNK_ELEMS = 1 << 20


def _pairwise_sq(q, p):
    """Squared distances between rows of q (m, c) and p (n, c) -> (m, n)."""
    d = q[:, None, 0] - p[None, :, 0]
    out = d * d
    for axis in range(1, q.shape[1]):
        d = q[:, None, axis] - p[None, :, axis]
        out += d * d
    return out


def _box_sq(q, lo, hi):
    """Squared distance from each row of q to the box [lo, hi]; never exceeds
    the distance to any point inside the box, even in floating point."""
    out = np.zeros(q.shape[0])
    for axis in range(q.shape[1]):
        below = lo[axis] - q[:, axis]
        above = q[:, axis] - hi[axis]
        c = np.maximum(np.maximum(below, above), 0.0)
        out += c * c
    return out


class KDTree:
    """Balanced k-d tree with leaf buckets.

    Internal nodes store a split axis and split value; leaves hold a run of
    point ids (ascending) in ``self.order``. Every node keeps the bounding
    box of its points for pruning.
    """

    def __init__(self, points, leaf_size=16):
        self.data = check_points(points)
        self.n, self.dim = self.data.shape
        self.leaf_size = max(1, int(leaf_size))
        self.order = np.arange(self.n)
        self.split_dim, self.split_value = [], []
        self.left, self.right = [], []
        self.start, self.end = [], []
        self.lo, self.hi = [], []
        self.root = self._build(0, self.n)
        self.split_dim = np.asarray(self.split_dim)
        self.split_value = np.asarray(self.split_value)
        self.left = np.asarray(self.left)
        self.right = np.asarray(self.right)
        self.lo = np.asarray(self.lo)
        self.hi = np.asarray(self.hi)

    def _new_node(self, start, end):
        pts = self.data[self.order[start:end]]
        self.lo.append(pts.min(axis=0))
        self.hi.append(pts.max(axis=0))
        self.start.append(start)
        self.end.append(end)
        self.split_dim.append(-1)
        self.split_value.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        return len(self.start) - 1

    def _build(self, start, end):
        node = self._new_node(start, end)
        if end - start <= self.leaf_size:
            self.order[start:end] = np.sort(self.order[start:end])
            return node
        ids = self.order[start:end]
        axis = int(np.argmax(self.hi[node] - self.lo[node]))
        mid = (end - start) // 2
        part = np.argpartition(self.data[ids, axis], mid, kind="introselect")
        self.order[start:end] = ids[part]
        self.split_dim[node] = axis
        self.split_value[node] = float(self.data[self.order[start + mid], axis])
        self.left[node] = self._build(start, start + mid)
        self.right[node] = self._build(start + mid, end)
        return node

    def _is_leaf(self, node):
        return self.left[node] < 0

    def _scan(self, node, qidx, queries, best, best_id):
        ids = self.order[self.start[node]:self.end[node]]
        d2 = _pairwise_sq(queries[qidx], self.data[ids])
        j = np.argmin(d2, axis=1)
        dmin = d2[np.arange(len(qidx)), j]
        cand = ids[j]
        cur, cur_id = best[qidx], best_id[qidx]
        better = (dmin < cur) | ((dmin == cur) & (cand < cur_id))
        best[qidx[better]] = dmin[better]
        best_id[qidx[better]] = cand[better]

    def _home_leaves(self, queries):
        node = np.zeros(len(queries), dtype=np.intp)
        while True:
            inner = self.left[node] >= 0
            if not inner.any():
                return node
            sel = np.nonzero(inner)[0]
            nd = node[sel]
            go_left = queries[sel, self.split_dim[nd]] < self.split_value[nd]
            node[sel] = np.where(go_left, self.left[nd], self.right[nd])

    def query(self, queries):
        """Nearest point for each query row. Returns ``(sq_dists, indices)``."""
        queries = check_points(queries, dim=self.dim, name="queries")
        m = len(queries)
        best = np.full(m, np.inf)
        best_id = np.full(m, self.n, dtype=np.intp)

        home = self._home_leaves(queries)
        for leaf in np.unique(home):
            self._scan(leaf, np.nonzero(home == leaf)[0], queries, best, best_id)

        stack = [(self.root, np.arange(m))]
        while stack:
            node, qidx = stack.pop()
            box = _box_sq(queries[qidx], self.lo[node], self.hi[node])
            qidx = qidx[box <= best[qidx]]
            if qidx.size == 0:
                continue
            if self._is_leaf(node):
                qidx = qidx[home[qidx] != node]
                if qidx.size:
                    self._scan(node, qidx, queries, best, best_id)
            else:
                stack.append((self.right[node], qidx))
                stack.append((self.left[node], qidx))
        return best, best_id

    def nearest(self, point):
        """Index and squared distance of the nearest point to a single query."""
        d2, idx = self.query(np.asarray(point, dtype=np.float64).reshape(1, -1))
        return int(idx[0]), float(d2[0])


def brute_force_nn(queries, points):
    """Exhaustive nearest neighbour; same return convention as ``KDTree.query``."""
    points = check_points(points)
    queries = check_points(queries, dim=points.shape[1], name="queries")
    m = len(queries)
    best = np.empty(m)
    best_id = np.empty(m, dtype=np.intp)
    chunk = max(1, _BRUTE_CHUNK_ELEMS // max(1, len(points)))
    for s in range(0, m, chunk):
        d2 = _pairwise_sq(queries[s:s + chunk], points)
        j = np.argmin(d2, axis=1)
        best_id[s:s + chunk] = j
        best[s:s + chunk] = d2[np.arange(len(j)), j]
    return best, best_id


def nearest_neighbors(queries, points, backend="auto", tree=None):
    """Nearest neighbour in ``points`` for each query row.

    ``backend="auto"`` uses the k-d tree once the pairwise work gets large.
    A prebuilt ``tree`` over ``points`` may be passed to skip construction.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if tree is not None:
        return tree.query(queries)
    if backend == "auto":
        work = len(getattr(queries, "points", queries)) * len(getattr(points, "points", points))
        backend = "kdtree" if work > 4_000_000 else "brute"
    if backend == "brute":
        return brute_force_nn(queries, points)
    return KDTree(points).query(queries)
