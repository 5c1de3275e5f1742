"""Shared oracles for the test modules: random op graphs, central finite
differences, and small brute-force reference implementations."""
import heapq

import numpy as np

from hofnet import tensor as T
from hofnet.funcnets import EncoderNet, MlpSpec, encoder_forward, mapping_forward
from hofnet.training import loss_and_grad, record_loss

KINK_MARGIN = 1e-4
FD_STEP = 1e-5


def near_kink(tape, margin=KINK_MARGIN):
    """True if any recorded relu input lies within ``margin`` of zero."""
    for node in tape.nodes:
        if node.kind == "relu":
            if np.min(np.abs(tape.nodes[node.parents[0]].value)) < margin:
                return True
    return False


def random_graph(rng, max_depth=6, max_dim=8):
    """A random op graph as (leaf_values, build). ``build(tape, leaves)``
    records the graph on ``tape`` and returns the scalar loss node."""
    rows = int(rng.integers(1, max_dim + 1))
    cols = int(rng.integers(1, max_dim + 1))
    values = [rng.standard_normal((rows, cols))]
    steps = []
    shape = (rows, cols)
    for _ in range(int(rng.integers(1, max_depth + 1))):
        kind = rng.choice(["matmul", "add", "bias", "sub", "relu", "tanh", "scale", "skip", "reshape", "gather"])
        if kind == "matmul":
            out = int(rng.integers(1, max_dim + 1))
            values.append(rng.standard_normal((shape[1], out)) / np.sqrt(shape[1]))
            steps.append(("matmul", len(values) - 1))
            shape = (shape[0], out)
        elif kind in ("add", "sub"):
            values.append(rng.standard_normal(shape))
            steps.append((kind, len(values) - 1))
        elif kind == "bias":
            values.append(rng.standard_normal(shape[1]))
            steps.append(("add", len(values) - 1))
        elif kind == "scale":
            steps.append(("scale", float(rng.uniform(-2, 2))))
        elif kind == "reshape":
            steps.append(("reshape", (shape[1], shape[0])))
            shape = (shape[1], shape[0])
        elif kind == "gather":
            idx = rng.integers(0, shape[0], size=int(rng.integers(1, max_dim + 1)))
            steps.append(("gather", idx))
            shape = (len(idx), shape[1])
        elif kind == "skip":
            # reuse the graph input when shapes allow it (fan-out)
            steps.append(("skip", None) if shape == (rows, cols) else ("tanh", None))
        else:
            steps.append((kind, None))
    final = rng.choice(["sq_norm", "reduce_mean"])

    def build(tape, leaves):
        h = leaves[0]
        for kind, arg in steps:
            if kind in ("matmul", "add", "sub"):
                h = tape.op(kind, h, leaves[arg])
            elif kind == "scale":
                h = T.scale(h, arg)
            elif kind == "reshape":
                h = T.reshape(h, arg)
            elif kind == "gather":
                h = T.gather(h, arg)
            elif kind == "skip":
                h = T.add(h, leaves[0])
            else:
                h = tape.op(kind, h)
        return tape.op(final, h)

    return values, build


def evaluate(values, build):
    tape = T.Tape()
    leaves = [tape.leaf(v) for v in values]
    loss = build(tape, leaves)
    return tape, leaves, loss


def fd_gradient(fn, x, h=FD_STEP, coords=None):
    """Central differences of scalar ``fn`` at ``x`` (flattened coords)."""
    x = np.array(x, dtype=np.float64)
    flat = x.ravel()
    coords = range(flat.size) if coords is None else coords
    out = np.zeros(len(coords))
    for j, i in enumerate(coords):
        orig = flat[i]
        flat[i] = orig + h
        up = fn(x)
        flat[i] = orig - h
        down = fn(x)
        flat[i] = orig
        out[j] = (up - down) / (2 * h)
    return out


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-8)
    return float(np.linalg.norm(a - b) / scale)


def graph_gradient_error(values, build):
    """Worst relative error between autodiff and finite differences over all
    leaves, or ``None`` if the graph sits near a relu kink."""
    tape, leaves, loss = evaluate(values, build)
    if near_kink(tape):
        return None
    grads = T.backward(tape, loss)
    worst = 0.0
    for i, leaf in enumerate(leaves):
        def f(v, i=i):
            vals = list(values)
            vals[i] = v
            return float(evaluate(vals, build)[2].value)
        worst = max(worst, rel_err(grads[leaf.id], fd_gradient(f, values[i])))
    return worst


def dijkstra_length(occupied, start, goal):
    """Plain Dijkstra over 6-connected free voxels; ``None`` if unreachable."""
    n = occupied.shape[0]
    dist = {start: 0}
    heap = [(0, start)]
    while heap:
        d, p = heapq.heappop(heap)
        if p == goal:
            return d
        if d > dist[p]:
            continue
        for axis in range(3):
            for s in (-1, 1):
                q = list(p)
                q[axis] += s
                q = tuple(q)
                if all(0 <= c < n for c in q) and not occupied[q] and d + 1 < dist.get(q, np.inf):
                    dist[q] = d + 1
                    heapq.heappush(heap, (d + 1, q))
    return None


def nn_margin(a, b):
    """Smallest gap between the nearest and second-nearest squared distance
    from rows of ``a`` to rows of ``b``."""
    d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    if d.shape[1] < 2:
        return np.inf
    part = np.sort(d, axis=1)
    return float(np.min(part[:, 1] - part[:, 0]))


def stack_gradient_error(seed, n_coords=60):
    """Relative FD error of dLoss/dphi on a tiny encoder -> decoder -> Chamfer
    stack (4x4 raster, decoder [3,4,3], 8 canonical and 8 gt points).

    Returns ``None`` for kink-adjacent or tie-adjacent draws.
    """
    rng = np.random.default_rng(seed)
    dec = MlpSpec((3, 4, 3))
    enc = EncoderNet.create(16, (8,), dec, rng=rng, final_scale=1.0)
    obs = (rng.uniform(0, 1, 16) > 0.5).astype(float)
    gt = rng.uniform(-0.5, 0.5, (8, 3))
    canon = rng.standard_normal((8, 3))
    canon /= np.linalg.norm(canon, axis=1, keepdims=True)

    tape = T.Tape()
    loss, _, _ = record_loss(enc, tape.leaf(enc.phi.theta), obs, gt, canon, k=1)
    if near_kink(tape):
        return None
    pred = mapping_forward(encoder_forward(enc, obs), canon)
    if min(nn_margin(pred, gt), nn_margin(gt, pred)) < 1e-4:
        return None

    _, grad = loss_and_grad(enc, obs, gt, canon)
    coords = rng.choice(grad.size, size=min(n_coords, grad.size), replace=False)
    fd = fd_gradient(lambda p: loss_and_grad(enc.with_phi(p), obs, gt, canon)[0].loss,
                     enc.phi.theta, coords=coords)
    return rel_err(grad[coords], fd)
