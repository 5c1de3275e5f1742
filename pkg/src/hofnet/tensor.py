"""Dense float64 arrays with define-by-run reverse-mode autodiff, plus Adam.

A :class:`Tape` records every operation applied to its :class:`Node` values.
Calling :func:`backward` on a scalar node walks the tape in reverse id order
and returns the gradient of that scalar with respect to every leaf.

    >>> tape = Tape()
    >>> x = tape.leaf([1.0, 2.0])
    >>> grads = backward(tape, sq_norm(x))
    >>> grads[x.id]
    array([2., 4.])

The ReLU derivative at exactly zero is taken to be 0.
"""
from __future__ import annotations

import contextvars
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import NonFiniteError, ShapeError

__all__ = [
    "OPS",
    "AdamState",
    "Node",
    "Tape",
    "adam_step",
    "backward",
    "forward_op",
]

_active_tape: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "hofnet_active_tape", default=None
)


def as_array(value) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("array contains NaN or infinite values")
    arr.setflags(write=False)
    return arr


class Node:
    """A value recorded on a tape. Treat ``value`` as immutable."""

    __slots__ = ("tape", "id", "value", "kind", "parents", "attrs")

    def __init__(self, tape, id_, value, kind, parents=(), attrs=None):
        self.tape = tape
        self.id = id_
        self.value = value
        self.kind = kind
        self.parents = parents
        self.attrs = attrs or {}

    @property
    def shape(self):
        return self.value.shape

    @property
    def is_leaf(self):
        return self.kind == "leaf"

    def __repr__(self):
        return f"Node(id={self.id}, kind={self.kind!r}, shape={self.shape})"

    def __add__(self, other):
        return forward_op("add", self, other)

    def __radd__(self, other):
        return forward_op("add", other, self)

    def __sub__(self, other):
        return forward_op("sub", self, other)

    def __rsub__(self, other):
        return forward_op("sub", other, self)

    def __matmul__(self, other):
        return forward_op("matmul", self, other)

    def __rmatmul__(self, other):
        return forward_op("matmul", other, self)

    def __mul__(self, factor):
        if isinstance(factor, Node):
            return NotImplemented
        return forward_op("scale", self, factor=factor)

    __rmul__ = __mul__

    def __neg__(self):
        return forward_op("scale", self, factor=-1.0)


class Tape:
    """Append-only record of operations. Single owner; rebuild per step."""

    def __init__(self):
        self.nodes: list[Node] = []
        self._token = None

    def __enter__(self):
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc):
        _active_tape.reset(self._token)
        self._token = None
        return False

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value) -> Node:
        return self._append(as_array(value), "leaf")

    def leaves(self):
        return [n for n in self.nodes if n.is_leaf]

    def _append(self, value, kind, parents=(), attrs=None):
        node = Node(self, len(self.nodes), value, kind, parents, attrs)
        self.nodes.append(node)
        return node

    def op(self, kind, *operands, **attrs) -> Node:
        if kind not in OPS:
            raise ValueError(f"unknown op kind {kind!r}")
        nodes = tuple(self._lift(o) for o in operands)
        fwd, _ = OPS[kind]
        with np.errstate(over="ignore", invalid="ignore"):
            value = np.asarray(fwd(*(n.value for n in nodes), **attrs), dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"{kind} produced non-finite output")
        value.setflags(write=False)
        return self._append(value, kind, tuple(n.id for n in nodes), attrs)

    def _lift(self, operand):
        if isinstance(operand, Node):
            if operand.tape is not self:
                raise ValueError("operand belongs to a different tape")
            return operand
        return self.leaf(operand)


def forward_op(kind: str, *operands, **attrs) -> Node:
    """Apply ``kind`` to ``operands`` and record it.

    The tape is taken from the first :class:`Node` operand, falling back to
    the tape activated with ``with Tape():``. Raw arrays become leaves.
    """
    tape = next((o.tape for o in operands if isinstance(o, Node)), None)
    if tape is None:
        tape = _active_tape.get()
    if tape is None:
        raise RuntimeError("forward_op needs a Node operand or an active Tape")
    return tape.op(kind, *operands, **attrs)


def backward(tape: Tape, loss: Node) -> dict[int, np.ndarray]:
    """Gradient of scalar ``loss`` with respect to every leaf on ``tape``.

    Leaves that do not feed into ``loss`` get exact zeros.
    """
    if loss.tape is not tape:
        raise ValueError("loss node is not on this tape")
    if loss.value.size != 1:
        raise ShapeError(f"loss must be scalar, got shape {loss.shape}")

    grads: dict[int, np.ndarray] = {loss.id: np.ones_like(loss.value)}
    for node in reversed(tape.nodes[: loss.id + 1]):
        g = grads.get(node.id)
        if g is None or node.is_leaf:
            continue
        _, bwd = OPS[node.kind]
        operands = [tape.nodes[p].value for p in node.parents]
        contributions = bwd(g, node.value, *operands, **node.attrs)
        for pid, operand, contrib in zip(node.parents, operands, contributions):
            if contrib is None:
                continue
            buf = grads.get(pid)
            if buf is None:
                buf = grads[pid] = np.zeros_like(operand)
            if isinstance(contrib, _Partial):
                buf[contrib.index] += contrib.grad
            else:
                buf += contrib
        if node.id != loss.id:
            del grads[node.id]

    return {
        n.id: grads.get(n.id, np.zeros_like(n.value))
        for n in tape.nodes
        if n.is_leaf
    }


# ---------------------------------------------------------------- op rules


@dataclass
class _Partial:
    """Gradient for a sub-region of an operand (slices, gathers)."""

    index: object
    grad: np.ndarray


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a, b):
    try:
        out = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"cannot combine shapes {a.shape} and {b.shape}") from None
    if out != a.shape and out != b.shape:
        raise ShapeError(f"cannot combine shapes {a.shape} and {b.shape}")


def _add(a, b):
    _check_broadcast(a, b)
    return a + b


def _add_bwd(g, out, a, b):
    return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


def _sub(a, b):
    _check_broadcast(a, b)
    return a - b


def _sub_bwd(g, out, a, b):
    return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)


def _as_2d(a, b):
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ShapeError(f"matmul supports 1-D and 2-D operands, got {a.shape} @ {b.shape}")
    a2 = a if a.ndim == 2 else a[None, :]
    b2 = b if b.ndim == 2 else b[:, None]
    if a2.shape[1] != b2.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    return a2, b2


def _matmul(a, b):
    _as_2d(a, b)
    return a @ b


def _matmul_bwd(g, out, a, b):
    a2, b2 = _as_2d(a, b)
    g2 = g.reshape(a2.shape[0], b2.shape[1])
    return (g2 @ b2.T).reshape(a.shape), (a2.T @ g2).reshape(b.shape)


def _relu(a):
    return np.maximum(a, 0.0)


def _relu_bwd(g, out, a):
    return (g * (a > 0.0),)


def _tanh(a):
    return np.tanh(a)


def _tanh_bwd(g, out, a):
    return (g * (1.0 - out * out),)


def _scale(a, factor):
    return a * float(factor)


def _scale_bwd(g, out, a, factor):
    return (g * float(factor),)


def _reduce_mean(a):
    return np.asarray(a.mean())


def _reduce_mean_bwd(g, out, a):
    return (np.full(a.shape, float(g) / a.size),)


def _sq_norm(a):
    return np.asarray(np.dot(a.ravel(), a.ravel()))


def _sq_norm_bwd(g, out, a):
    return (2.0 * float(g) * a,)


def _slice(a, start, stop):
    if a.ndim != 1 or not 0 <= start <= stop <= a.shape[0]:
        raise ShapeError(f"bad slice [{start}:{stop}] of shape {a.shape}")
    return a[start:stop]


def _slice_bwd(g, out, a, start, stop):
    return (_Partial(slice(start, stop), g),)


def _reshape(a, shape):
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"cannot reshape {a.shape} to {tuple(shape)}")
    return a.reshape(shape)


def _reshape_bwd(g, out, a, shape):
    return (g.reshape(a.shape),)


def _gather(a, index):
    index = np.asarray(index)
    if a.ndim < 1 or index.size and (index.min() < 0 or index.max() >= a.shape[0]):
        raise ShapeError("gather index out of range")
    return a[index]


def _gather_bwd(g, out, a, index):
    buf = np.zeros_like(a)
    np.add.at(buf, np.asarray(index), g)
    return (buf,)


def _concat(a, b):
    # b may be 1-D, in which case it is repeated for every row of a
    if b.ndim == 1 and a.ndim == 2:
        b = np.broadcast_to(b, (a.shape[0], b.shape[0]))
    if a.ndim != b.ndim or a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(f"cannot concatenate {a.shape} with {b.shape}")
    return np.concatenate([a, b], axis=-1)


def _concat_bwd(g, out, a, b):
    ga = g[..., : a.shape[-1]]
    gb = g[..., a.shape[-1]:]
    if b.ndim == 1 and a.ndim == 2:
        gb = gb.sum(axis=0)
    return ga, gb


OPS = {
    "add": (_add, _add_bwd),
    "sub": (_sub, _sub_bwd),
    "matmul": (_matmul, _matmul_bwd),
    "relu": (_relu, _relu_bwd),
    "tanh": (_tanh, _tanh_bwd),
    "scale": (_scale, _scale_bwd),
    "reduce_mean": (_reduce_mean, _reduce_mean_bwd),
    "sq_norm": (_sq_norm, _sq_norm_bwd),
    "slice": (_slice, _slice_bwd),
    "reshape": (_reshape, _reshape_bwd),
    "gather": (_gather, _gather_bwd),
    "concat": (_concat, _concat_bwd),
}


def _unary(kind):
    def op(a, **attrs):
        return forward_op(kind, a, **attrs)

    op.__name__ = kind
    op.__doc__ = f"Record ``{kind}`` on the operand's tape."
    return op


relu = _unary("relu")
tanh = _unary("tanh")
reduce_mean = _unary("reduce_mean")
sq_norm = _unary("sq_norm")


def matmul(a, b):
    return forward_op("matmul", a, b)


def add(a, b):
    return forward_op("add", a, b)


def sub(a, b):
    return forward_op("sub", a, b)


def scale(a, factor):
    return forward_op("scale", a, factor=float(factor))


def slice_(a, start, stop):
    return forward_op("slice", a, start=int(start), stop=int(stop))


def reshape(a, shape):
    return forward_op("reshape", a, shape=tuple(int(s) for s in shape))


def gather(a, index):
    return forward_op("gather", a, index=np.asarray(index, dtype=np.intp))


def concat(a, b):
    return forward_op("concat", a, b)


ACTIVATIONS = {"relu": relu, "tanh": tanh}


# ---------------------------------------------------------------- Adam


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, shape, **hyper) -> "AdamState":
        return cls(m=np.zeros(shape), v=np.zeros(shape), **hyper)


def adam_step(state: AdamState, params, grads) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if not (params.shape == grads.shape == state.m.shape == state.v.shape):
        raise ShapeError(
            f"adam shapes differ: params {params.shape}, grads {grads.shape}, "
            f"m {state.m.shape}, v {state.v.shape}"
        )
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * (grads * grads)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, step=t)
