"""Mapping networks with externally supplied weights, the encoder that emits
them, and latent-vector-concatenation (LVC) decoders.

Parameter layout: a flat vector holds ``W_1, b_1, ..., W_L, b_L`` in layer
order. ``W_i`` has shape ``(n_{i-1}, n_i)`` stored row-major, so a layer is
``h @ W + b``. Hidden layers use the spec's activation; the output layer is
affine.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .exceptions import PreconditionError, ShapeError, SpecError
from .utils.validation import check_points, check_random_state, check_vector

ACTIVATION_CODES = {"relu": 0, "tanh": 1}


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple
    activation: str = "relu"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise SpecError(f"need at least two positive layer sizes, got {sizes}")
        if self.activation not in ACTIVATION_CODES:
            raise SpecError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_in(self):
        return self.layer_sizes[0]

    @property
    def n_out(self):
        return self.layer_sizes[-1]

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    def layer_shapes(self):
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))


HOF1 = MlpSpec((3, 1024, 3))
HOF3 = MlpSpec((3, 128, 128, 128, 3))


def count_params(spec: MlpSpec) -> int:
    return sum((n_in + 1) * n_out for n_in, n_out in spec.layer_shapes())


@dataclass(frozen=True, eq=False)
class FlatParams:
    spec: MlpSpec
    theta: np.ndarray

    def __post_init__(self):
        theta = check_vector(self.theta, name="theta").copy()
        if theta.shape[0] != count_params(self.spec):
            raise ShapeError(
                f"theta has {theta.shape[0]} entries, spec needs {count_params(self.spec)}"
            )
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def pack(cls, spec: MlpSpec, layers) -> "FlatParams":
        """Build from a list of ``(W, b)`` pairs."""
        layers = list(layers)
        if len(layers) != spec.n_layers:
            raise ShapeError(f"expected {spec.n_layers} layers, got {len(layers)}")
        chunks = []
        for (n_in, n_out), (W, b) in zip(spec.layer_shapes(), layers):
            W = np.asarray(W, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if W.shape != (n_in, n_out) or b.shape != (n_out,):
                raise ShapeError(f"layer shapes {W.shape}, {b.shape} != {(n_in, n_out)}")
            chunks += [W.ravel(), b]
        return cls(spec, np.concatenate(chunks))

    def unpack(self):
        layers, offset = [], 0
        for n_in, n_out in self.spec.layer_shapes():
            W = self.theta[offset:offset + n_in * n_out].reshape(n_in, n_out)
            offset += n_in * n_out
            b = self.theta[offset:offset + n_out]
            offset += n_out
            layers.append((W, b))
        return layers

    def __eq__(self, other):
        return (
            isinstance(other, FlatParams)
            and self.spec == other.spec
            and np.array_equal(self.theta, other.theta)
        )


def init_params(spec: MlpSpec, rng=None, scale=1.0) -> FlatParams:
    """Uniform ``+-scale/sqrt(fan_in)`` weights and biases."""
    rng = check_random_state(rng)
    layers = []
    for n_in, n_out in spec.layer_shapes():
        bound = scale / np.sqrt(n_in)
        layers.append((rng.uniform(-bound, bound, (n_in, n_out)), rng.uniform(-bound, bound, n_out)))
    return FlatParams.pack(spec, layers)


# ---------------------------------------------------------------- on-tape MLP


def mlp_apply(spec: MlpSpec, theta, x):
    """Record an MLP forward pass whose weights are slices of node ``theta``.

    ``x`` may be a batch ``(N, n_0)`` or a single vector ``(n_0,)``.
    """
    act = T.ACTIVATIONS[spec.activation]
    h, offset = x, 0
    for i, (n_in, n_out) in enumerate(spec.layer_shapes()):
        W = T.reshape(T.slice_(theta, offset, offset + n_in * n_out), (n_in, n_out))
        offset += n_in * n_out
        b = T.slice_(theta, offset, offset + n_out)
        offset += n_out
        h = T.add(T.matmul(h, W), b)
        if i < spec.n_layers - 1:
            h = act(h)
    return h


def mapping_forward(params: FlatParams, x) -> np.ndarray:
    """Apply the mapping network ``params`` to every row of ``x``."""
    x = check_points(x, dim=params.spec.n_in, name="x")
    tape = T.Tape()
    out = mlp_apply(params.spec, tape.leaf(params.theta), tape.leaf(x))
    return np.array(out.value)


# ---------------------------------------------------------------- encoder


@dataclass(eq=False)
class EncoderNet:
    """MLP from a flattened observation to a decoder's full parameter vector."""

    spec: MlpSpec
    decoder_spec: MlpSpec
    phi: FlatParams

    def __post_init__(self):
        if self.spec.n_out != count_params(self.decoder_spec):
            raise ShapeError(
                f"encoder emits {self.spec.n_out} values but the decoder needs "
                f"{count_params(self.decoder_spec)}"
            )
        if self.phi.spec != self.spec:
            raise SpecError("phi was built for a different encoder spec")

    @classmethod
    def create(cls, n_inputs, hidden, decoder_spec, activation="relu", rng=None, final_scale=0.1):
        """Fresh encoder. The last layer is scaled by ``final_scale`` so the
        emitted decoders start out as near-zero maps."""
        rng = check_random_state(rng)
        spec = MlpSpec((n_inputs, *hidden, count_params(decoder_spec)), activation)
        layers = init_params(spec, rng).unpack()
        W, b = layers[-1]
        layers[-1] = (W * final_scale, b * final_scale)
        return cls(spec, decoder_spec, FlatParams.pack(spec, layers))

    @property
    def n_inputs(self):
        return self.spec.n_in

    def with_phi(self, phi) -> "EncoderNet":
        return EncoderNet(self.spec, self.decoder_spec, FlatParams(self.spec, phi))


def encoder_theta(enc: EncoderNet, phi, observation):
    """Record the encoder on the tape of node ``phi``; returns the theta node."""
    return mlp_apply(enc.spec, phi, observation)


def encoder_forward(enc: EncoderNet, observation) -> FlatParams:
    obs = check_vector(observation, size=enc.n_inputs, name="observation")
    tape = T.Tape()
    theta = encoder_theta(enc, tape.leaf(enc.phi.theta), tape.leaf(obs))
    return FlatParams(enc.decoder_spec, theta.value)


# ---------------------------------------------------------------- LVC


@dataclass(frozen=True, eq=False)
class LvcSpec:
    """Fixed-weight decoder that concatenates a codeword to the input of
    each layer listed in ``injection_layers``.

    ``layer_sizes`` counts only the point path; injected layers have weight
    matrices with ``codeword_len`` extra rows (the codeword block, placed
    after the point block).
    """

    layer_sizes: tuple
    codeword_len: int
    injection_layers: frozenset
    weights: tuple
    activation: str = "relu"

    def __post_init__(self):
        spec = MlpSpec(self.layer_sizes, self.activation)
        object.__setattr__(self, "layer_sizes", spec.layer_sizes)
        inj = frozenset(int(i) for i in self.injection_layers)
        if any(not 0 <= i < spec.n_layers for i in inj):
            raise SpecError(f"injection layers {sorted(inj)} outside [0, {spec.n_layers})")
        if self.codeword_len < 0:
            raise SpecError("codeword_len must be nonnegative")
        object.__setattr__(self, "injection_layers", inj)
        if len(self.weights) != spec.n_layers:
            raise ShapeError(f"expected {spec.n_layers} weight pairs, got {len(self.weights)}")
        weights = []
        for i, (n_in, n_out) in enumerate(spec.layer_shapes()):
            W, b = (np.array(a, dtype=np.float64) for a in self.weights[i])
            rows = n_in + (self.codeword_len if i in inj else 0)
            if W.shape != (rows, n_out) or b.shape != (n_out,):
                raise ShapeError(f"layer {i}: got {W.shape}/{b.shape}, need {(rows, n_out)}")
            W.setflags(write=False)
            b.setflags(write=False)
            weights.append((W, b))
        object.__setattr__(self, "weights", tuple(weights))

    @classmethod
    def random(cls, layer_sizes, codeword_len, injection_layers=(0,), activation="relu", rng=None):
        rng = check_random_state(rng)
        inj = frozenset(injection_layers)
        weights = []
        sizes = list(layer_sizes)
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            rows = n_in + (codeword_len if i in inj else 0)
            bound = 1.0 / np.sqrt(rows)
            weights.append((rng.uniform(-bound, bound, (rows, n_out)), rng.uniform(-bound, bound, n_out)))
        return cls(tuple(sizes), codeword_len, inj, tuple(weights), activation)

    @property
    def mlp_spec(self):
        return MlpSpec(self.layer_sizes, self.activation)


def complexity_lvc(spec: LvcSpec) -> int:
    """Decoder parameters (codeword blocks included) plus the codeword length."""
    return sum(W.size + b.size for W, b in spec.weights) + spec.codeword_len


def _check_codeword(spec, z):
    return check_vector(z, size=spec.codeword_len, name="codeword")


def lvc_forward(spec: LvcSpec, z, x) -> np.ndarray:
    z = _check_codeword(spec, z)
    x = check_points(x, dim=spec.layer_sizes[0], name="x")
    act = T.ACTIVATIONS[spec.activation]
    tape = T.Tape()
    h = tape.leaf(x)
    zn = tape.leaf(z)
    n_layers = len(spec.weights)
    for i, (W, b) in enumerate(spec.weights):
        if i in spec.injection_layers and spec.codeword_len:
            h = T.concat(h, zn)
        h = T.add(T.matmul(h, tape.leaf(W)), tape.leaf(b))
        if i < n_layers - 1:
            h = act(h)
    return np.array(h.value)


def lvc_to_hof(spec: LvcSpec, z) -> FlatParams:
    """Fold a fixed codeword into the biases: an equivalent mapping network.

    At every injection layer the codeword term ``z @ W_z`` is constant over
    the points, so it joins the bias and only the point block ``W_x`` stays.
    """
    z = _check_codeword(spec, z)
    layers = []
    for i, (W, b) in enumerate(spec.weights):
        n_in = spec.layer_sizes[i]
        if i in spec.injection_layers:
            layers.append((W[:n_in], b + z @ W[n_in:]))
        else:
            layers.append((W, b))
    return FlatParams.pack(spec.mlp_spec, layers)


@dataclass
class CollisionReport:
    codeword: np.ndarray
    lvc_max_diff: float
    hof_max_diff: float
    complexity_lvc: int
    complexity_hof: int
    separated: bool = field(default=False)


def lvc_collision_demo(spec, obs_a, obs_b, codeword_fn, probes, hof_pair=None,
                       layer=0, rng=None) -> CollisionReport:
    """Show two observations an LVC decoder cannot tell apart, but a pair of
    mapping networks of the same size can.

    ``codeword_fn`` maps an observation to its codeword and must send both
    observations to the same value. Unless ``hof_pair`` is given, the first
    mapping network is the LVC conversion and the second perturbs its
    weight matrix at ``layer``.
    """
    za = _check_codeword(spec, codeword_fn(obs_a))
    zb = _check_codeword(spec, codeword_fn(obs_b))
    if not np.array_equal(za, zb):
        raise PreconditionError("observations do not share a codeword")
    probes = check_points(probes, dim=spec.layer_sizes[0], name="probes")

    lvc_gap = np.max(np.abs(lvc_forward(spec, za, probes) - lvc_forward(spec, zb, probes)))

    if hof_pair is None:
        rng = check_random_state(rng)
        h1 = lvc_to_hof(spec, za)
        layers = h1.unpack()
        W, b = layers[layer]
        layers[layer] = (W + rng.uniform(-0.5, 0.5, W.shape), b)
        hof_pair = (h1, FlatParams.pack(h1.spec, layers))
    h1, h2 = hof_pair
    if h1.spec != h2.spec:
        raise SpecError("HOF pair must share one spec")
    hof_gap = np.max(np.abs(mapping_forward(h1, probes) - mapping_forward(h2, probes)))

    return CollisionReport(
        codeword=za,
        lvc_max_diff=float(lvc_gap),
        hof_max_diff=float(hof_gap),
        complexity_lvc=complexity_lvc(spec),
        complexity_hof=count_params(h1.spec),
        separated=bool(lvc_gap <= 1e-12 and hof_gap > 1e-6),
    )
