"""End-to-end training of the parameter-emitting encoder, plus the config
file, metrics log and binary checkpoint formats.

One step: the encoder turns an observation into decoder parameters, a fresh
canonical sample is pushed through the decoder ``k`` times, and the
symmetric Chamfer distance to the ground-truth cloud (plus an optional
travel penalty) is minimised with Adam over the encoder weights only.
"""
from __future__ import annotations

import csv
import io
import logging
import struct
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import tensor as T
from .composition import DEFAULT_REG_LAMBDA, travel_penalty
from .exceptions import FormatError, NonFiniteError, SpecError
from .funcnets import ACTIVATION_CODES, EncoderNet, FlatParams, MlpSpec, encoder_theta, mlp_apply
from .geometry.io import atomic_write
from .geometry.kdtree import nearest_neighbors
from .geometry.pointcloud import PointCloud
from .geometry.sampling import SAMPLER_DIMS, sample_canonical
from .utils.validation import check_points, check_random_state, check_vector

log = logging.getLogger(__name__)

METRICS_HEADER = ("step", "loss", "chamfer_fwd", "chamfer_bwd")


@dataclass
class TrainConfig:
    decoder_layers: tuple = (3, 1024, 3)
    activation: str = "relu"
    encoder_hidden: tuple = (128, 128)
    raster_size: int = 32
    k: int = 1
    lr: float = 1e-5
    steps: int = 2000
    n_samples: int = 1000
    n_gt_points: int = 2000
    seed: int = 0
    regularize: bool = False
    reg_lambda: float = DEFAULT_REG_LAMBDA
    sampler: str = "ball3_interior"

    def __post_init__(self):
        self.decoder_layers = tuple(int(v) for v in self.decoder_layers)
        self.encoder_hidden = tuple(int(v) for v in self.encoder_hidden)
        self.validate()

    def validate(self):
        for name in ("raster_size", "k", "steps", "n_samples", "n_gt_points"):
            if int(getattr(self, name)) < 1:
                raise SpecError(f"{name} must be positive")
        if not self.lr > 0:
            raise SpecError("lr must be positive")
        if self.reg_lambda < 0:
            raise SpecError("reg_lambda must be nonnegative")
        if self.sampler not in SAMPLER_DIMS:
            raise SpecError(f"unknown sampler {self.sampler!r}")
        spec = self.decoder_spec
        if spec.n_in != SAMPLER_DIMS[self.sampler]:
            raise SpecError(
                f"decoder input dim {spec.n_in} does not match sampler {self.sampler!r}"
            )
        if spec.n_out != 3:
            raise SpecError("decoder must output 3-D points")
        if (self.k > 1 or self.regularize) and spec.n_in != spec.n_out:
            raise SpecError("k > 1 and the travel penalty need decoder input dim == output dim")

    @property
    def decoder_spec(self):
        return MlpSpec(self.decoder_layers, self.activation)

    # -- key=value text form ------------------------------------------------

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        kinds = {f.name: f.type for f in fields(cls)}
        defaults = cls()
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in kinds:
                raise FormatError(f"line {lineno}: unknown config key {key!r}")
            values[key] = _parse_value(getattr(defaults, key), value, key)
        return cls(**values)


def _parse_value(default, text, key):
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return low in ("true", "1")
        if isinstance(default, tuple):
            return tuple(int(v) for v in text.split(",") if v.strip())
        return type(default)(text)
    except ValueError:
        raise FormatError(f"bad value for {key}: {text!r}") from None


def load_config(path):
    with open(path) as fh:
        return TrainConfig.from_text(fh.read())


# ---------------------------------------------------------------- loss


@dataclass
class LossParts:
    loss: float
    chamfer_fwd: float
    chamfer_bwd: float
    reg: float = 0.0


def record_loss(enc, phi, observation, gt, canonical, k, reg_lambda=0.0, gt_tree=None):
    """Build the training objective on ``phi``'s tape.

    Returns ``(loss_node, prediction_node, parts)``. Nearest-neighbour
    assignments are computed on the forward values and held fixed, which
    gives the exact gradient wherever the assignment is unique.
    """
    tape = phi.tape
    spec = enc.decoder_spec
    theta = encoder_theta(enc, phi, tape.leaf(observation))
    x = tape.leaf(canonical)
    first = mlp_apply(spec, theta, x)
    out = first
    for _ in range(k - 1):
        out = mlp_apply(spec, theta, out)

    pred = out.value
    _, to_gt = nearest_neighbors(pred, gt, tree=gt_tree)
    _, to_pred = nearest_neighbors(gt, pred)
    fwd = T.scale(T.sq_norm(T.sub(out, tape.leaf(gt[to_gt]))), 1.0 / len(pred))
    bwd = T.scale(T.sq_norm(T.sub(tape.leaf(gt), T.gather(out, to_pred))), 1.0 / len(gt))
    loss = T.add(fwd, bwd)
    reg_value = 0.0
    if reg_lambda:
        reg = travel_penalty(x, first)
        reg_value = float(reg.value)
        loss = T.add(loss, T.scale(reg, reg_lambda))
    parts = LossParts(float(loss.value), float(fwd.value), float(bwd.value), reg_value)
    return loss, out, parts


def loss_and_grad(enc, observation, gt, canonical, k=1, reg_lambda=0.0, gt_tree=None):
    tape = T.Tape()
    phi = tape.leaf(enc.phi.theta)
    loss, _, parts = record_loss(enc, phi, observation, gt, canonical, k, reg_lambda, gt_tree)
    return parts, T.backward(tape, loss)[phi.id]


@dataclass
class StepResult:
    parts: LossParts
    encoder: EncoderNet
    adam: T.AdamState

    @property
    def loss(self):
        return self.parts.loss


def train_step(enc, sample, cfg: TrainConfig, adam=None, rng=None, gt_tree=None) -> StepResult:
    """One Adam update of the encoder weights on a single (observation, cloud) pair."""
    observation, gt = sample
    observation = check_vector(observation, size=enc.n_inputs, name="observation")
    gt = check_points(gt, dim=3, name="gt")
    rng = check_random_state(rng)
    if adam is None:
        adam = T.AdamState.zeros(enc.phi.theta.shape, alpha=cfg.lr)
    canonical = sample_canonical(cfg.sampler, cfg.n_samples, rng)
    reg_lambda = cfg.reg_lambda if cfg.regularize else 0.0
    try:
        parts, grad = loss_and_grad(enc, observation, gt, canonical, cfg.k, reg_lambda, gt_tree)
        if not (np.isfinite(parts.loss) and np.all(np.isfinite(grad))):
            raise NonFiniteError("non-finite loss or gradient")
    except NonFiniteError as err:
        diag = {
            "adam_step": adam.step,
            "phi_abs_max": float(np.max(np.abs(enc.phi.theta))),
            "observation_sum": float(observation.sum()),
            "canonical_abs_max": float(np.max(np.abs(canonical))),
        }
        log.error("training aborted: %s; diagnostics %s", err, diag)
        exc = NonFiniteError(f"{err} (diagnostics: {diag})")
        exc.diagnostics = diag
        raise exc from err
    phi, adam = T.adam_step(adam, enc.phi.theta, grad)
    return StepResult(parts, enc.with_phi(phi), adam)


def reconstruct(enc, observation, n_points, k=1, rng=None, sampler="ball3_interior") -> PointCloud:
    """Decode an observation by mapping ``n_points`` fresh canonical samples."""
    from .composition import KMapping, power_eval
    from .funcnets import encoder_forward

    params = encoder_forward(enc, np.ravel(observation))
    x = sample_canonical(sampler, n_points, check_random_state(rng))
    return PointCloud(power_eval(KMapping(params, k), x))


# ---------------------------------------------------------------- metrics log


def format_metrics(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for row in rows:
        writer.writerow([int(row["step"])] + [repr(float(row[k])) for k in METRICS_HEADER[1:]])
    return buf.getvalue()


def write_metrics(path, rows):
    atomic_write(path, format_metrics(rows))


# ---------------------------------------------------------------- checkpoints
#
# Layout (all little-endian):
#   b"HOF1"
#   encoder spec:  u32 n_sizes, u32 sizes..., u32 activation code
#   decoder spec:  u32 n_sizes, u32 sizes..., u32 activation code
#   config:        u32 n_bytes, UTF-8 key=value text
#   phi:           u64 n, f64 values
#   cached thetas: u32 count, then per entry u64 n, f64 values
# An encoder spec with zero sizes means "no encoder" (a bare decoder file).

MAGIC = b"HOF1"
_CODE_ACTIVATIONS = {v: k for k, v in ACTIVATION_CODES.items()}


@dataclass
class Checkpoint:
    encoder: EncoderNet | None
    config: TrainConfig
    decoder_spec: MlpSpec
    cached: list = field(default_factory=list)


def _pack_spec(spec):
    if spec is None:
        return struct.pack("<I", 0) + struct.pack("<I", 0)
    sizes = spec.layer_sizes
    return struct.pack(f"<I{len(sizes)}II", len(sizes), *sizes, ACTIVATION_CODES[spec.activation])


def _pack_f64(values):
    values = np.ascontiguousarray(values, dtype="<f8")
    return struct.pack("<Q", values.size) + values.tobytes()


def dump_checkpoint(encoder, config, cached=(), decoder_spec=None) -> bytes:
    decoder_spec = decoder_spec or (encoder.decoder_spec if encoder else config.decoder_spec)
    text = config.to_text().encode()
    parts = [
        MAGIC,
        _pack_spec(encoder.spec if encoder else None),
        _pack_spec(decoder_spec),
        struct.pack("<I", len(text)),
        text,
        _pack_f64(encoder.phi.theta if encoder else np.zeros(0)),
        struct.pack("<I", len(cached)),
    ]
    parts += [_pack_f64(getattr(c, "theta", c)) for c in cached]
    return b"".join(parts)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("checkpoint is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def f64s(self):
        n = struct.unpack("<Q", self.take(8))[0]
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)

    def spec(self):
        n = self.u32()
        sizes = [self.u32() for _ in range(n)]
        code = self.u32()
        if n == 0:
            return None
        if code not in _CODE_ACTIVATIONS:
            raise FormatError(f"unknown activation code {code}")
        try:
            return MlpSpec(tuple(sizes), _CODE_ACTIVATIONS[code])
        except SpecError as err:
            raise FormatError(f"bad layer sizes in checkpoint: {err}") from None


def parse_checkpoint(data: bytes) -> Checkpoint:
    r = _Reader(bytes(data))
    if r.take(4) != MAGIC:
        raise FormatError("not a hofnet checkpoint (bad magic)")
    enc_spec = r.spec()
    dec_spec = r.spec()
    if dec_spec is None:
        raise FormatError("checkpoint has no decoder spec")
    try:
        config = TrainConfig.from_text(r.take(r.u32()).decode())
    except (UnicodeDecodeError, SpecError) as err:
        raise FormatError(f"bad config block: {err}") from None
    phi = r.f64s()
    cached = [r.f64s() for _ in range(r.u32())]
    if r.pos != len(r.data):
        raise FormatError("trailing bytes after checkpoint")
    try:
        encoder = None
        if enc_spec is not None:
            encoder = EncoderNet(enc_spec, dec_spec, FlatParams(enc_spec, phi))
        cached = [FlatParams(dec_spec, c) for c in cached]
    except (ValueError, SpecError) as err:
        raise FormatError(f"inconsistent checkpoint: {err}") from None
    return Checkpoint(encoder, config, dec_spec, cached)


def save_checkpoint(path, encoder, config, cached=(), decoder_spec=None):
    atomic_write(path, dump_checkpoint(encoder, config, cached, decoder_spec))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())


def config_dict(cfg: TrainConfig):
    return asdict(cfg)
