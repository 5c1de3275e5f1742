import logging

import numpy as np
import pytest

from hofnet.exceptions import FormatError, NonFiniteError, SpecError
from hofnet.funcnets import EncoderNet, MlpSpec, encoder_forward, init_params, mapping_forward
from hofnet.geometry import chamfer_sym
from hofnet.shapes import gen_dataset
from hofnet.training import (METRICS_HEADER, TrainConfig, dump_checkpoint, format_metrics,
                             load_checkpoint, load_config, loss_and_grad, parse_checkpoint,
                             reconstruct, save_checkpoint, train_step)

import helpers

SMALL = dict(decoder_layers=(3, 16, 3), encoder_hidden=(8,), raster_size=8, n_samples=50, lr=1e-3)


def small_encoder(rng=0):
    cfg = TrainConfig(**SMALL)
    return cfg, EncoderNet.create(64, cfg.encoder_hidden, cfg.decoder_spec, rng=rng)


def test_end_to_end_gradient_matches_fd():
    errors = [e for e in (helpers.stack_gradient_error(s) for s in range(10)) if e is not None]
    assert len(errors) >= 5
    assert max(errors) < 1e-3


def test_zero_loss_when_prediction_equals_target():
    cfg, enc = small_encoder()
    rng = np.random.default_rng(0)
    obs = rng.uniform(0, 1, 64)
    canon = rng.standard_normal((20, 3))
    target = mapping_forward(encoder_forward(enc, obs), canon)
    parts, _ = loss_and_grad(enc, obs, target, canon)
    assert parts.loss == 0.0


def test_loss_permutation_invariant():
    _, enc = small_encoder()
    rng = np.random.default_rng(1)
    obs, gt, canon = rng.uniform(0, 1, 64), rng.standard_normal((30, 3)), rng.standard_normal((20, 3))
    base = loss_and_grad(enc, obs, gt, canon)[0].loss
    shuffled = loss_and_grad(enc, obs, gt[rng.permutation(30)], canon[rng.permutation(20)])[0].loss
    assert shuffled == pytest.approx(base, rel=1e-13)


def test_train_step_reduces_loss_and_touches_only_phi():
    cfg, enc = small_encoder()
    sample = gen_dataset(1, seed=2, n_points=300, raster_size=8)[0]
    rng = np.random.default_rng(3)
    first = train_step(enc, (sample.observation.ravel(), sample.gt), cfg, rng=rng)
    assert first.adam.step == 1
    assert first.encoder.decoder_spec == enc.decoder_spec and first.encoder.spec == enc.spec
    state, e = first.adam, first.encoder
    for _ in range(30):
        res = train_step(e, (sample.observation.ravel(), sample.gt), cfg, state, rng)
        e, state = res.encoder, res.adam
    assert res.loss < first.loss


def test_training_is_deterministic():
    cfg, _ = small_encoder()
    sample = gen_dataset(1, seed=4, n_points=200, raster_size=8)[0]

    def run():
        _, enc = small_encoder(5)
        rng, adam, losses = np.random.default_rng(6), None, []
        for _ in range(5):
            res = train_step(enc, (sample.observation.ravel(), sample.gt), cfg, adam, rng)
            enc, adam = res.encoder, res.adam
            losses.append(res.loss)
        return losses, enc.phi.theta.tobytes()

    assert run() == run()


def test_nonfinite_loss_aborts_with_diagnostics(caplog):
    cfg, enc = small_encoder()
    huge = enc.with_phi(np.full(enc.phi.theta.shape, 1e200))
    with caplog.at_level(logging.ERROR, logger="hofnet.training"):
        with pytest.raises(NonFiniteError) as info:
            train_step(huge, (np.ones(64), np.zeros((5, 3))), cfg, rng=0)
    assert "phi_abs_max" in info.value.diagnostics
    assert "diagnostics" in caplog.text


def test_reconstruct_untrained_collapses_and_sizes():
    _, enc = small_encoder()
    obs = np.random.default_rng(7).uniform(0, 1, 64)
    assert reconstruct(enc, obs, 1, rng=0).points.shape == (1, 3)
    pts = reconstruct(enc, obs, 5000, rng=0).points
    assert pts.shape == (5000, 3)
    assert np.max(np.abs(pts)) < 0.5


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(SpecError):
        TrainConfig(steps=0)
    with pytest.raises(SpecError):
        TrainConfig(decoder_layers=(3, 8, 2))
    with pytest.raises(SpecError):
        TrainConfig(decoder_layers=(4, 8, 3), k=2, sampler="ball4_interior")
    TrainConfig(decoder_layers=(4, 8, 3), sampler="ball4_interior")


def test_config_text_round_trip(tmp_path):
    cfg = TrainConfig(reg_lambda=0.0375, regularize=True, k=2, lr=3e-4, decoder_layers=(3, 128, 128, 128, 3))
    path = tmp_path / "run.cfg"
    path.write_text(cfg.to_text())
    assert load_config(path) == cfg


def test_config_unknown_key_rejected():
    with pytest.raises(FormatError):
        TrainConfig.from_text("steps=10\nlearning_rate=0.1\n")
    with pytest.raises(FormatError):
        TrainConfig.from_text("regularize=maybe\n")


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_round_trip(tmp_path):
    _, enc = small_encoder()
    cfg = TrainConfig(**{**SMALL, "reg_lambda": 0.123})
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, enc, cfg)
    ck = load_checkpoint(path)
    assert ck.encoder.phi.theta.tobytes() == enc.phi.theta.tobytes()
    assert ck.config == cfg and ck.encoder.spec == enc.spec
    assert path.read_bytes()[:4] == b"HOF1"


def test_checkpoint_truncation_and_magic():
    cfg, enc = small_encoder()
    blob = dump_checkpoint(enc, cfg)
    for cut in (0, 3, 10, len(blob) // 2, len(blob) - 1):
        with pytest.raises(FormatError):
            parse_checkpoint(blob[:cut])
    with pytest.raises(FormatError):
        parse_checkpoint(b"XXXX" + blob[4:])
    with pytest.raises(FormatError):
        parse_checkpoint(blob + b"\0")


def test_checkpoint_bare_decoder():
    spec = MlpSpec((5, 8, 3))
    p = init_params(spec, 0)
    ck = parse_checkpoint(dump_checkpoint(None, TrainConfig(), cached=[p], decoder_spec=spec))
    assert ck.encoder is None and ck.cached[0] == p


def test_metrics_csv():
    text = format_metrics([{"step": 0, "loss": 0.5, "chamfer_fwd": 0.25, "chamfer_bwd": 0.25}])
    assert text.splitlines()[0] == ",".join(METRICS_HEADER)
    assert text.splitlines()[1] == "0,0.5,0.25,0.25"


def test_gradient_descent_direction():
    # a small step against the gradient lowers the loss
    _, enc = small_encoder()
    rng = np.random.default_rng(8)
    obs, gt, canon = rng.uniform(0, 1, 64), rng.uniform(-0.5, 0.5, (40, 3)), rng.standard_normal((40, 3))
    parts, grad = loss_and_grad(enc, obs, gt, canon)
    moved = enc.with_phi(enc.phi.theta - 1e-3 * grad / np.linalg.norm(grad))
    assert loss_and_grad(moved, obs, gt, canon)[0].loss < parts.loss


def test_record_loss_matches_chamfer():
    _, enc = small_encoder()
    rng = np.random.default_rng(9)
    obs, gt, canon = rng.uniform(0, 1, 64), rng.standard_normal((40, 3)), rng.standard_normal((25, 3))
    pred = mapping_forward(encoder_forward(enc, obs), canon)
    parts, _ = loss_and_grad(enc, obs, gt, canon)
    assert parts.loss == pytest.approx(chamfer_sym(pred, gt), rel=1e-13)
