"""scikit-learn style front end: fit an encoder on (observation, cloud) pairs,
then ``transform`` observations into decoder parameters or ``predict``
reconstructed point clouds."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from . import tensor as T
from .composition import KMapping, power_eval
from .funcnets import EncoderNet, encoder_forward
from .geometry.kdtree import KDTree
from .geometry.metrics import chamfer_asym
from .geometry.sampling import sample_canonical
from .training import TrainConfig, record_loss, train_step
from .utils.validation import check_points, check_random_state, check_rasters


class HOFReconstructor(BaseEstimator):
    """Higher-order function network for point-cloud reconstruction.

    The fitted encoder maps a flattened observation to the full weight
    vector of a small mapping MLP; the reconstruction is that MLP (applied
    ``k`` times) evaluated on uniform samples from a canonical set.

    Parameters mirror :class:`hofnet.training.TrainConfig`. ``lr`` defaults
    to ``1e-5``; desk-scale runs use ``1e-3``.
    """

    def __init__(self, decoder_layers=(3, 1024, 3), activation="relu", encoder_hidden=(128, 128),
                 raster_size=32, k=1, lr=1e-5, steps=2000, n_samples=1000, n_gt_points=2000,
                 seed=0, regularize=False, reg_lambda=0.01, sampler="ball3_interior",
                 n_points=None, verbose=0):
        self.decoder_layers = decoder_layers
        self.activation = activation
        self.encoder_hidden = encoder_hidden
        self.raster_size = raster_size
        self.k = k
        self.lr = lr
        self.steps = steps
        self.n_samples = n_samples
        self.n_gt_points = n_gt_points
        self.seed = seed
        self.regularize = regularize
        self.reg_lambda = reg_lambda
        self.sampler = sampler
        self.n_points = n_points
        self.verbose = verbose

    # -- config plumbing ---------------------------------------------------

    def get_config(self) -> TrainConfig:
        params = self.get_params()
        params.pop("n_points")
        params.pop("verbose")
        return TrainConfig(**params)

    @classmethod
    def from_config(cls, cfg: TrainConfig, **extra):
        from dataclasses import asdict

        return cls(**asdict(cfg), **extra)

    @classmethod
    def from_encoder(cls, encoder: EncoderNet, cfg: TrainConfig, **extra):
        est = cls.from_config(cfg, **extra)
        est.encoder_ = encoder
        est.n_features_in_ = encoder.n_inputs
        est.history_ = []
        return est

    def _streams(self):
        init, train, evaluate = np.random.SeedSequence(int(self.seed)).spawn(3)
        return (np.random.default_rng(init), np.random.default_rng(train),
                np.random.default_rng(evaluate))

    # -- fitting -----------------------------------------------------------

    def initial_encoder(self, n_features):
        """The encoder ``fit`` starts from, before any update."""
        cfg = self.get_config()
        init_rng, _, _ = self._streams()
        return EncoderNet.create(n_features, cfg.encoder_hidden, cfg.decoder_spec, rng=init_rng)

    def fit(self, X, y, callback=None):
        """Train on observations ``X`` and ground-truth clouds ``y``.

        ``X`` is ``(n, raster_size, raster_size)`` or already flattened;
        ``y`` is a sequence of ``(m_i, 3)`` arrays (sizes may differ).
        ``callback(step, parts)`` is called after every update.
        """
        cfg = self.get_config()
        X = check_rasters(X, cfg.raster_size ** 2)
        y = [check_points(c, dim=3, name="y[i]") for c in y]
        if len(y) != len(X):
            raise ValueError(f"got {len(X)} observations but {len(y)} clouds")

        _, train_rng, _ = self._streams()
        enc = self.initial_encoder(X.shape[1])
        trees = [KDTree(c) for c in y]
        adam = T.AdamState.zeros(enc.phi.theta.shape, alpha=cfg.lr)
        self.history_ = []
        for step in range(cfg.steps):
            i = int(train_rng.integers(len(X)))
            res = train_step(enc, (X[i], y[i]), cfg, adam, train_rng, gt_tree=trees[i])
            enc, adam = res.encoder, res.adam
            row = {"step": step, "loss": res.parts.loss,
                   "chamfer_fwd": res.parts.chamfer_fwd, "chamfer_bwd": res.parts.chamfer_bwd}
            self.history_.append(row)
            if callback is not None:
                callback(step, res.parts)
            if self.verbose and (step % max(1, cfg.steps // 20) == 0 or step == cfg.steps - 1):
                print(f"step {step:6d}  loss {res.parts.loss:.6f}")
        self.encoder_ = enc
        self.adam_ = adam
        self.n_features_in_ = X.shape[1]
        return self

    # -- inference ---------------------------------------------------------

    def _check(self, X):
        check_is_fitted(self, "encoder_")
        return check_rasters(X, self.n_features_in_)

    def decoders(self, X):
        """Decoder parameters emitted for each observation."""
        X = self._check(X)
        return [encoder_forward(self.encoder_, x) for x in X]

    def transform(self, X):
        """Observations to decoder parameter vectors, shape ``(n, d)``."""
        return np.stack([p.theta for p in self.decoders(X)])

    def predict(self, X, n_points=None, k=None, random_state=None):
        """Reconstructions, shape ``(n, n_points, 3)``.

        ``n_points`` defaults to the training sample count; it may be
        raised freely at test time.
        """
        n_points = int(n_points or self.n_points or self.n_samples)
        k = self.k if k is None else int(k)
        rng = check_random_state(self.seed if random_state is None else random_state)
        out = []
        for params in self.decoders(X):
            x = sample_canonical(self.sampler, n_points, rng)
            out.append(power_eval(KMapping(params, k), x))
        return np.stack(out)

    def loss(self, X, y, n_points=None, random_state=None):
        """Mean training objective (symmetric Chamfer, plus the travel
        penalty when enabled) over the pairs, on fixed canonical samples."""
        X = self._check(X)
        rng = check_random_state(self.seed if random_state is None else random_state)
        n_points = int(n_points or self.n_samples)
        reg = self.reg_lambda if self.regularize else 0.0
        total = 0.0
        for x, c in zip(X, y):
            canonical = sample_canonical(self.sampler, n_points, rng)
            phi = T.Tape().leaf(self.encoder_.phi.theta)
            _, _, parts = record_loss(self.encoder_, phi, x, check_points(c, dim=3), canonical, self.k, reg)
            total += parts.loss
        return total / len(X)

    def score(self, X, y, n_points=None):
        """Negative mean symmetric Chamfer distance (higher is better)."""
        preds = self.predict(X, n_points=n_points)
        dists = [chamfer_asym(p, c) + chamfer_asym(c, p) for p, c in zip(preds, y)]
        return -float(np.mean(dists))


__all__ = ["HOFReconstructor", "NotFittedError"]
