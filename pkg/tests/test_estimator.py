import numpy as np
import pytest
from sklearn.base import clone

from hofnet import HOFReconstructor
from hofnet.estimator import NotFittedError
from hofnet.funcnets import count_params
from hofnet.shapes import gen_dataset


@pytest.fixture(scope="module")
def data():
    samples = gen_dataset(3, seed=5, n_points=300, raster_size=8)
    return np.stack([s.observation for s in samples]), [s.gt.points for s in samples]


def small(**kw):
    params = dict(decoder_layers=(3, 16, 3), encoder_hidden=(8,), raster_size=8,
                  n_samples=60, steps=25, lr=1e-3, seed=2)
    params.update(kw)
    return HOFReconstructor(**params)


def test_params_round_trip():
    est = small(k=2)
    params = est.get_params()
    assert params["k"] == 2 and params["lr"] == 1e-3
    assert clone(est).get_params() == params
    est.set_params(steps=7)
    assert est.get_config().steps == 7


def test_default_lr():
    assert HOFReconstructor().lr == 1e-5


def test_unfitted_raises(data):
    with pytest.raises(NotFittedError):
        small().transform(data[0])


def test_fit_transform_predict(data):
    X, y = data
    est = small().fit(X, y)
    assert len(est.history_) == 25 and est.n_features_in_ == 64
    theta = est.transform(X)
    assert theta.shape == (3, count_params(est.get_config().decoder_spec))
    assert est.predict(X, n_points=77).shape == (3, 77, 3)
    assert est.predict(X[:1]).shape == (1, 60, 3)
    assert est.score(X, y) < 0


def test_fit_is_deterministic(data):
    X, y = data
    a, b = small().fit(X, y), small().fit(X, y)
    assert a.transform(X).tobytes() == b.transform(X).tobytes()


def test_fit_lowers_loss(data):
    X, y = data
    before = small(steps=1).fit(X, y).loss(X, y, random_state=0)
    after = small(steps=80).fit(X, y).loss(X, y, random_state=0)
    assert after < before


def test_input_validation(data):
    X, y = data
    with pytest.raises(ValueError):
        small().fit(X, y[:2])
    with pytest.raises(ValueError):
        small().fit(X[:, :4, :4], y)
    est = small(steps=1).fit(X, y)
    with pytest.raises(ValueError):
        est.predict(np.zeros((1, 5)))


def test_callback_sees_every_step(data):
    X, y = data
    seen = []
    small(steps=5).fit(X, y, callback=lambda step, parts: seen.append(step))
    assert seen == list(range(5))
