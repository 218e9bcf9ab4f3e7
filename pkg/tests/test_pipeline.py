import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from trunkgauge import TrunkGauge
from trunkgauge.synth import SceneSpec, synth_scene

SMALL = dict(width=200, height=160, gap_px=80, pad_width_px=16, pad_height_px=80,
             pad_height_mm=8.0, edge_jitter=3.0)


def test_fit_predict():
    train = [synth_scene(SceneSpec(seed=s, tilt_deg=s - 2.0, **SMALL)) for s in range(4)]
    est = TrunkGauge(pad_height_mm=8.0).fit([i for i, _ in train], [t.mask for _, t in train])
    test = [synth_scene(SceneSpec(seed=50 + s, tilt_deg=2.0 * s - 3, **SMALL)) for s in range(3)]
    blank = np.full((160, 200, 3), 90, np.uint8)
    d = est.predict([i for i, _ in test] + [blank])
    assert np.all(np.abs(d[:3] - 8.0) < 0.1)
    assert np.isnan(d[3])
    res = est.measure(test[0][0])
    assert res.diameter_mm == d[0]


def test_params_and_clone():
    est = TrunkGauge(pad_height_mm=12.0, n_stations=20)
    assert est.get_params()["n_stations"] == 20
    c = clone(est.set_params(k_mad=2.5))
    assert c.k_mad == 2.5 and c.pad_height_mm == 12.0


def test_unfitted():
    with pytest.raises(NotFittedError):
        TrunkGauge().measure(np.zeros((10, 10, 3), np.uint8))
