import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from sbpyolo.boxes import Detection
from sbpyolo.detector import Detector
from sbpyolo.exceptions import ConfigError, ShapeError


def test_fit_uses_input_size():
    x = np.random.default_rng(0).standard_normal((1, 3, 64, 64))
    det = Detector("sbp-yolo", random_state=1).fit(x)
    assert det.graph_.input_shape == (3, 64, 64)
    outs = det.transform(x)
    assert [o.shape for o in outs] == [(1, 66, s, s) for s in (16, 8, 4, 2)]


def test_predict_returns_detections():
    x = np.random.default_rng(0).standard_normal((2, 3, 64, 64))
    det = Detector("yolo11n-p2-ledh", random_state=0, score_threshold=0.0).fit(x)
    found = det.predict(x)
    assert found and all(isinstance(d, Detection) for d in found)
    assert {d.image_id for d in found} == {"0", "1"}
    assert all(0 <= d.score <= 1 and d.class_id in (0, 1) for d in found)


def test_seeded_and_cloneable():
    x = np.random.default_rng(0).standard_normal((1, 3, 32, 32))
    a = Detector(random_state=4).fit(x)
    b = clone(a).fit(x)
    for oa, ob in zip(a.transform(x), b.transform(x)):
        np.testing.assert_array_equal(oa, ob)
    assert a.get_params()["config"] == "sbp-yolo"


def test_errors():
    with pytest.raises(NotFittedError):
        Detector().transform(np.zeros((1, 3, 32, 32)))
    with pytest.raises(ShapeError):
        Detector().fit(np.zeros((1, 4, 32, 32)))
    with pytest.raises(FileNotFoundError):
        Detector("nope").fit()
    minimal = Detector("minimal").fit()
    with pytest.raises(ConfigError):
        minimal.predict(np.zeros((1, 1, 1, 1)))
