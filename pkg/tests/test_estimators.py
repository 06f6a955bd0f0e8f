import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import make_dataset
from hrdd import HierarchicalRDD, PooledRDD, SeparateRDD
from hrdd.exceptions import HRDDError

FAST = dict(n_iter=200, n_burn=50, n_candidates=3, batch_len=20, n_warmup=5, seed=1)


def _xyg(binary=False, seed=0):
    ds = make_dataset(sizes=(120, 150), tau=(1.5, -0.5), seed=seed, binary=binary)
    x = np.concatenate([g.x for g in ds.groups])
    y = np.concatenate([g.y for g in ds.groups])
    groups = np.repeat(["north", "south"], [120, 150])
    return x, y, groups


def test_params_and_clone():
    est = HierarchicalRDD(threshold=0.5, bandwidth="local", n_iter=300)
    params = est.get_params()
    assert params["threshold"] == 0.5 and params["bandwidth"] == "local"
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(kernel="window")
    assert est.kernel == "window"


def test_not_fitted():
    with pytest.raises(NotFittedError):
        HierarchicalRDD().predict(np.zeros(3))


def test_fit_predict_continuous():
    x, y, g = _xyg()
    est = HierarchicalRDD(bandwidth="global", **FAST).fit(x[:, None], y, g)
    assert list(est.groups_) == ["north", "south"]
    assert est.effects_.shape == (2,) and est.intervals_.shape == (2, 2)
    assert np.all(est.intervals_[:, 0] <= est.intervals_[:, 1])
    assert est.bandwidths_[0] == est.bandwidths_[1]
    pred = est.predict(np.array([-1e-9, 0.0]), np.array(["north", "north"]))
    assert pred[1] - pred[0] == pytest.approx(est.effects_[0], abs=1e-6)
    assert est.effect_draws("south").shape == (150,)
    with pytest.raises(ValueError, match="unknown group"):
        est.effect_draws("west")


def test_fixed_bandwidth_is_deterministic():
    x, y, g = _xyg()
    a = HierarchicalRDD(bandwidth=0.7, **FAST).fit(x, y, g)
    b = HierarchicalRDD(bandwidth=0.7, **FAST).fit(x, y, g)
    assert np.array_equal(a.effects_, b.effects_)
    assert np.all(a.bandwidths_ == 0.7)


def test_binary_predict_is_probability():
    x, y, g = _xyg(binary=True)
    est = HierarchicalRDD(outcome="binary", bandwidth=[0.8, 0.9], **FAST).fit(x, y, g)
    p = est.predict(x, g)
    assert np.all((p > 0) & (p < 1))
    assert np.all(np.abs(est.effects_) < 1)


def test_input_validation():
    x, y, g = _xyg()
    with pytest.raises(ValueError):
        HierarchicalRDD(**FAST).fit(np.column_stack([x, x]), y, g)
    with pytest.raises(ValueError):
        HierarchicalRDD(**FAST).fit(x, y[:-1], g)
    y_bad = y.copy()
    y_bad[0] = np.nan
    with pytest.raises(ValueError):
        HierarchicalRDD(**FAST).fit(x, y_bad, g)
    with pytest.raises(HRDDError):
        HierarchicalRDD(outcome="binary", **FAST).fit(x, y, g)


def test_separate_and_pooled():
    x, y, g = _xyg()
    sep = SeparateRDD().fit(x, y, g)
    assert sep.effects_.shape == (2,) and np.all(sep.se_ > 0)
    assert np.all(sep.intervals_[:, 0] < sep.effects_)
    pool = PooledRDD(bandwidth=0.8).fit(x, y, g)
    assert pool.bandwidth_ == 0.8
    assert pool.interval_[0] < pool.effect_ < pool.interval_[1]
    assert clone(pool).get_params() == pool.get_params()
