import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from wcaro.estimator import RobustMipApproximator
from wcaro.oracle import random_instance, toy_t1, toy_t2


def test_params_round_trip():
    est = RobustMipApproximator(gap=1e-4, engine="highs")
    params = est.get_params()
    assert params["gap"] == 1e-4 and params["engine"] == "highs"
    twin = clone(est)
    assert twin.get_params() == params and not hasattr(twin, "solution_")


@pytest.mark.parametrize("toy, value", [(toy_t1, 1.0), (toy_t2, 0.6)], ids=["T1", "T2"])
@pytest.mark.parametrize("engine", ["native", "highs"])
def test_fit_toys(toy, value, engine):
    est = RobustMipApproximator(engine=engine).fit(toy())
    assert est.objective_ == pytest.approx(value)
    assert est.wall_time_ >= 0
    assert est.certify().exact


def test_fit_returns_self_and_vectors():
    inst = random_instance(5)
    est = RobustMipApproximator()
    assert est.fit(inst) is est
    assert est.x_.shape == (inst.first.n_x,)
    assert np.all(np.isfinite(est.x_))


def test_not_fitted():
    with pytest.raises(NotFittedError):
        RobustMipApproximator().certify()


def test_bad_engine():
    with pytest.raises(ValueError):
        RobustMipApproximator(engine="cplex").fit(toy_t1())
