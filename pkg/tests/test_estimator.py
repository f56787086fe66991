import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from motcal import LocalVolCalibrator, gaussian_density
from motcal.exceptions import ConvexOrderError
from motcal.lattice import Lattice


@pytest.fixture(scope="module")
def marginals():
    lat = Lattice(32, 32)
    return np.vstack([gaussian_density(lat, 0.5, 0.05), gaussian_density(lat, 0.5, 0.1)])


def test_params_roundtrip():
    est = LocalVolCalibrator(nt=16, nx=20, r=32.0)
    params = est.get_params()
    assert params["nt"] == 16 and params["r"] == 32.0
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(max_iter=5)
    assert est.max_iter == 5


def test_unfitted_predict_raises():
    with pytest.raises(NotFittedError):
        LocalVolCalibrator().predict([[0.5, 0.5]])


def test_fit_predict(marginals):
    est = LocalVolCalibrator(nt=32, nx=32, max_iter=600, res_tol=0.0, init_scheme="zero", mask_fraction=0.1)
    assert est.fit(marginals) is est
    assert est.n_iter_ == 600
    pred = est.predict([[0.5, 0.5], [0.5, 0.0], [2.0, 0.5]])
    assert pred[0] == pytest.approx(0.0075, rel=0.15)
    assert np.isnan(pred[1]) and np.isnan(pred[2])
    dens = est.predict_density([[0.0, 0.5]])
    assert dens[0] == pytest.approx(est.densities_.rho0[16], rel=0.05)
    s = est.summary()
    assert 0 < s["unmasked_fraction"] < 1


def test_fit_validates(marginals):
    with pytest.raises(ValueError):
        LocalVolCalibrator(nt=32, nx=32).fit(marginals[:, :10])
    with pytest.raises(ConvexOrderError):
        LocalVolCalibrator(nt=32, nx=32, max_iter=2).fit(marginals[::-1])
