import numpy as np
import pytest
from sklearn.base import clone

from anisotv.analytic import disc_datum
from anisotv.anisotropy import preset
from anisotv.estimator import TVCalibration
from anisotv.exceptions import InvalidInputError
from anisotv.grid import GridSpec


def _disc(n=32):
    return disc_datum(GridSpec.regular(n), 0.25).values


def test_params_and_clone():
    est = TVCalibration(lam=8.0, model="diagonal", gap_tol=1e-4)
    params = est.get_params()
    assert params["lam"] == 8.0 and params["model"] == "diagonal"
    twin = clone(est)
    assert twin.get_params() == params and not hasattr(twin, "u_")
    est.set_params(lam=4.0)
    assert est.lam == 4.0


def test_fit_transform_matches_solver():
    f = _disc()
    est = TVCalibration(lam=32.0, gap_tol=1e-5)
    u = est.fit_transform(f)
    assert u.shape == f.shape and est.n_iter_ > 0 and est.gap_ <= 1e-5
    np.testing.assert_allclose(est.g_, 32.0 * (f - u), atol=1e-12)
    assert est.z_.shape == (2,) + f.shape
    assert np.sqrt((est.z_**2).sum(axis=0)).max() <= 1 + 1e-9
    np.testing.assert_array_equal(est.transform(f), u)


def test_transform_refits_on_new_data():
    est = TVCalibration(lam=32.0, gap_tol=1e-4).fit(_disc())
    other = 2 * _disc()
    u = est.transform(other)
    np.testing.assert_array_equal(est.fit_data_, other)
    assert u.max() > 1.0


def test_model_instance_and_dimension_check():
    est = TVCalibration(model=preset("rotating"), gap_tol=1e-4).fit(_disc(16))
    assert est.u_.shape == (16, 16)
    with pytest.raises(InvalidInputError):
        TVCalibration(model=preset("rotating")).fit(np.zeros((8, 8, 8)))


def test_input_validation():
    with pytest.raises(InvalidInputError):
        TVCalibration().fit(np.zeros(10))
    bad = _disc(8)
    bad[0, 0] = np.nan
    with pytest.raises(InvalidInputError):
        TVCalibration().fit(bad)
    est = TVCalibration(gap_tol=1e-3).fit(_disc(8))
    with pytest.raises(InvalidInputError):
        est.transform(np.zeros((9, 9)))


def test_transform_before_fit():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        TVCalibration().transform(_disc(8))
