import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from slestates.estimator import PowerSpectrumEstimator, StateOfLowEnergy
from slestates.exceptions import DomainError


def test_state_of_low_energy_minkowski(mink):
    bg, f = mink
    est = StateOfLowEnergy(background=bg, window=f, grid_size=64)
    p = np.array([0.0, 0.5, 5.0])
    est.fit(p)
    tau = np.linspace(-0.5, 0.5, 5)
    m = est.predict(tau)
    assert m.shape == (5, 3)
    assert np.allclose(m * 2 * np.sqrt(1 + p ** 2), 1.0, atol=1e-9)
    assert est.transform(tau[:, None]).dtype == complex
    assert np.allclose(est.energy_, np.sqrt(1 + p ** 2) * est.energy_[0])


def test_params_and_clone(mink):
    bg, f = mink
    est = StateOfLowEnergy(background=bg, window=f, route="fiducial", tol=1e-10)
    params = est.get_params()
    assert params["route"] == "fiducial" and params["tol"] == 1e-10
    c = clone(est)
    assert c.get_params()["route"] == "fiducial"
    with pytest.raises(NotFittedError):
        c.predict([0.0])


def test_validation(mink):
    bg, f = mink
    with pytest.raises(DomainError):
        StateOfLowEnergy(background=bg, window=f, route="nope").fit([1.0])
    with pytest.raises(DomainError):
        StateOfLowEnergy(background=None, window=f).fit([1.0])
    with pytest.raises(DomainError):
        StateOfLowEnergy(background=bg, window=f).fit([-1.0])
    with pytest.raises(DomainError):
        StateOfLowEnergy(background=bg, window=f).fit(np.ones((2, 2)))


def test_power_spectrum_estimator():
    est = PowerSpectrumEstimator().fit()
    P = est.predict(np.array([100.0, 150.0]))
    assert np.all(np.abs(P * (2 * np.pi) ** 2 - 1) < 0.01)
    with pytest.raises(DomainError):
        PowerSpectrumEstimator(eta2=1.5).fit()
    with pytest.raises(DomainError):
        est.predict([0.0])
