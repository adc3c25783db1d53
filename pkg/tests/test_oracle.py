import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import small_waveform
from risbound.arrays import ura
from risbound.geometry import SPEED_OF_LIGHT, Pose, derive_path_params
from risbound.labels import label_values, zeta_labels
from risbound.oracle import compute_mu, fd_fim
from risbound.scenario import Node, Scenario, desk_scenario
from risbound.waveform import los_pathloss


def gain_index(labels):
    return [i for i, l in enumerate(labels) if l.kind.startswith("beta")]


def test_zero_gains_give_zero_signal(desk):
    labels = zeta_labels(desk.m1, True)
    x = label_values(labels, desk.path_params())
    x[gain_index(labels)] = 0.0
    assert not compute_mu(desk, x, labels).values.any()


def test_linear_in_gains(desk):
    labels = zeta_labels(desk.m1, True)
    x = label_values(labels, desk.path_params())
    mu = compute_mu(desk, x, labels).values
    x2 = x.copy()
    x2[gain_index(labels)] *= -2.5
    assert_allclose(compute_mu(desk, x2, labels).values, -2.5 * mu, rtol=1e-13, atol=0)


def test_single_element_los_signal():
    cfg = small_waveform(n_subcarriers=4, n_symbols=2)
    one = ura(1, 1, cfg.wavelength / 2)
    sc = Scenario(Node(Pose([0.0, 0.0, 40.0]), one), Node(Pose([30.0, 40.0, 40.0]), one), (), cfg,
                  los_beta=0.6 - 0.8j)
    mu = compute_mu(sc).values
    assert mu.shape == (2, 4, 1, 1)
    tau = 50.0 / SPEED_OF_LIGHT
    expected = (0.6 - 0.8j) * np.sqrt(los_pathloss(cfg.wavelength, 50.0)) * np.exp(-1j * cfg.omegas() * tau)
    p = derive_path_params(sc, 0)
    assert p.rho_inv == pytest.approx(los_pathloss(cfg.wavelength, 50.0))
    for t in range(2):
        assert_allclose(mu[t, :, 0, 0], expected, rtol=1e-12)


def test_richardson_agrees_with_plain_differences(desk):
    plain = fd_fim(desk).values
    rich = fd_fim(desk, steps={"angle": 1e-3, "tau_samples": 1e-3, "beta": 1e-3}, richardson=True).values
    assert np.linalg.norm(plain - rich) / np.linalg.norm(rich) <= 1e-4


def test_rejects_bad_steps(desk):
    with pytest.raises(ValueError):
        fd_fim(desk, steps={"angle": 0.0})


def test_params_must_match_labels(desk):
    with pytest.raises(ValueError):
        compute_mu(desk, np.zeros(3), zeta_labels(desk.m1, True))


def test_oracle_does_not_use_closed_form():
    import risbound.oracle as oracle
    src = open(oracle.__file__).read()
    assert "fim_core" not in src and "FACTOR_TABLE" not in src


def test_psd_and_symmetric():
    J = fd_fim(desk_scenario(seed=9)).values
    assert_allclose(J, J.T)
    w = np.linalg.eigvalsh(J)
    assert w[0] >= -1e-8 * w[-1]
