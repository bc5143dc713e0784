import math

import numpy as np
import pytest

from fnrte.errors import ConfigurationError
from fnrte.rotated_frames import PlaneWaveFrame, frame_angles, khat_z, rotated_mu
from fnrte.special_functions import gauss_legendre


def test_khat_z_values():
    assert khat_z(0.0) == 1.0
    assert khat_z(1.0) == pytest.approx(math.sqrt(2.0), abs=1e-15)
    assert khat_z(-2.5) == khat_z(2.5)
    with pytest.raises(ConfigurationError):
        khat_z(math.nan)


def test_unit_vector_identity():
    rng = np.random.default_rng(11)
    for _ in range(40):
        nu = rng.uniform(-5, 5)
        if abs(nu) < 1e-3:
            continue
        qv = rng.uniform(-3, 3, size=2)
        frame = PlaneWaveFrame(nu, tuple(qv))
        assert abs(frame.unit_dot() - 1.0) < 1e-12


def test_rotated_mu_identity_at_zero_frequency():
    mu = np.linspace(-1, 1, 9)
    out = rotated_mu(0.7, 0.0, mu, 1.3)
    assert np.abs(out - mu).max() < 1e-15


def test_rotated_mu_poles_and_structure():
    val = rotated_mu(0.5, 2.0, 1.0, 0.3)
    assert val == pytest.approx(khat_z(1.0), abs=1e-14)
    val = rotated_mu(0.5, 2.0, -1.0, 0.3)
    assert val == pytest.approx(-khat_z(1.0), abs=1e-14)
    mu, phi = 0.42, 1.1
    v = rotated_mu(0.8, 1.5, mu, phi)
    assert v.real == pytest.approx(khat_z(0.8 * 1.5) * mu, abs=1e-14)


def test_rotated_mu_odd_average():
    # spherical mean of the rotated cosine vanishes (odd under s -> -s)
    rule = gauss_legendre(24)
    phi = 2 * np.pi * np.arange(64) / 64
    vals = rotated_mu(0.6, 1.2, rule.nodes[:, None], phi[None, :])
    mean = np.einsum("n,np->", rule.weights, vals) * (2 * np.pi / 64)
    assert abs(mean) < 1e-12


def test_frame_angles_cases():
    x, phik = frame_angles(0.5, (2.0, 0.0))
    assert x == pytest.approx(1.0) and phik == 0.0
    x, phik = frame_angles(-0.5, (2.0, 0.0))
    assert x == pytest.approx(1.0) and phik == pytest.approx(math.pi)
    x, phik = frame_angles(0.5, (0.0, 0.0))
    assert x == 0.0 and phik == 0.0
    with pytest.raises(ConfigurationError):
        frame_angles(0.0, (1.0, 0.0))


def test_frame_properties():
    frame = PlaneWaveFrame(-0.7, (1.0, 1.0))
    assert frame.q == pytest.approx(math.sqrt(2.0))
    assert frame.x == pytest.approx(0.7 * math.sqrt(2.0))
    assert frame.cos_theta == pytest.approx(khat_z(frame.x))
    assert frame.sin_theta == pytest.approx(1j * frame.x)
    assert frame.phi_khat == pytest.approx(math.pi / 4 + math.pi)
    with pytest.raises(ConfigurationError):
        PlaneWaveFrame(0.0, (1.0, 0.0))
