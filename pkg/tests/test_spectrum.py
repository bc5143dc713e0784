import math

import numpy as np
import pytest

from fnrte.errors import ConfigurationError
from fnrte.spectrum import (
    OpticalMedium,
    SpectralBasis,
    build_B_matrix,
    chandrasekhar_g_backward,
    chandrasekhar_g_forward,
    collocation_points,
    discrete_eigenvalues,
    g_big,
    g_recurrence_residual,
    h_coeff,
    lambda_dispersion,
    normalization_factor,
)

MED = OpticalMedium(1.0, 9.0, 0.9, 3)  # albedo 0.9
ISO = OpticalMedium.from_betas(0.9, 8.1, [1.0])  # L = 0 surrogate, albedo 0.9
PAPER_FWD = OpticalMedium(0.05, 100.0, 0.9, 9)


def bisect_isotropic_root(albedo, lo=1.0 + 1e-14, hi=50.0):
    """Independent oracle: root of 1 = (albedo nu / 2) ln((nu+1)/(nu-1))."""
    f = lambda nu: 1.0 - 0.5 * albedo * nu * math.log((nu + 1.0) / (nu - 1.0))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_medium_validation():
    with pytest.raises(ConfigurationError):
        OpticalMedium(1.0, 9.0, 0.0, 3)  # isotropic rejected
    with pytest.raises(ConfigurationError):
        OpticalMedium(1.0, 9.0, 1.0, 3)
    with pytest.raises(ConfigurationError):
        OpticalMedium(1.0, 9.0, 0.5, 0)
    with pytest.raises(ConfigurationError):
        OpticalMedium(-1.0, 9.0, 0.5, 2)
    with pytest.raises(ConfigurationError):
        OpticalMedium.from_betas(1.0, 9.0, [1.0, 3.0])  # beta_1 = 2l+1 excluded


def test_medium_derived_quantities():
    assert MED.albedo == pytest.approx(0.9)
    assert MED.beta[0] == 1.0
    assert MED.beta[1] == pytest.approx(3 * 0.9)
    assert MED.ell_star == pytest.approx(1.0 / (10.0 - 9.0 * 0.9))
    assert all(0 < MED.beta[l] < 2 * l + 1 for l in range(1, MED.L + 1))


def test_h_coeff_examples():
    assert h_coeff(0, MED) == pytest.approx(1.0 - 0.9)
    assert h_coeff(1, MED) == pytest.approx(3.0 - 0.9 * 2.7)  # 0.57
    assert h_coeff(MED.L + 1, MED) == 2 * (MED.L + 1) + 1


def test_forward_seed_and_first_step():
    g = chandrasekhar_g_forward(0, 0.37, 1, MED)
    assert g[0] == 1.0
    assert g[1] == pytest.approx(0.37 * (1.0 - 0.9), rel=1e-14)
    g1 = chandrasekhar_g_forward(1, 0.5, 1, MED)
    assert g1[0] == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_forward_parity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        nu = rng.uniform(-1, 1)
        m = int(rng.integers(0, MED.L + 1))
        gp = chandrasekhar_g_forward(m, nu, 6, MED)
        gm = chandrasekhar_g_forward(m, -nu, 6, MED)
        for l in range(m, 7):
            assert gm[l - m] == pytest.approx(
                (-1.0) ** (l + m) * gp[l - m], abs=1e-13
            )


def test_build_B_matrix_examples():
    mat = build_B_matrix(0, 1, ISO)
    assert mat.shape == (2, 2)
    assert mat[0, 1] == pytest.approx(math.sqrt(1.0 / (3.0 * 0.1)), rel=1e-12)
    assert build_B_matrix(0, 9, ISO).shape == (10, 10)
    with pytest.raises(ConfigurationError):
        build_B_matrix(0, 2, MED)  # l_B < L
    with pytest.raises(ConfigurationError):
        build_B_matrix(5, 9, MED)  # |m| > L


def test_B_spectrum_symmetry():
    mat = build_B_matrix(0, 8, MED)
    vals = np.sort(np.linalg.eigvalsh(mat))
    assert np.abs(vals + vals[::-1]).max() < 1e-12  # +- pairs (odd dim has 0)


def test_isotropic_surrogate_eigenvalue_oracle():
    nus = discrete_eigenvalues(0, ISO, l_B=150)
    assert len(nus) == 1
    root = bisect_isotropic_root(0.9)
    assert nus[0] == pytest.approx(root, abs=1e-8)


def test_discrete_eigenvalue_stability_in_lB():
    a = discrete_eigenvalues(0, PAPER_FWD, l_B=100)
    b = discrete_eigenvalues(0, PAPER_FWD, l_B=200)
    assert len(a) == len(b)
    assert np.abs(a - b).max() < 1e-9


def test_dispersion_residual_at_eigenvalues():
    for m in range(0, 3):
        for nu in discrete_eigenvalues(m, PAPER_FWD, l_B=120):
            g_at = chandrasekhar_g_backward(m, nu, PAPER_FWD.L, PAPER_FWD)
            lam = lambda_dispersion(m, float(nu), PAPER_FWD, g_coeffs=g_at)
            assert abs(lam) < 1e-7


def test_lambda_sign_change_across_root():
    nu0 = discrete_eigenvalues(0, ISO, l_B=150)[0]
    lo = lambda_dispersion(0, nu0 - 0.01, ISO)
    hi = lambda_dispersion(0, nu0 + 0.01, ISO)
    assert lo * hi < 0


def test_lambda_limits():
    faint = OpticalMedium(1e6, 1e-4, 0.5, 2)  # albedo ~ 1e-10
    assert lambda_dispersion(0, 1.5, faint) == pytest.approx(1.0, abs=1e-9)
    # w -> inf: the integrand term of each degree tends to a constant and the
    # isotropic-part limit is 1 - albedo (from w q_0(w) -> 1)
    assert lambda_dispersion(0, 1e6, ISO) == pytest.approx(1.0 - 0.9, rel=1e-6)
    with pytest.raises(ConfigurationError):
        lambda_dispersion(0, 0.5, MED)


def test_backward_recursion_contract():
    nus = discrete_eigenvalues(0, PAPER_FWD, l_B=120)
    for nu in nus:
        vals = chandrasekhar_g_backward(0, float(nu), 12, PAPER_FWD)
        assert vals[0] == pytest.approx(1.0, abs=1e-15)  # seed restored
        assert g_recurrence_residual(0, float(nu), vals, PAPER_FWD) < 1e-8


def test_backward_decay_is_minimal_solution():
    nu = float(discrete_eigenvalues(0, ISO, l_B=150)[0])
    vals = chandrasekhar_g_backward(0, nu, 30, ISO)
    assert abs(vals[30]) < abs(vals[0]) * 1e-6


def test_forward_backward_agree_near_branch_point():
    # weak dichotomy just above 1: both recursions are accurate at low degree
    med = OpticalMedium(4.0, 6.0, 0.9, 3)  # albedo 0.6
    nus = discrete_eigenvalues(0, med, l_B=120)
    nu = float(nus[-1])
    assert nu < 1.3
    fwd = chandrasekhar_g_forward(0, nu, 5, med)
    bwd = chandrasekhar_g_backward(0, nu, 5, med)
    assert np.abs(fwd - bwd).max() / np.abs(fwd).max() < 1e-6


def test_g_big_reductions():
    iso_like = g_big(0, 0.7, 0.3, ISO)
    assert iso_like == pytest.approx(1.0, rel=1e-14)  # single-term sum
    med = OpticalMedium(1.0, 9.0, 0.9, 1)
    val = g_big(0, 0.5, 0.25, med)
    expect = 1.0 + med.beta[1] * 0.25 * 0.5 * (1.0 - med.albedo)
    assert val == pytest.approx(expect, rel=1e-13)


def test_g_big_reflection():
    val1 = g_big(1, -0.5, 0.3, MED)
    val2 = g_big(1, 0.5, -0.3, MED)
    assert val1 == pytest.approx(val2, rel=1e-13)
    with pytest.raises(ConfigurationError):
        g_big(MED.L + 1, 0.5, 0.3, MED)


def test_normalization_positive_for_conservative_media():
    med = OpticalMedium(0.05, 100.0, 0.01, 9)
    nu0 = float(discrete_eigenvalues(0, med, l_B=100)[0])
    assert normalization_factor(0, nu0, med) > 0


def test_collocation_examples():
    pts = collocation_points(1, 4, np.array([2.0]))
    assert np.allclose(
        pts,
        [2.0, math.cos(math.pi / 8), math.cos(math.pi / 4), math.cos(3 * math.pi / 8)],
        atol=1e-12,
    )
    only_disc = collocation_points(0, 2, np.array([3.0, 1.5]))
    assert np.allclose(only_disc, [3.0, 1.5])
    cont = collocation_points(0, 6, np.zeros(0))
    assert np.all((cont > 0) & (cont < 1))
    assert np.all(np.diff(cont) < 0)
    with pytest.raises(ConfigurationError):
        collocation_points(0, 1, np.array([2.0, 1.5]))


def test_spectral_basis_build():
    basis = SpectralBasis.build(0, PAPER_FWD, 9)
    n_col = (9 - 0) // 2 + 1
    assert len(basis.collocation) == n_col
    assert basis.g_table.shape == (n_col, 9 + 2)
    assert np.all(basis.discrete > 1.0)
    # rows satisfy the recurrence
    for j, xi in enumerate(basis.collocation):
        res = g_recurrence_residual(0, float(xi), basis.g_table[j], PAPER_FWD)
        assert res < 1e-8
