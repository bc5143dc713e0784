import math

import numpy as np
import pytest
from scipy.special import lqn

from fnrte.special_functions import (
    complex_sqrt,
    gauss_legendre,
    gauss_legendre_extended,
    legendre_p,
    normalized_p,
    normalized_p_seed,
    normalized_p_table,
    normalized_q_table,
    wigner_d_continued,
)


def test_legendre_low_degrees():
    assert legendre_p(0, 0.3) == 1.0
    assert legendre_p(1, 0.5) == 0.5
    assert legendre_p(2, 0.5) == pytest.approx(-0.125, abs=1e-15)


def test_legendre_rejects_negative_degree():
    with pytest.raises(ValueError):
        legendre_p(-1, 0.0)


def test_normalized_p_seeds():
    # seed is independent of the argument
    assert normalized_p(1, 1, 0.37) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert normalized_p(2, 2, -0.85) == pytest.approx(3 / math.sqrt(24), abs=1e-15)
    assert normalized_p(1, 0, 0.25) == pytest.approx(0.25, abs=1e-15)


def test_normalized_p_negative_order():
    mu = 0.42
    assert normalized_p(3, -2, mu) == pytest.approx(normalized_p(3, 2, mu), rel=1e-14)
    assert normalized_p(3, -1, mu) == pytest.approx(-normalized_p(3, 1, mu), rel=1e-14)


def test_normalized_p_domain():
    with pytest.raises(ValueError):
        normalized_p(2, 3, 0.1)


def test_p_recurrence_residual():
    rng = np.random.default_rng(7)
    for _ in range(60):
        l = int(rng.integers(1, 31))
        m = int(rng.integers(0, l + 1))
        mu = rng.uniform(-1, 1)
        tab = normalized_p_table(m, l + 1, mu)
        if l == m:
            continue
        res = (
            math.sqrt(l * l - m * m) * tab[l - 1 - m]
            - (2 * l + 1) * mu * tab[l - m]
            + math.sqrt((l + 1) ** 2 - m * m) * tab[l + 1 - m]
        )
        scale = max(abs((2 * l + 1) * mu * tab[l - m]), 1.0)
        assert abs(res) / scale < 1e-10


@pytest.mark.parametrize("m", [0, 1, 3, 7])
def test_p_orthogonality(m):
    rule = gauss_legendre(64)
    tab = normalized_p_table(m, 20, rule.nodes)
    w = rule.weights * (1.0 - rule.nodes**2) ** m
    gram = np.einsum("ln,n,kn->lk", tab, w, tab)
    expect = np.diag([2.0 / (2 * l + 1) for l in range(m, 21)])
    assert np.abs(gram - expect).max() < 1e-10


def test_gauss_legendre_small_rules():
    r1 = gauss_legendre(1)
    assert r1.nodes[0] == 0.0 and r1.weights[0] == 2.0
    r2 = gauss_legendre(2)
    assert np.allclose(r2.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    assert np.allclose(r2.weights, [1.0, 1.0], atol=1e-15)


def test_gauss_legendre_exactness():
    r = gauss_legendre(16)
    val = np.dot(r.weights, r.nodes**30)
    assert val == pytest.approx(2.0 / 31.0, abs=1e-13)
    assert r.weights.sum() == pytest.approx(2.0, abs=1e-12)


def test_gauss_legendre_rejects_zero():
    with pytest.raises(ValueError):
        gauss_legendre(0)


def test_gauss_legendre_extended_matches_double():
    x, w = gauss_legendre_extended(24)
    r = gauss_legendre(24)
    assert np.abs(x.astype(float) - r.nodes).max() < 1e-14
    assert abs(float(w.sum()) - 2.0) < 1e-18


def test_wigner_identity_at_zero():
    table = wigner_d_continued(8, 0.0)
    for l in range(9):
        assert np.abs(table.block(l) - np.eye(2 * l + 1)).max() < 1e-14


def test_wigner_degree_one_values():
    t = wigner_d_continued(1, 1.0)
    assert t.d(1, 0, 0) == pytest.approx(math.sqrt(2.0), abs=1e-15)
    s = math.hypot(1.0, 1.0)
    assert t.d(1, 1, -1) == pytest.approx((1 - s) / 2, abs=1e-15)
    assert t.d(1, 1, 0) == pytest.approx(-1j / math.sqrt(2), abs=1e-15)
    assert t.d(1, 1, 1) == pytest.approx((1 + s) / 2, abs=1e-15)


@pytest.mark.parametrize("x", [0.0, 0.1, 1.0, 5.0])
def test_wigner_symmetries_and_unitarity(x):
    table = wigner_d_continued(25, x)
    for l in (1, 5, 12, 25):
        blk = table.block(l)
        scale = max(1.0, np.abs(blk).max())
        assert np.abs(blk - blk[::-1, ::-1].T).max() / scale < 1e-10
        mm = np.arange(-l, l + 1)
        sign = (-1.0) ** (mm[:, None] + mm[None, :])
        assert np.abs(blk - sign * blk.T).max() / scale < 1e-10
        gram = blk.T @ blk
        # residual relative to the size of the summed products
        term_scale = max((np.abs(blk) ** 2).sum(axis=0).max(), 1.0)
        assert np.abs(gram - np.eye(2 * l + 1)).max() / term_scale < 1e-10


def test_wigner_unitarity_spec_example():
    t = wigner_d_continued(2, 0.7)
    s = sum(t.d(2, mp, 1) * t.d(2, mp, -1) for mp in range(-2, 3))
    assert abs(s) < 1e-12


def test_wigner_continuation_limit():
    table = wigner_d_continued(10, 1e-8)
    for l in range(11):
        assert np.abs(table.block(l) - np.eye(2 * l + 1)).max() < 1e-6


def test_wigner_matches_matrix_exponential():
    # independent construction: d^l[i tau(x)] = exp(tau J_y), tau = asinh(x)
    from scipy.linalg import expm

    x = 2.3
    tau = math.asinh(x)
    table = wigner_d_continued(12, x)
    for l in (1, 4, 12):
        m = np.arange(-l, l + 1)
        jp = np.zeros((2 * l + 1, 2 * l + 1))
        for i, mm in enumerate(m[:-1]):
            jp[i + 1, i] = math.sqrt((l - mm) * (l + mm + 1))
        jy = (jp - jp.T) / 2j
        ref = expm(tau * jy)
        blk = table.block(l)
        assert np.abs(blk - ref).max() / np.abs(ref).max() < 1e-12


def test_wigner_rejects_bad_argument():
    with pytest.raises(ValueError):
        wigner_d_continued(3, -0.5)
    with pytest.raises(ValueError):
        wigner_d_continued(3, math.inf)


def test_wigner_extended_dtype_matches():
    t64 = wigner_d_continued(10, 3.7)
    tld = wigner_d_continued(10, 3.7, dtype=np.clongdouble)
    blk64 = t64.block(10)
    blkld = tld.block(10).astype(complex)
    assert np.abs(blk64 - blkld).max() / np.abs(blk64).max() < 1e-13


def test_normalized_q_matches_scipy_legendre():
    for w in (1.2, 2.0, 30.0):
        q = normalized_q_table(0, 7, w)
        ref, _ = lqn(7, w)
        assert np.abs(q - ref).max() / np.abs(ref).max() < 1e-12


def test_normalized_q_integral_definition():
    # q_l^m(w) = (1/2) int p_l^m (1-mu^2)^m /(w-mu) dmu, pole subtracted
    rule = gauss_legendre(200)
    for (m, l, w) in [(1, 3, 1.3), (2, 5, 1.5), (3, 4, 1.2)]:
        mu = rule.nodes
        f = normalized_p_table(m, l, mu)[-1] * (1 - mu**2) ** m
        fw = normalized_p_table(m, l, w)[-1] * (1 - w**2) ** m
        reg = np.dot(rule.weights, (f - fw) / (w - mu))
        direct = 0.5 * (reg + fw * math.log((w + 1) / (w - 1)))
        miller = normalized_q_table(m, l, w)[-1]
        assert miller == pytest.approx(direct, rel=1e-10)


def test_complex_sqrt_branch():
    for z in (4.0, -4.0, 3 - 4j, -3 - 4j, 1j, -1j):
        w = complex(complex_sqrt(z))
        assert w * w == pytest.approx(z, rel=1e-14)
        arg = math.atan2(w.imag, w.real)
        assert 0.0 <= arg < math.pi or abs(arg) < 1e-15


def test_seed_extended_precision():
    for m in (0, 1, 5, 13, 25):
        a = normalized_p_seed(m)
        b = float(normalized_p_seed(m, dtype=np.longdouble))
        assert a == pytest.approx(b, rel=1e-14)
