"""Full-range angular inner products of rotated discrete eigenmodes.

The azimuthal integral against the product of two rotated-mode denominators
is done exactly: each denominator 1/(c - i b cos phi) has a closed-form
two-sided geometric Fourier series, the pair is convolved in closed form,
and the polynomial numerator is bandlimited so its FFT coefficients are
exact.  The polar integral uses Gauss panels graded toward the sphere poles
where near-branch-point modes peak.  Everything is restricted to the
convergent-rotation regime nu > sqrt(1 + (nu q)^2), where the rotated
harmonic expansions converge on the whole sphere and the pointwise product
integral coincides with the operator-sense orthogonality relation.
"""

import math

import numpy as np

from .errors import ConfigurationError
from .special_functions import gauss_legendre, normalized_p_table, wigner_d_continued
from .spectrum import OpticalMedium, chandrasekhar_g_backward, g_big

__all__ = ["rotated_mode_inner_product"]


def _double_factorial(n: int) -> float:
    out = 1.0
    while n > 1:
        out *= n
        n -= 2
    return out


def _harmonic_const(m: int, conj: bool) -> float:
    """Prefactor relating (1-mu^2)^{|m|/2} e^{+-i m phi} to one Y_{|m|, +-m}."""
    am = abs(m)
    mag = math.sqrt(4.0 * math.pi * math.factorial(2 * am + 1)) / _double_factorial(
        2 * am + 1
    )
    if conj:
        sign = (-1.0) ** am if m < 0 else 1.0
    else:
        sign = (-1.0) ** am if m > 0 else 1.0
    return sign * mag


class _Mode:
    """Closed-form evaluator for one rotated discrete mode (sans denominator)."""

    def __init__(self, medium, m, nu, q, conj):
        self.medium = medium
        self.m = m
        self.am = abs(m)
        self.nu = nu
        self.q = q
        self.kz = math.hypot(1.0, nu * q)
        self.g_coeffs = chandrasekhar_g_backward(self.am, nu, medium.L, medium)
        self.table = wigner_d_continued(self.am, abs(nu) * q)
        self.target = -m if conj else m
        self.const = _harmonic_const(m, conj)
        self.fac = math.sqrt((2.0 * self.am + 1.0) / (4.0 * math.pi))

    def numerator(self, mu, sin_mu, z):
        """const * g^m(nu, u(z)) * rotated-harmonic factor at azimuth z = e^{i phi}.

        mu, sin_mu, z are broadcastable arrays; z may be complex off the
        unit circle (continued azimuth).
        """
        cphi = 0.5 * (z + 1.0 / z)
        u = self.kz * mu + 1j * self.nu * self.q * sin_mu * cphi
        g_val = g_big(self.am, self.nu, u, self.medium, g_coeffs=self.g_coeffs)
        s_val = np.zeros(np.broadcast(mu, z).shape, dtype=complex)
        for mpp in range(-self.am, self.am + 1):
            dv = self.table.d(self.am, mpp, self.target)
            if dv == 0.0:
                continue
            amp = abs(mpp)
            p_here = normalized_p_table(amp, self.am, mu)[self.am - amp]
            cs = (-1.0) ** amp if mpp >= 0 else 1.0
            s_val = s_val + dv * self.fac * cs * p_here * sin_mu**amp * z**mpp
        return self.const * g_val * s_val

    def pole_data(self, mu, sin_mu):
        """(c, b) of the denominator nu - u = c - i b cos(phi)."""
        c = self.nu - self.kz * mu
        b = self.nu * self.q * sin_mu
        return c, b


def _pole_coeffs(c: np.ndarray, b: np.ndarray):
    """Inside root and amplitude of 1/(c - i b cos phi) = amp sum_k z^{|k|} e^{ik phi}."""
    s = np.where(c >= 0, 1.0, -1.0)
    root = np.hypot(c, b)
    z = 1j * s * b / (np.abs(c) + root)
    return z, s / root


def _pair_fourier(z1, a1, z2, a2, kmax: int):
    """[1/(D1 D2)]_j for j = 0..kmax (the sequence is symmetric in j)."""
    j = np.arange(kmax + 1)
    z1p = z1[:, None] ** j
    z2p = z2[:, None] ** j
    prod = z1 * z2
    geo = (prod / (1.0 - prod))[:, None]
    ends = (z1p + z2p) * geo
    dz = z2 - z1
    near = np.abs(dz) < 1e-12 * np.maximum(np.abs(z1) + np.abs(z2), 1e-300)
    with np.errstate(invalid="ignore", divide="ignore"):
        mid = (z2p * z2[:, None] - z1p * z1[:, None]) / dz[:, None]
    mid = np.where(near[:, None], (j + 1) * z1p, mid)
    return (a1 * a2)[:, None] * (ends + mid)


def _integral(medium, q, m1, nu1, m2, nu2, n_mu, n_phi, kmax):
    mode1 = _Mode(medium, m1, nu1, q, False)
    mode2 = _Mode(medium, m2, nu2, q, True)
    pref = 0.25 * medium.albedo**2 * nu1 * nu2

    grading = np.array([0.0, 0.004, 0.02, 0.1, 0.3, 0.7, 0.9, 0.98, 0.996, 1.0])
    edges = np.concatenate([-1.0 + grading[:-1], 1.0 - grading[::-1]])
    rule = gauss_legendre(n_mu)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    z_circ = np.exp(1j * phi)
    ks = np.arange(-kmax, kmax + 1)

    total = 0.0 + 0.0j
    for a, b_edge in zip(edges[:-1], edges[1:]):
        mu, wts = rule.mapped(a, b_edge)
        sin = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
        numer = (
            pref
            * mu[:, None]
            * mode1.numerator(mu[:, None], sin[:, None], z_circ[None, :])
            * mode2.numerator(mu[:, None], sin[:, None], z_circ[None, :])
        )
        coeffs = np.fft.fft(numer, axis=1) / n_phi
        c1, b1 = mode1.pole_data(mu, sin)
        c2, b2 = mode2.pole_data(mu, sin)
        z1, a1 = _pole_coeffs(c1, b1)
        z2, a2 = _pole_coeffs(c2, b2)
        pair = _pair_fourier(z1, a1, z2, a2, kmax)
        sel = coeffs[:, ks % n_phi]
        i_mu = 2.0 * np.pi * np.sum(sel * pair[:, np.abs(ks)], axis=1)
        total += np.dot(wts, i_mu)
    return total


def rotated_mode_inner_product(
    medium: OpticalMedium,
    q: float,
    m1: int,
    nu1: float,
    m2: int,
    nu2: float,
    n_mu: int = 60,
    n_phi: int = None,
) -> complex:
    """int_S2 mu (R_{k(nu1,q)} Phi_{nu1}^{m1}) (R_{k(nu2,q)} Phi_{nu2}^{m2 *}) ds.

    Both eigenvalues must be discrete (> 1).  Equal modes give the diagonal
    2 pi khat_z(nu q) N^m(nu); distinct modes vanish up to quadrature error.

    The evaluation requires the convergent-rotation regime nu_i > khat_z,
    where the rotated harmonic series of each mode converges everywhere on
    the sphere and the pointwise product integral equals the operator-sense
    inner product of the orthogonality relation.  Beyond it (mode direction
    crossing the sphere) the quantity only exists by analytic continuation,
    which is out of numerical scope here.
    """
    if nu1 <= 1.0 or nu2 <= 1.0:
        raise ConfigurationError("inner products are for discrete eigenvalues > 1")
    if q < 0:
        raise ConfigurationError("q must be >= 0")
    for nu in (nu1, nu2):
        if nu <= math.hypot(1.0, nu * q):
            raise ConfigurationError(
                f"nu={nu} at q={q} leaves the convergent-rotation regime "
                "(nu <= sqrt(1 + (nu q)^2))"
            )
    kmax = 2 * medium.L + abs(m1) + abs(m2) + 2
    if n_phi is None:
        n_phi = 1 << max(5, int(math.ceil(math.log2(2 * kmax + 4))))
    return complex(_integral(medium, q, m1, nu1, m2, nu2, n_mu, n_phi, kmax))
