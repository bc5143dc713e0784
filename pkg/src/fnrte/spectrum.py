"""Azimuthal spectral machinery of the one-dimensional transport operator.

Holds the optical-medium description, the transport three-term polynomial
family g_l^m, the tridiagonal eigenvalue problem locating discrete
eigenvalues nu_j^m > 1, the dispersion function, mode normalization factors,
and the collocation abscissae used by the boundary solver.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigurationError, SolverError
from .special_functions import (
    gauss_legendre,
    normalized_p_seed,
    normalized_p_table,
    normalized_q_table,
)

__all__ = [
    "OpticalMedium",
    "SpectralBasis",
    "build_B_matrix",
    "chandrasekhar_g_backward",
    "chandrasekhar_g_forward",
    "collocation_points",
    "discrete_eigenvalues",
    "g_big",
    "g_recurrence_residual",
    "h_coeff",
    "lambda_dispersion",
    "normalization_factor",
]


@dataclass(frozen=True)
class OpticalMedium:
    """Homogeneous medium with a degree-L Legendre phase function.

    Constructed from absorption/scattering coefficients and the asymmetry
    parameter g, which induces beta_l = (2l+1) g^l.  Internally all lengths
    are normalized by the total attenuation mu_t.
    """

    mu_a: float
    mu_s: float
    g: float
    L: int
    beta: tuple = None

    def __post_init__(self):
        if self.mu_a <= 0 or self.mu_s <= 0:
            raise ConfigurationError("mu_a and mu_s must be positive")
        if not 0.0 < self.albedo < 1.0:
            raise ConfigurationError("single-scattering albedo must lie in (0,1)")
        if self.L < 0:
            raise ConfigurationError("phase-function degree L must be >= 0")
        if self.beta is None:
            # isotropic scattering needs a different collocation scheme
            if not 0.0 < self.g < 1.0:
                raise ConfigurationError("asymmetry g must lie in (0,1)")
            if self.L < 1:
                raise ConfigurationError("L must be >= 1")
            object.__setattr__(
                self,
                "beta",
                tuple((2 * l + 1) * self.g**l for l in range(self.L + 1)),
            )
        else:
            beta = tuple(float(b) for b in self.beta)
            if len(beta) != self.L + 1:
                raise ConfigurationError("beta must have L+1 entries")
            if abs(beta[0] - 1.0) > 1e-12:
                raise ConfigurationError("beta_0 must equal 1")
            for l in range(1, len(beta)):
                if not 0.0 < beta[l] < 2 * l + 1:
                    raise ConfigurationError("beta_l must lie in (0, 2l+1)")
            object.__setattr__(self, "beta", beta)

    @classmethod
    def from_betas(cls, mu_a: float, mu_s: float, beta) -> "OpticalMedium":
        """Medium with explicit phase-function coefficients (beta_0 = 1).

        Permits L = 0, the isotropic surrogate used by dispersion oracles;
        the standard constructor enforces g > 0 and L >= 1.
        """
        beta = tuple(float(b) for b in beta)
        g = beta[1] / 3.0 if len(beta) > 1 else 0.0
        return cls(mu_a, mu_s, g, len(beta) - 1, beta)

    @property
    def mu_t(self) -> float:
        return self.mu_a + self.mu_s

    @property
    def albedo(self) -> float:
        return self.mu_s / (self.mu_a + self.mu_s)

    @property
    def ell_star(self) -> float:
        """Transport mean free path 1/(mu_t - mu_s g) in physical units."""
        return 1.0 / (self.mu_t - self.mu_s * self.g)


def h_coeff(l: int, medium: OpticalMedium) -> float:
    """h_l = 2l+1 - albedo*beta_l for l <= L, else 2l+1."""
    if l < 0:
        raise ConfigurationError("degree must be nonnegative")
    if l <= medium.L:
        return 2 * l + 1 - medium.albedo * medium.beta[l]
    return float(2 * l + 1)


def h_vector(medium: OpticalMedium, l_hi: int, dtype=float) -> np.ndarray:
    """h_l for l = 0..l_hi, evaluated in the requested floating dtype.

    The stored medium parameters are exact inputs; extended-precision
    assembly recomputes the derived quantities from them in that dtype.
    """
    dt = np.dtype(dtype).type
    albedo = dt(medium.mu_s) / (dt(medium.mu_a) + dt(medium.mu_s))
    out = np.array([dt(2 * l + 1) for l in range(l_hi + 1)], dtype=dtype)
    for l in range(min(medium.L, l_hi) + 1):
        out[l] = out[l] - albedo * dt(medium.beta[l])
    return out


def chandrasekhar_g_forward(
    m: int, nu, l_hi: int, medium: OpticalMedium, dtype=float
) -> np.ndarray:
    """g_l^m(nu) for l = m..l_hi by forward recursion from the seed term.

    This evaluates the polynomial family exactly; it is the right tool on
    the continuous spectrum |nu| <= 1 and for generic (non-eigenvalue)
    arguments.  Accepts scalar or array nu.
    """
    m = abs(m)
    if l_hi < m:
        raise ConfigurationError("l_hi must be >= m")
    dt = np.dtype(dtype).type
    nu = np.asarray(nu, dtype=dtype)
    h = h_vector(medium, l_hi, dtype=dtype)
    out = np.zeros((l_hi - m + 1,) + nu.shape, dtype=dtype)
    out[0] = normalized_p_seed(m, dtype=dt)
    for l in range(m, l_hi):
        a = np.sqrt(dt((l + 1) ** 2 - m * m))
        b = np.sqrt(dt(l * l - m * m)) if l > m else dt(0.0)
        prev = out[l - m - 1] if l > m else dt(0.0)
        out[l - m + 1] = (nu * h[l] * out[l - m] - b * prev) / a
    return out


def _backward_pass(m, nu, l_hi, l_start, h, dtype):
    dt = np.dtype(dtype).type
    g_next, g_cur = dt(0.0), dt(1.0)
    vals = np.zeros(l_start - m + 1, dtype=dtype)
    vals[-1] = g_cur
    for l in range(l_start, m, -1):
        a = np.sqrt(dt((l + 1) ** 2 - m * m))
        b = np.sqrt(dt(l * l - m * m))
        g_prev = (nu * h[l] * g_cur - a * g_next) / b
        g_next, g_cur = g_cur, g_prev
        vals[l - 1 - m] = g_prev
        if abs(g_prev) > 1e250:
            vals /= abs(g_prev)
            g_next /= abs(g_prev)
            g_cur = vals[l - 1 - m]
    return vals[: l_hi - m + 1]


def chandrasekhar_g_backward(
    m: int,
    nu: float,
    l_hi: int,
    medium: OpticalMedium,
    start_extra: int = 40,
    rtol: float = None,
    max_doublings: int = 8,
    dtype=float,
) -> np.ndarray:
    """g_l^m(nu) for l = m..l_hi by Miller-style backward recursion.

    Intended for discrete eigenvalues nu > 1, where the wanted solution is
    minimal and forward recursion loses all accuracy.  The start degree is
    raised until the seed-normalized values stabilize to `rtol`; failure to
    converge raises SolverError with the achieved residual.
    """
    m = abs(m)
    if l_hi < m:
        raise ConfigurationError("l_hi must be >= m")
    dt = np.dtype(dtype).type
    if rtol is None:
        # 1e-10 matches the double-precision contract; extended runs tighten
        rtol = max(1e-10 * float(np.finfo(dtype).eps) / 2.3e-16, 1e-17)
    seed = normalized_p_seed(m, dtype=dt)
    h = h_vector(medium, l_hi + start_extra * 2**max_doublings, dtype=dtype)
    nu = dt(nu)
    l_start = l_hi + start_extra
    prev = None
    err = math.inf
    for _ in range(max_doublings):
        vals = _backward_pass(m, nu, l_hi, l_start, h, dtype)
        if vals[0] == 0.0:
            raise SolverError("backward recursion produced a vanishing seed entry")
        vals = vals * (seed / vals[0])
        if prev is not None:
            scale = np.maximum(np.abs(vals), np.abs(vals).max() * 1e-30)
            err = np.max(np.abs(vals - prev) / scale)
            if err < rtol:
                return vals
        prev = vals
        l_start *= 2
    raise SolverError(
        f"backward recursion did not stabilize (m={m}, nu={nu}); "
        f"achieved residual {err:.3e}"
    )


def g_recurrence_residual(m: int, nu: float, values: np.ndarray, medium: OpticalMedium) -> float:
    """Largest scaled residual of the three-term relation over interior degrees."""
    m = abs(m)
    worst = 0.0
    for l in range(m + 1, m + len(values) - 1):
        a = math.sqrt((l + 1.0) ** 2 - m * m)
        b = math.sqrt(l * l - m * m)
        res = nu * h_coeff(l, medium) * values[l - m] - a * values[l - m + 1] - b * values[l - m - 1]
        scale = max(abs(values[l - m]) * abs(nu) * h_coeff(l, medium), 1e-300)
        worst = max(worst, abs(res) / scale)
    return worst


def _b_offdiagonal(m: int, l_B: int, medium: OpticalMedium) -> np.ndarray:
    m = abs(m)
    ls = np.arange(m + 1, l_B + 1)
    h = np.array([h_coeff(l, medium) for l in range(m, l_B + 1)])
    return np.sqrt((ls * ls - m * m) / (h[1:] * h[:-1]))


def build_B_matrix(m: int, l_B: int, medium: OpticalMedium) -> np.ndarray:
    """Zero-diagonal symmetric tridiagonal matrix whose eigenvalues locate nu_j^m.

    Rows are indexed by degree l = |m| .. l_B; the off-diagonal entries are
    b_l = sqrt((l^2 - m^2)/(h_l h_{l-1})).
    """
    if l_B < medium.L:
        raise ConfigurationError("l_B must be >= L")
    if abs(m) > medium.L:
        raise ConfigurationError("|m| must not exceed L")
    b = _b_offdiagonal(m, l_B, medium)
    n = l_B - abs(m) + 1
    mat = np.zeros((n, n))
    idx = np.arange(n - 1)
    mat[idx, idx + 1] = b
    mat[idx + 1, idx] = b
    return mat


def discrete_eigenvalues(m: int, medium: OpticalMedium, l_B: int = None) -> np.ndarray:
    """Positive eigenvalues of B(m) strictly above 1, sorted descending.

    Eigenvalues within 1e-9 of 1 are continuum contamination and dropped.
    For |m| > L there is no scattering coupling at order m and the discrete
    spectrum is empty.
    """
    if abs(m) > medium.L:
        return np.zeros(0)
    if l_B is None:
        l_B = max(4 * medium.L, 60)
    b = _b_offdiagonal(m, l_B, medium)
    bound = 2.0 * b.max() + 1.0
    vals = eigh_tridiagonal(
        np.zeros(l_B - abs(m) + 1),
        b,
        eigvals_only=True,
        select="v",
        select_range=(1.0 + 1e-9, bound),
    )
    return np.sort(vals)[::-1].copy()


def g_big(m: int, nu: float, mu, medium: OpticalMedium, g_coeffs: np.ndarray = None):
    """g^m(nu, mu) = sum_{l=|m|}^L beta_l p_l^m(mu) g_l^m(nu).

    `g_coeffs` may supply precomputed g_l^m(nu) (backward-recursion values at
    a discrete eigenvalue); by default the forward polynomial values are used.
    The second argument may be real or complex, scalar or array.
    """
    m = abs(m)
    if m > medium.L:
        raise ConfigurationError("|m| must not exceed L")
    if g_coeffs is None:
        g_coeffs = chandrasekhar_g_forward(m, nu, medium.L, medium)
    p = normalized_p_table(m, medium.L, mu)
    beta = np.asarray(medium.beta[m:])
    return np.tensordot(beta * g_coeffs[: medium.L - m + 1], p, axes=(0, 0))


def lambda_dispersion(
    m: int,
    w: float,
    medium: OpticalMedium,
    n_quad: int = None,
    g_coeffs: np.ndarray = None,
) -> float:
    """Dispersion function Lambda^m(w) for |w| > 1.

    Near the cut the defining integral is evaluated by Gauss-Legendre with
    the pole at mu = w subtracted analytically (polynomial remainder exact,
    log term closed form), which stays accurate for eigenvalues within
    1e-12 of 1.  Far from the cut that subtraction cancels catastrophically
    because the polynomial values explode, so the evaluation switches to
    the equivalent finite sum 1 - albedo w sum_l beta_l g_l^m(w) q_l^m(w)
    over second-kind companions, where every term is well scaled.
    """
    m = abs(m)
    if abs(w) <= 1.0:
        raise ConfigurationError("lambda_dispersion requires |w| > 1")
    if g_coeffs is None:
        g_coeffs = chandrasekhar_g_forward(m, w, medium.L, medium)
    f_w = g_big(m, w, w, medium, g_coeffs=g_coeffs) * (1.0 - w * w) ** m
    log_term = math.log((w + 1.0) / (w - 1.0))
    if abs(f_w * log_term) < 1e3:
        if n_quad is None:
            n_quad = medium.L + 2 * m + 8
        rule = gauss_legendre(n_quad)
        mu = rule.nodes
        f_mu = g_big(m, w, mu, medium, g_coeffs=g_coeffs) * (1.0 - mu * mu) ** m
        regular = np.dot(rule.weights, (f_mu - f_w) / (w - mu))
        return 1.0 - 0.5 * medium.albedo * w * (regular + f_w * log_term)
    q = normalized_q_table(m, medium.L, w)
    beta = np.asarray(medium.beta[m:])
    return 1.0 - medium.albedo * w * float(
        np.dot(beta, g_coeffs[: medium.L - m + 1] * q)
    )


def normalization_factor(m: int, nu_j: float, medium: OpticalMedium) -> float:
    """Mode normalization N^m(nu_j) = albedo nu_j^2 g^m(nu_j,nu_j) Lambda'(nu_j)/2.

    The derivative is a central difference of the dispersion function with
    step 1e-5 nu_j; Lambda is analytic off [-1, 1] so this is benign.  The
    albedo factor makes the half-formula agree with the directly integrated
    mode norm int mu phi^2 (1-mu^2)^|m| dmu (checked against the rotated
    inner products): the compact notation g(nu, nu) stands for the product
    albedo * g^m(nu, nu) entering the eigenfunction.
    """
    m = abs(m)
    h = 1e-5 * nu_j
    if nu_j - h <= 1.0:
        raise ConfigurationError("eigenvalue too close to 1 for the difference step")
    g_at = chandrasekhar_g_backward(m, nu_j, medium.L, medium)
    g_self = g_big(m, nu_j, nu_j, medium, g_coeffs=g_at)
    dlam = (
        lambda_dispersion(m, nu_j + h, medium) - lambda_dispersion(m, nu_j - h, medium)
    ) / (2.0 * h)
    return 0.5 * medium.albedo * nu_j * nu_j * g_self * dlam


def collocation_points(m: int, n_col: int, discrete: np.ndarray) -> np.ndarray:
    """Discrete eigenvalues followed by cosine-spaced continuum points.

    The continuum abscissae are cos((pi/2) (j - M)/(n_col - M + 1)) for
    j = M+1..n_col, strictly decreasing inside (0, 1).
    """
    n_disc = len(discrete)
    if n_col < n_disc:
        raise ConfigurationError(
            f"n_col={n_col} cannot hold {n_disc} discrete eigenvalues at m={m}; "
            "raise l_max"
        )
    j = np.arange(n_disc + 1, n_col + 1)
    cont = np.cos(0.5 * np.pi * (j - n_disc) / (n_col - n_disc + 1))
    return np.concatenate([np.asarray(discrete, dtype=float), cont])


@dataclass(frozen=True)
class SpectralBasis:
    """Collocation data of one azimuthal order: eigenvalues, abscissae, and
    the table g_l^m(xi_j) for l = m..l_hi at every collocation point."""

    m: int
    discrete: np.ndarray
    collocation: np.ndarray
    g_table: np.ndarray  # shape (n_col, l_hi - m + 1)
    l_hi: int

    @classmethod
    def build(
        cls,
        m: int,
        medium: OpticalMedium,
        l_max: int,
        n_col: int = None,
        l_B: int = None,
    ) -> "SpectralBasis":
        if m < 0:
            raise ConfigurationError("basis order m must be >= 0")
        if n_col is None:
            n_col = (l_max - m) // 2 + 1
        if l_B is None:
            l_B = max(2 * l_max, 4 * medium.L, 60)
        l_hi = l_max + 1
        discrete = (
            discrete_eigenvalues(m, medium, l_B) if m <= medium.L else np.zeros(0)
        )
        pts = collocation_points(m, n_col, discrete)
        rows = np.zeros((n_col, l_hi - m + 1))
        for j, xi in enumerate(pts):
            if j < len(discrete):
                rows[j] = chandrasekhar_g_backward(m, xi, l_hi, medium)
            else:
                rows[j] = chandrasekhar_g_forward(m, xi, l_hi, medium)
        return cls(m, discrete, pts, rows, l_hi)
