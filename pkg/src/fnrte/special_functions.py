"""Legendre-family polynomials, Gauss-Legendre quadrature, and analytically
continued Wigner d-matrices.

All polynomial evaluations accept scalar or array arguments and are pure
functions; the returned tables are immutable in spirit and safe to share.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

# 64-bit-mantissa value of pi for extended-precision assembly paths
PI_LONG = np.longdouble("3.14159265358979323846264338327950288")

__all__ = [
    "QuadratureRule",
    "WignerDTable",
    "complex_sqrt",
    "double_factorial_log",
    "gauss_legendre",
    "gauss_legendre_01",
    "gauss_legendre_extended",
    "legendre_p",
    "normalized_p",
    "normalized_p_seed",
    "normalized_p_table",
    "normalized_q_table",
    "wigner_d_continued",
]


def complex_sqrt(z):
    """Square root with the branch 0 <= arg(sqrt(z)) < pi."""
    w = np.sqrt(np.asarray(z, dtype=complex))
    flip = (w.imag < 0) | ((w.imag == 0) & (w.real < 0))
    return np.where(flip, -w, w)


def double_factorial_log(n: int) -> float:
    """log((2n-1)!!) for n >= 0, computed in log space to avoid overflow."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 0.0
    # (2n-1)!! = (2n)! / (2^n n!)
    return math.lgamma(2 * n + 1) - n * math.log(2.0) - math.lgamma(n + 1)


@lru_cache(maxsize=None)
def _seed_long(m: int) -> np.longdouble:
    # (2m-1)!! / sqrt((2m)!) from exact integers, rounded once to longdouble
    import mpmath as mp

    with mp.workdps(40):
        val = mp.mpf(math.factorial(2 * m)) / (
            mp.mpf(2) ** m * mp.factorial(m)
        ) / mp.sqrt(mp.factorial(2 * m))
        return np.longdouble(mp.nstr(val, 25))


def normalized_p_seed(m: int, dtype=float):
    """Seed value (2|m|-1)!!/sqrt((2|m|)!) of the normalized polynomial family."""
    m = abs(m)
    if dtype is not float and np.dtype(dtype) == np.dtype(np.longdouble):
        return _seed_long(m)
    return math.exp(double_factorial_log(m) - 0.5 * math.lgamma(2 * m + 1))


def legendre_p(l: int, mu):
    """Legendre polynomial P_l(mu) by upward recurrence."""
    if l < 0:
        raise ValueError("degree must be nonnegative")
    mu = np.asarray(mu)
    p_prev = np.ones_like(mu)
    if l == 0:
        return p_prev[()] if p_prev.ndim == 0 else p_prev
    p_cur = mu
    for k in range(2, l + 1):
        p_prev, p_cur = p_cur, ((2 * k - 1) * mu * p_cur - (k - 1) * p_prev) / k
    return p_cur[()] if np.ndim(p_cur) == 0 else p_cur


def normalized_p_table(m: int, l_hi: int, x) -> np.ndarray:
    """Table of p_l^m(x) for l = |m| .. l_hi by the three-term recurrence.

    The argument may be real or complex and of any shape; p_l^m is a
    polynomial in x so the evaluation continues off [-1, 1] unambiguously.
    Returns an array of shape (l_hi - |m| + 1, *shape(x)).  Longdouble input
    keeps the recurrence coefficients in extended precision.
    """
    m = abs(m)
    if l_hi < m:
        raise ValueError("l_hi must be >= |m|")
    x = np.asarray(x)
    dtype = np.result_type(x, float)
    real = np.dtype(dtype.char.lower()) if dtype.kind == "c" else dtype
    sq = lambda v: np.sqrt(real.type(v))
    out = np.zeros((l_hi - m + 1,) + x.shape, dtype=dtype)
    out[0] = normalized_p_seed(m, dtype=real.type)
    if l_hi == m:
        return out
    # sqrt(l^2 - m^2) p_{l-1} - (2l+1) x p_l + sqrt((l+1)^2 - m^2) p_{l+1} = 0
    out[1] = (2 * m + 1) * x * out[0] / sq(2 * m + 1)
    for l in range(m + 1, l_hi):
        a = sq((l + 1) ** 2 - m * m)
        b = sq(l * l - m * m)
        out[l - m + 1] = ((2 * l + 1) * x * out[l - m] - b * out[l - m - 1]) / a
    return out


def normalized_p(l: int, m: int, mu):
    """Normalized associated-Legendre polynomial p_l^m(mu).

    Defined through sqrt((l-m)!/(l+m)!) d^m P_l/dmu^m for m >= 0 and
    extended by p_l^{-m} = (-1)^m p_l^m.
    """
    if abs(m) > l:
        raise ValueError("|m| must not exceed l")
    val = normalized_p_table(abs(m), l, mu)[-1]
    if m < 0:
        val = val * (-1) ** (-m)
    return val[()] if np.ndim(val) == 0 else val


def normalized_q_table(
    m: int,
    l_hi: int,
    w: float,
    start_extra: int = 60,
    rtol: float = 1e-12,
    max_doublings: int = 12,
) -> np.ndarray:
    """Second-kind companions q_l^m(w) of p_l^m for l = |m| .. l_hi, |w| > 1.

    q_l^m(w) = (1/2) int_{-1}^{1} p_l^m(mu) (1-mu^2)^{|m|} / (w - mu) dmu is
    the minimal solution of the p recurrence, so it is generated by backward
    (Miller) recursion and pinned by the inhomogeneous seed relation
    (2|m|+1) w q_m - sqrt(2|m|+1) q_{m+1} = sqrt((2|m|)!)/(2|m|-1)!!.
    """
    m = abs(m)
    if l_hi < m:
        raise ValueError("l_hi must be >= |m|")
    if abs(w) <= 1.0:
        raise ValueError("second-kind functions need |w| > 1")
    s_m = 1.0 / normalized_p_seed(m)
    l_start = l_hi + start_extra
    prev = None
    err = math.inf
    for _ in range(max_doublings):
        y_next, y_cur = 0.0, 1.0
        vals = np.zeros(l_start - m + 1)
        vals[-1] = y_cur
        for l in range(l_start, m, -1):
            a = math.sqrt((l + 1.0) ** 2 - m * m)
            b = math.sqrt(l * l - m * m)
            y_prev = ((2 * l + 1) * w * y_cur - a * y_next) / b
            y_next, y_cur = y_cur, y_prev
            vals[l - 1 - m] = y_prev
            if abs(y_prev) > 1e250:
                vals /= abs(y_prev)
                y_next /= abs(y_prev)
                y_cur = vals[l - 1 - m]
        denom = (2 * m + 1) * w * vals[0] - math.sqrt(2.0 * m + 1.0) * vals[1]
        if denom == 0.0:
            raise ValueError("degenerate seed relation in backward recursion")
        vals = vals[: l_hi - m + 1] * (s_m / denom)
        if prev is not None:
            scale = np.maximum(np.abs(vals), np.abs(vals).max() * 1e-30)
            err = np.max(np.abs(vals - prev) / scale)
            if err < rtol:
                return vals
        prev = vals
        l_start *= 2
    raise ValueError(
        f"backward recursion for q_l^m did not stabilize (m={m}, w={w}); "
        f"achieved residual {err:.3e}"
    )


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a quadrature rule on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ValueError("node/weight counts differ")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if abs(self.weights.sum() - 2.0) > 1e-12:
            raise ValueError("weights must sum to 2")

    def mapped(self, a: float, b: float):
        """Nodes and weights transplanted to the interval [a, b]."""
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1] via the Golub-Welsch algorithm."""
    if n < 1:
        raise ValueError("quadrature size must be >= 1")
    if n == 1:
        return QuadratureRule(np.zeros(1), np.full(1, 2.0))
    k = np.arange(1, n, dtype=float)
    offdiag = k / np.sqrt(4.0 * k * k - 1.0)
    nodes, vecs = eigh_tridiagonal(np.zeros(n), offdiag)
    weights = 2.0 * vecs[0] ** 2
    return QuadratureRule(nodes, weights)


def gauss_legendre_01(n: int):
    """Gauss-Legendre nodes and weights mapped to (0, 1)."""
    return gauss_legendre(n).mapped(0.0, 1.0)


def _legendre_pair(n: int, x: np.ndarray):
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre_extended(n: int):
    """Gauss-Legendre rule on [-1, 1] polished to longdouble accuracy.

    Double-precision Golub-Welsch nodes are Newton-refined with the
    longdouble Legendre recurrence; weights follow from P'_n.
    """
    if n < 1:
        raise ValueError("quadrature size must be >= 1")
    if n == 1:
        return np.zeros(1, np.longdouble), np.full(1, 2.0, np.longdouble)
    x = gauss_legendre(n).nodes.astype(np.longdouble)
    for _ in range(3):
        p, dp = _legendre_pair(n, x)
        x = x - p / dp
    _, dp = _legendre_pair(n, x)
    w = np.longdouble(2.0) / ((1.0 - x * x) * dp * dp)
    return x, w


class WignerDTable:
    """Analytically continued Wigner d-matrices d^l_{mm'} at argument x >= 0.

    The rotation angle is the complex polar angle with cos(theta) =
    sqrt(1 + x^2) and sin(theta) = i x, so entries are complex.  At x = 0 the
    table is the identity.  Storage is a dense (l_max+1, 2 l_max+1,
    2 l_max+1) array; entries with |m| > l or |m'| > l are zero.
    """

    def __init__(self, x: float, table: np.ndarray):
        self.x = x
        self.l_max = table.shape[0] - 1
        self._table = table
        self._off = self.l_max

    def d(self, l: int, m: int, mp: int) -> complex:
        """Single entry d^l_{m m'}; zero outside the valid index range."""
        if l > self.l_max or abs(m) > l or abs(mp) > l:
            return 0.0 + 0.0j
        return self._table[l, self._off + m, self._off + mp]

    def row(self, l: int, m: int) -> np.ndarray:
        """d^l_{m, m'} for m' = -l_max .. l_max (zero-padded)."""
        return self._table[l, self._off + m]

    def block(self, l: int) -> np.ndarray:
        """(2l+1) x (2l+1) matrix d^l_{m m'} with m, m' = -l .. l."""
        sl = slice(self._off - l, self._off + l + 1)
        return self._table[l, sl, sl]

    def column(self, l: int, mp: int) -> np.ndarray:
        """d^l_{m, mp} for m = -l_max .. l_max (zero-padded)."""
        return self._table[l, :, self._off + mp]


def wigner_d_continued(l_max: int, x: float, dtype=complex) -> WignerDTable:
    """Build the full continued Wigner d-matrix pyramid through degree l_max.

    The construction seeds the four l = 1 entries, raises l with the dominant
    three-term recurrence for the inner triangle, walks the two highest rows
    down in m' with the lowering relation, and completes each degree with the
    symmetries d_{mm'} = d_{-m',-m} = (-1)^{m+m'} d_{m'm}.  Passing
    dtype=numpy.clongdouble runs the pyramid in 80-bit precision.
    """
    if not np.isfinite(x) or x < 0:
        raise ValueError("argument must be finite and >= 0")
    dtype = np.dtype(dtype)
    real = np.dtype(dtype.char.lower()).type
    x = real(x)
    size = 2 * l_max + 1
    tab = np.zeros((l_max + 1, size, size), dtype=dtype)
    o = l_max
    c = np.hypot(real(1.0), x)  # cos(theta) = sqrt(1 + x^2)
    tab[0, o, o] = 1.0
    if l_max == 0:
        return WignerDTable(float(x), tab)

    d11 = (1.0 + c) / 2.0
    d1m1 = (1.0 - c) / 2.0
    d10 = -1j * x / np.sqrt(real(2.0))
    tab[1, o + 1, o + 1] = d11
    tab[1, o + 1, o - 1] = d1m1
    tab[1, o + 1, o] = d10
    tab[1, o, o] = c
    tab[1, o, o + 1] = -d10
    tab[1, o, o - 1] = d10
    tab[1, o - 1, o + 1] = d1m1
    tab[1, o - 1, o] = -d10
    tab[1, o - 1, o - 1] = d11

    # ratio sqrt(|d^1_{1,-1} / d^1_{11}|) entering the m'-lowering relation
    low = np.sqrt((c - 1.0) / (c + 1.0))
    one = real(1.0)

    for l in range(2, l_max + 1):
        # inner triangle m = 0..l-2, m' = -m..m, raised from degrees l-1, l-2
        for m in range(0, l - 1):
            mp = np.arange(-m, m + 1)
            pref = l * (2 * l - one) / np.sqrt(
                ((l * l - m * m) * (l * l - mp * mp)).astype(low.dtype)
            )
            term1 = (c - m * mp / (l * (l - one))) * tab[l - 1, o + m, o + mp]
            term2 = (
                np.sqrt(
                    (((l - 1) ** 2 - m * m) * ((l - 1) ** 2 - mp * mp)).astype(
                        low.dtype
                    )
                )
                / ((l - 1) * (2 * l - one))
            ) * tab[l - 2, o + m, o + mp]
            tab[l, o + m, o + mp] = pref * (term1 - term2)

        # top corners
        tab[l, o + l, o + l] = d11 * tab[l - 1, o + l - 1, o + l - 1]
        tab[l, o + l - 1, o + l - 1] = (l * c - l + one) * tab[
            l - 1, o + l - 1, o + l - 1
        ]

        # m = l row, walking m' downward
        for mp in range(l - 1, -l - 1, -1):
            tab[l, o + l, o + mp] = (
                -1j
                * np.sqrt((l + mp + one) / (l - mp))
                * low
                * tab[l, o + l, o + mp + 1]
            )
        # m = l-1 row, walking m' downward
        for mp in range(l - 2, -l, -1):
            tab[l, o + l - 1, o + mp] = (
                -1j
                * ((l * c - mp) / (l * c - mp - one))
                * np.sqrt((l + mp + one) / (l - mp))
                * low
                * tab[l, o + l - 1, o + mp + 1]
            )
        # edges of the m = l-1 row from the m = l row
        tab[l, o + l - 1, o + l] = -tab[l, o + l, o + l - 1]
        tab[l, o + l - 1, o - l] = tab[l, o + l, o - l + 1]

        # extend rows m = 0..l-2 outside |m'| <= m by symmetry
        for m in range(0, l - 1):
            for mp in range(m + 1, l + 1):
                tab[l, o + m, o + mp] = (-1.0) ** (m + mp) * tab[l, o + mp, o + m]
            for mp in range(-l, -m):
                tab[l, o + m, o + mp] = tab[l, o - mp, o - m]

        # negative-m rows from d_{mm'} = (-1)^{m+m'} d_{-m,-m'}
        for m in range(1, l + 1):
            mp = np.arange(-l, l + 1)
            sign = (-1.0) ** (m + mp)
            tab[l, o - m, o + mp] = sign * tab[l, o + m, o - mp]

    return WignerDTable(float(x), tab)
