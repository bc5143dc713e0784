"""Rotated-reference-frame expansion solver for the same half-space problem.

Every decaying eigenmode is expanded in spherical harmonics evaluated in its
own tilted frame; half-range boundary projections onto odd-offset harmonics
close a dense system for the mode amplitudes.  The method is fast but grows
numerically unstable as the expansion degree rises; the instability is
reported (condition estimate, raw values), never repaired, since reproducing
it is part of the validation story.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .special_functions import gauss_legendre, normalized_p_table, wigner_d_continued
from .spectrum import OpticalMedium, build_B_matrix, h_coeff

__all__ = [
    "MrrfBasis",
    "MrrfSolution",
    "half_range_moment",
    "half_range_moment_table",
    "mrrf_flux",
    "solve_mrrf",
]


@dataclass(frozen=True)
class MrrfBasis:
    """Positive eigenvalues of B(M) with unit eigenvectors, M = 0..L, at the
    expansion truncation l_max (component index l runs M..l_max)."""

    l_max: int
    orders: tuple
    eigenvalues: tuple
    eigenvectors: tuple

    @classmethod
    def build(cls, medium: OpticalMedium, l_max: int) -> "MrrfBasis":
        if l_max < medium.L:
            raise ConfigurationError("l_max must be >= L")
        orders = tuple(range(medium.L + 1))
        evs, vecs = [], []
        for M in orders:
            mat = build_B_matrix(M, l_max, medium)
            w, v = np.linalg.eigh(mat)
            keep = w > 1e-8
            n = l_max - M + 1
            expected = n // 2
            if keep.sum() != expected:
                raise ConfigurationError(
                    f"unexpected positive-eigenvalue count for M={M}"
                )
            evs.append(w[keep])
            vecs.append(v[:, keep])
        return cls(l_max, orders, tuple(evs), tuple(vecs))

    def mode_count(self) -> int:
        return sum(len(e) for e in self.eigenvalues)


def half_range_moment(l: int, l2: int, m: int, n_quad: int = None) -> float:
    """Half-range coupling (1/2) sqrt(...) int_0^1 P_l^m P_{l2}^m dmu.

    Symmetric in (l, l2); zero when m exceeds either degree.
    """
    if m < 0:
        raise ConfigurationError("order m must be >= 0")
    if m > min(l, l2):
        return 0.0
    if n_quad is None:
        n_quad = l + l2 + 8
    nodes, weights = gauss_legendre(n_quad).mapped(0.0, 1.0)
    hi = max(l, l2)
    ptab = normalized_p_table(m, hi, nodes)
    integral = np.dot(weights, ptab[l - m] * ptab[l2 - m])
    return 0.5 * math.sqrt((2.0 * l + 1.0) * (2.0 * l2 + 1.0)) * integral


def half_range_moment_table(l_max: int, m_max: int) -> list:
    """tables[m][l-m, l2-m] of the half-range couplings for orders 0..m_max."""
    nodes, weights = gauss_legendre(2 * l_max + 8).mapped(0.0, 1.0)
    tables = []
    for m in range(m_max + 1):
        ptab = normalized_p_table(m, l_max, nodes)
        gram = np.einsum("ln,n,kn->lk", ptab, weights, ptab)
        ls = np.arange(m, l_max + 1, dtype=float)
        scale = np.sqrt(2.0 * ls + 1.0)
        tables.append(0.5 * scale[:, None] * scale[None, :] * gram)
    return tables


def _row_index(l_max: int, L: int):
    """Boundary-projection rows (l, m): m = 0..L, l - m odd.

    This is the unique odd-offset half-range set making the system square
    against the positive-eigenvalue modes of B(0)..B(L).
    """
    return tuple(
        (l, m)
        for m in range(min(L, l_max) + 1)
        for l in range(m + 1, l_max + 1)
        if (l - m) % 2 == 1
    )


@dataclass
class MrrfSolution:
    """Mode amplitudes of the tilted-frame expansion at one spatial frequency."""

    l_max: int
    q0: float
    modes: tuple  # (M, nu) per column
    amplitudes: np.ndarray
    y1: np.ndarray  # <l=1 | y_nu> per mode (zero for M > 1)
    cond: float
    residual: float
    flux_value: float = None  # set by the extended-precision path


def solve_mrrf(
    medium: OpticalMedium, l_max: int, q0: float, extended: bool = False, dps: int = 50
) -> MrrfSolution:
    """Solve the boundary-projection system for the mode amplitudes.

    No regularization is applied; an ill-conditioned system simply returns
    with a large condition estimate so callers can report the failure mode.
    The method loses all double-precision digits already at moderate cutoff
    and frequency (assembled entries span tens of orders of magnitude while
    the answer lives in their cancellations); extended=True reruns the whole
    assembly and solve in dps-digit arithmetic, which realizes the method's
    exact-arithmetic values where the expansion itself still converges.
    """
    if q0 < 0:
        raise ConfigurationError("q0 must be >= 0")
    if extended:
        return _solve_mrrf_mp(medium, l_max, q0, dps)
    basis = MrrfBasis.build(medium, l_max)
    rows = _row_index(l_max, medium.L)
    modes = [
        (M, float(nu))
        for M in basis.orders
        for nu in basis.eigenvalues[M]
    ]
    if len(rows) != len(modes):
        raise ConfigurationError(
            f"projection rows ({len(rows)}) do not match modes ({len(modes)})"
        )
    n = len(modes)
    btab = half_range_moment_table(l_max, medium.L)
    hs = np.array([h_coeff(l, medium) for l in range(l_max + 1)])
    weight = np.sqrt((2.0 * np.arange(l_max + 1) + 1.0) / hs)

    mat = np.zeros((n, n), dtype=complex)
    y1 = np.zeros(n)
    col = 0
    for M in basis.orders:
        for k, nu in enumerate(basis.eigenvalues[M]):
            table = wigner_d_continued(l_max, float(nu) * q0)
            yvec = np.zeros(l_max + 1)
            yvec[M:] = basis.eigenvectors[M][:, k]
            y1[col] = yvec[1]
            for i, (l, m) in enumerate(rows):
                lp = np.arange(max(m, M), l_max + 1)
                if lp.size == 0:
                    continue
                dvals = np.array([table.d(j, m, M) for j in lp])
                if M > 0:
                    dvals = dvals + (-1.0) ** M * np.array(
                        [table.d(j, m, -M) for j in lp]
                    )
                coupling = btab[m][l - m, lp - m]
                mat[i, col] = np.sum(weight[lp] * coupling * yvec[lp] * dvals)
            col += 1

    rhs = np.zeros(n, dtype=complex)
    lp_all = np.arange(l_max + 1)
    for i, (l, m) in enumerate(rows):
        if m == 0:
            rhs[i] = np.sum(
                btab[0][l, :] * np.sqrt((2.0 * lp_all + 1.0) / (4.0 * np.pi))
            )

    # diagonal equilibration only: exact reparametrization of the unknowns,
    # not a regularization (the genuine large-l_max instability survives it)
    row_scale = np.abs(mat).max(axis=1)
    row_scale[row_scale == 0.0] = 1.0
    m_r = mat / row_scale[:, None]
    col_scale = np.abs(m_r).max(axis=0)
    col_scale[col_scale == 0.0] = 1.0
    m_s = m_r / col_scale[None, :]
    amplitudes = np.linalg.solve(m_s, rhs / row_scale) / col_scale
    residual = np.linalg.norm(rhs - mat @ amplitudes) / max(
        np.linalg.norm(rhs), 1e-300
    )
    cond = np.linalg.cond(m_s)
    return MrrfSolution(l_max, q0, tuple(modes), amplitudes, y1, cond, residual)


def mrrf_flux(solution: MrrfSolution, medium: OpticalMedium) -> float:
    """Hemispheric flux magnitude at the boundary for normal incidence.

    The full-range first moment of the expansion minus the incident flux,
    evaluated at the origin where the transverse phase is unity.
    """
    if solution.flux_value is not None:
        return solution.flux_value
    k10 = 0.0 + 0.0j
    for (M, nu), f, y1 in zip(solution.modes, solution.amplitudes, solution.y1):
        x = nu * solution.q0
        if M == 0:
            d_sum = complex(math.hypot(1.0, x))  # d^1_{00}
        elif M == 1:
            # d^1_{01} + (-1)^1 d^1_{0,-1} = ix/sqrt(2) - (-ix/sqrt(2))
            d_sum = 2.0 * (1j * x / math.sqrt(2.0))
        else:
            continue  # <1|y_nu> pairs only with M <= 1
        k10 += y1 * f * d_sum
    k10 *= 2.0 * np.pi
    h1 = h_coeff(1, medium)
    return abs(k10 / math.sqrt(np.pi * h1) - 1.0)


# -- extended-precision path ---------------------------------------------------

_MP_CACHE = {}


def _mp_medium_tables(medium: OpticalMedium, l_max: int, dps: int):
    """Cached dps-digit medium tables: h_l, half-range couplings, B(M) modes."""
    import mpmath as mp

    key = (medium.mu_a, medium.mu_s, medium.beta, l_max, dps)
    if key in _MP_CACHE:
        return _MP_CACHE[key]
    with mp.workdps(dps):
        albedo = mp.mpf(medium.mu_s) / (mp.mpf(medium.mu_a) + mp.mpf(medium.mu_s))
        beta = [mp.mpf(b) for b in medium.beta]
        h = [
            2 * l + 1 - (albedo * beta[l] if l <= medium.L else mp.mpf(0))
            for l in range(l_max + 1)
        ]
        # Gauss-Legendre nodes on (0,1): Newton-polish the double nodes in mp
        n_gl = 2 * l_max + 12
        nodes64 = gauss_legendre(n_gl).nodes
        xs = [mp.mpf(float(v)) for v in nodes64]
        for _ in range(4):
            for i, x in enumerate(xs):
                p_prev, p = mp.mpf(1), x
                for k in range(2, n_gl + 1):
                    p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
                dp = n_gl * (x * p - p_prev) / (x * x - 1)
                xs[i] = x - p / dp
        ws = []
        for x in xs:
            p_prev, p = mp.mpf(1), x
            for k in range(2, n_gl + 1):
                p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
            dp = n_gl * (x * p - p_prev) / (x * x - 1)
            ws.append(2 / ((1 - x * x) * dp * dp))
        xs01 = [(x + 1) / 2 for x in xs]
        ws01 = [w / 2 for w in ws]

        # p_l^m tables at the nodes and the half-range couplings
        btab = []
        for m in range(medium.L + 1):
            seed = mp.mpf(math.factorial(2 * m)) / (
                mp.mpf(2) ** m * mp.factorial(m)
            ) / mp.sqrt(mp.factorial(2 * m))
            cols = []
            for x in xs01:
                vals = [seed]
                if l_max > m:
                    vals.append((2 * m + 1) * x * seed / mp.sqrt(2 * m + 1))
                for l in range(m + 1, l_max):
                    a = mp.sqrt(mp.mpf((l + 1) ** 2 - m * m))
                    b = mp.sqrt(mp.mpf(l * l - m * m))
                    vals.append(((2 * l + 1) * x * vals[-1] - b * vals[-2]) / a)
                cols.append(vals)
            tab = mp.zeros(l_max + 1, l_max + 1)
            for l in range(m, l_max + 1):
                for l2 in range(l, l_max + 1):
                    val = mp.fsum(
                        w * cols[i][l - m] * cols[i][l2 - m] * (1 - x * x) ** m
                        for i, (x, w) in enumerate(zip(xs01, ws01))
                    )
                    val *= mp.sqrt(mp.mpf((2 * l + 1) * (2 * l2 + 1))) / 2
                    tab[l, l2] = val
                    tab[l2, l] = val
            btab.append(tab)

        # positive eigenpairs of B(M)
        modes = []
        vecs = []
        for M in range(medium.L + 1):
            n = l_max - M + 1
            bm = mp.zeros(n, n)
            for i in range(1, n):
                l = M + i
                b = mp.sqrt(mp.mpf(l * l - M * M) / (h[l] * h[l - 1]))
                bm[i - 1, i] = b
                bm[i, i - 1] = b
            w, v = mp.eigsy(bm)
            for k in range(n):
                if w[k] > mp.mpf("1e-8"):
                    modes.append((M, w[k]))
                    comp = [mp.mpf(0)] * (l_max + 1)
                    for i in range(n):
                        comp[M + i] = v[i, k]
                    vecs.append(comp)
        rows = _row_index(l_max, medium.L)
        if len(rows) != len(modes):
            raise ConfigurationError("extended solve: row/mode count mismatch")
        weight = [mp.sqrt((2 * l + 1) / h[l]) for l in range(l_max + 1)]
        tables = (albedo, h, btab, modes, vecs, rows, weight)
        _MP_CACHE[key] = tables
        return tables


def _mp_wigner(l_max: int, x, mp):
    """dps-digit continued d-matrix pyramid (same construction as float path)."""
    c = mp.sqrt(1 + x * x)
    size = 2 * l_max + 1
    o = l_max
    tab = [
        [[mp.mpc(0) for _ in range(size)] for _ in range(size)]
        for _ in range(l_max + 1)
    ]
    tab[0][o][o] = mp.mpc(1)
    if l_max == 0:
        return tab
    d11 = (1 + c) / 2
    d10 = -mp.mpc(0, 1) * x / mp.sqrt(2)
    tab[1][o + 1][o + 1] = d11
    tab[1][o + 1][o - 1] = (1 - c) / 2
    tab[1][o + 1][o] = d10
    tab[1][o][o] = c
    tab[1][o][o + 1] = -d10
    tab[1][o][o - 1] = d10
    tab[1][o - 1][o + 1] = (1 - c) / 2
    tab[1][o - 1][o] = -d10
    tab[1][o - 1][o - 1] = d11
    low = mp.sqrt((c - 1) / (c + 1))
    for l in range(2, l_max + 1):
        for m in range(0, l - 1):
            for mpp in range(-m, m + 1):
                pref = l * (2 * l - 1) / mp.sqrt(
                    mp.mpf((l * l - m * m) * (l * l - mpp * mpp))
                )
                t1 = (c - mp.mpf(m * mpp) / (l * (l - 1))) * tab[l - 1][o + m][o + mpp]
                t2 = (
                    mp.sqrt(
                        mp.mpf(((l - 1) ** 2 - m * m) * ((l - 1) ** 2 - mpp * mpp))
                    )
                    / ((l - 1) * (2 * l - 1))
                ) * tab[l - 2][o + m][o + mpp]
                tab[l][o + m][o + mpp] = pref * (t1 - t2)
        tab[l][o + l][o + l] = d11 * tab[l - 1][o + l - 1][o + l - 1]
        tab[l][o + l - 1][o + l - 1] = (l * c - l + 1) * tab[l - 1][o + l - 1][
            o + l - 1
        ]
        for mpp in range(l - 1, -l - 1, -1):
            tab[l][o + l][o + mpp] = (
                -mp.mpc(0, 1)
                * mp.sqrt(mp.mpf(l + mpp + 1) / (l - mpp))
                * low
                * tab[l][o + l][o + mpp + 1]
            )
        for mpp in range(l - 2, -l, -1):
            tab[l][o + l - 1][o + mpp] = (
                -mp.mpc(0, 1)
                * ((l * c - mpp) / (l * c - mpp - 1))
                * mp.sqrt(mp.mpf(l + mpp + 1) / (l - mpp))
                * low
                * tab[l][o + l - 1][o + mpp + 1]
            )
        tab[l][o + l - 1][o + l] = -tab[l][o + l][o + l - 1]
        tab[l][o + l - 1][o - l] = tab[l][o + l][o - l + 1]
        for m in range(0, l - 1):
            for mpp in range(m + 1, l + 1):
                tab[l][o + m][o + mpp] = (-1) ** (m + mpp) * tab[l][o + mpp][o + m]
            for mpp in range(-l, -m):
                tab[l][o + m][o + mpp] = tab[l][o - mpp][o - m]
        for m in range(1, l + 1):
            for mpp in range(-l, l + 1):
                tab[l][o - m][o + mpp] = (-1) ** (m + mpp) * tab[l][o + m][o - mpp]
    return tab


def _solve_mrrf_mp(medium: OpticalMedium, l_max: int, q0: float, dps: int):
    import mpmath as mp

    with mp.workdps(dps):
        albedo, h, btab, modes, vecs, rows, weight = _mp_medium_tables(
            medium, l_max, dps
        )
        n = len(modes)
        q_mp = mp.mpf(q0)
        o = l_max
        mat = mp.zeros(n, n)
        y1 = np.zeros(n)
        for col, ((M, nu), yv) in enumerate(zip(modes, vecs)):
            tab = _mp_wigner(l_max, nu * q_mp, mp)
            y1[col] = float(yv[1])
            for i, (l, m) in enumerate(rows):
                acc = mp.mpc(0)
                for lp in range(max(m, M), l_max + 1):
                    dv = tab[lp][o + m][o + M]
                    if M > 0:
                        dv = dv + (-1) ** M * tab[lp][o + m][o - M]
                    acc += weight[lp] * btab[m][l, lp] * yv[lp] * dv
                mat[i, col] = acc
        rhs = mp.matrix([mp.mpf(0)] * n)
        for i, (l, m) in enumerate(rows):
            if m == 0:
                rhs[i] = mp.fsum(
                    btab[0][l, lp] * mp.sqrt((2 * lp + 1) / (4 * mp.pi))
                    for lp in range(l_max + 1)
                )
        amp = mp.lu_solve(mat, rhs)
        res = mat * amp - rhs
        residual = float(
            mp.sqrt(mp.fsum(abs(v) ** 2 for v in res))
            / max(mp.sqrt(mp.fsum(abs(v) ** 2 for v in rhs)), mp.mpf("1e-300"))
        )
        k10 = mp.mpc(0)
        for idx, ((M, nu), yv) in enumerate(zip(modes, vecs)):
            x = nu * q_mp
            if M == 0:
                d_sum = mp.sqrt(1 + x * x)
            elif M == 1:
                d_sum = 2 * mp.mpc(0, 1) * x / mp.sqrt(2)
            else:
                continue
            k10 += yv[1] * amp[idx] * d_sum
        k10 *= 2 * mp.pi
        flux = float(abs(k10 / mp.sqrt(mp.pi * h[1]) - 1))

        mode_list = tuple((M, float(nu)) for M, nu in modes)
        amps = np.array([complex(v) for v in amp])
        mat64 = np.array(
            [[complex(mat[i, j]) for j in range(n)] for i in range(n)]
        )
        row_scale = np.abs(mat64).max(axis=1)
        row_scale[row_scale == 0.0] = 1.0
        col_scale = np.abs(mat64 / row_scale[:, None]).max(axis=0)
        col_scale[col_scale == 0.0] = 1.0
        cond = np.linalg.cond(mat64 / row_scale[:, None] / col_scale[None, :])
    return MrrfSolution(
        l_max, q0, mode_list, amps, y1, cond, residual, flux_value=flux
    )
