"""Collocation solve of the boundary expansion for structured illumination.

The reflected intensity at the boundary is expanded in same-parity spherical
harmonics; projecting the half-space problem onto decaying rotated eigenmodes
yields a dense complex system A c = K whose rows are indexed by (m', xi) with
xi running over discrete eigenvalues plus cosine-spaced continuum collocation
points, and whose columns are the expansion pairs (m >= 0, l = m + 2 alpha).
The exiting hemispheric flux J_+(q0) follows from the m = 0, even-l
coefficients.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigurationError, SolverError
from .special_functions import (
    PI_LONG,
    WignerDTable,
    gauss_legendre,
    gauss_legendre_extended,
    normalized_p_seed,
    normalized_p_table,
    wigner_d_continued,
)
from .spectrum import (
    OpticalMedium,
    SpectralBasis,
    chandrasekhar_g_backward,
    chandrasekhar_g_forward,
)

__all__ = [
    "FluxCurve",
    "FluxSample",
    "FnConfig",
    "FnSystem",
    "FnWorkspace",
    "assemble_A_entry",
    "assemble_K_structured",
    "column_index",
    "half_mu_moment",
    "hemispheric_flux",
    "n_total",
    "reconstruct_reflected_intensity",
    "solve_fn",
]


def n_total(l_max: int) -> int:
    """Number of same-parity expansion pairs (m >= 0, l = m + 2 alpha)."""
    if l_max % 2 == 0:
        return (l_max + 2) ** 2 // 4
    return (l_max + 1) * (l_max + 3) // 4


def column_index(l_max: int):
    """Column ordering: m = 0..l_max outer, degree l = m, m+2, ... inner."""
    return tuple(
        (m, l) for m in range(l_max + 1) for l in range(m, l_max + 1, 2)
    )


@dataclass(frozen=True)
class FnConfig:
    """Expansion cutoff, quadrature sizes, and the source spatial frequency.

    The structured source is normally incident with wave vector q0 along the
    x-axis; q0 is in internal units (lengths normalized by mu_t).
    """

    l_max: int
    q0: float
    n_mu: int = None
    n_phi: int = None

    def __post_init__(self):
        if self.l_max < 1:
            raise ConfigurationError("l_max must be >= 1")
        if self.q0 < 0:
            raise ConfigurationError("q0 must be >= 0")
        if self.n_mu is None:
            object.__setattr__(self, "n_mu", 4 * self.l_max)
        if self.n_phi is None:
            object.__setattr__(self, "n_phi", 8 * self.l_max)
        if self.n_mu < 2 * self.l_max:
            raise ConfigurationError("n_mu must be >= 2 l_max")
        if self.n_phi < 4 * self.l_max:
            raise ConfigurationError("n_phi must be >= 4 l_max")


@dataclass
class FnSystem:
    """Assembled collocation system and, once solved, its coefficients."""

    l_max: int
    q0: float
    columns: tuple
    rows: tuple
    a_matrix: np.ndarray
    rhs: np.ndarray
    coeffs: np.ndarray = None
    cond: float = math.nan
    residual: float = math.nan
    _col_of: dict = field(default=None, repr=False)

    def coefficient(self, l: int, m: int) -> complex:
        """Expansion coefficient for degree l and order m of either sign.

        Negative orders follow from the reflection symmetry
        c_{l,-m} = (-1)^m c_{lm} of the reduced system.
        """
        if self.coeffs is None:
            raise SolverError("system has not been solved")
        if self._col_of is None:
            self._col_of = {col: i for i, col in enumerate(self.columns)}
        key = (abs(m), l)
        if key not in self._col_of:
            return 0.0 + 0.0j
        val = self.coeffs[self._col_of[key]]
        if m < 0 and (m % 2) != 0:
            val = -val
        return val


def _lambda_tables(l_max: int, mu: np.ndarray) -> np.ndarray:
    """lam[l, m+l_max, n] = sqrt((l-m)!/(l+m)!) P_l^m(mu_n) for all |m| <= l.

    Condon-Shortley phase included; entries outside |m| <= l are zero.
    The dtype of mu propagates into the table.
    """
    n = mu.size
    lam = np.zeros((l_max + 1, 2 * l_max + 1, n), dtype=mu.dtype)
    off = l_max
    fac = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
    for m in range(l_max + 1):
        ptab = normalized_p_table(m, l_max, mu)
        weight = fac**m
        for l in range(m, l_max + 1):
            lam[l, off + m] = (-1.0) ** m * ptab[l - m] * weight
            if m > 0:
                lam[l, off - m] = ptab[l - m] * weight
    return lam


class FnWorkspace:
    """Medium- and cutoff-dependent tables shared across a q0 sweep.

    Construction builds one spectral basis per azimuthal row order together
    with the polar quadrature and normalized associated-Legendre tables; a
    workspace is immutable afterwards and safe to share.

    With extended=True every assembly table is held in 80-bit longdouble and
    the linear solve runs in 40-digit arithmetic; the high spatial-frequency,
    high-degree corner of the nearly conservative media drives the
    collocation matrix to condition numbers around 1e19 where plain double
    assembly noise reaches the flux.
    """

    def __init__(
        self,
        medium: OpticalMedium,
        l_max: int,
        n_mu: int = None,
        n_phi: int = None,
        extended: bool = False,
    ):
        if l_max < medium.L:
            raise ConfigurationError("l_max must be >= the phase-function degree L")
        self.medium = medium
        self.l_max = l_max
        self.extended = bool(extended)
        self.rdt = np.longdouble if extended else np.float64
        self.cdt = np.clongdouble if extended else np.complex128
        self.pi = PI_LONG if extended else np.pi
        self.n_mu = n_mu if n_mu is not None else 4 * l_max
        self.n_phi = n_phi if n_phi is not None else 8 * l_max
        if self.n_mu < 2 * l_max or self.n_phi < 4 * l_max:
            raise ConfigurationError("quadrature sizes too small for l_max")
        if self.n_phi <= 2 * (2 * l_max + 2):
            raise ConfigurationError("n_phi must exceed twice the azimuthal band")
        self.columns = column_index(l_max)
        self.bases = tuple(
            SpectralBasis.build(m, medium, l_max) for m in range(l_max + 1)
        )
        if extended:
            nodes, weights = gauss_legendre_extended(self.n_mu)
            self.mu = (nodes + 1.0) / 2.0
            self.wq = weights / 2.0
        else:
            self.mu, self.wq = gauss_legendre(self.n_mu).mapped(0.0, 1.0)
        self.sin_mu = np.sqrt(1.0 - self.mu * self.mu)
        self.phi = 2.0 * self.pi * np.arange(self.n_phi).astype(self.rdt) / self.n_phi
        self.lam = _lambda_tables(l_max, self.mu)
        self.rows = tuple(
            (m, float(xi))
            for m in range(l_max + 1)
            for xi in self.bases[m].collocation
        )
        if len(self.rows) != n_total(l_max):
            raise ConfigurationError("collocation count does not match column count")
        if extended:
            # longdouble polynomial tables at the (double) collocation points
            self._g_ext = tuple(
                np.array(
                    [
                        self._fresh_g(m, float(xi))
                        for xi in self.bases[m].collocation
                    ]
                )
                for m in range(l_max + 1)
            )
            # azimuthal harmonics |k| <= 2 l_max via explicit DFT weights
            kmax = 2 * l_max
            ks = np.arange(-kmax, kmax + 1)
            ang = np.outer(self.phi, ks.astype(self.rdt))
            self._dft_w = (np.cos(ang) + 1j * np.sin(ang)) * (
                2.0 * self.pi / self.n_phi
            )
            self._dft_cols = np.mod(ks, self.n_phi)

    # -- single-row machinery -------------------------------------------------

    def _fresh_g(self, m_abs: int, xi: float) -> np.ndarray:
        if xi > 1.0:
            return chandrasekhar_g_backward(
                m_abs, xi, self.l_max + 1, self.medium, dtype=self.rdt
            )
        return chandrasekhar_g_forward(
            m_abs, xi, self.l_max + 1, self.medium, dtype=self.rdt
        )

    def _g_vector(self, m_abs: int, xi: float) -> np.ndarray:
        """g_l^{|m'|}(xi) for l = |m'| .. l_max+1 at an arbitrary xi > 0."""
        basis = self.bases[m_abs] if m_abs <= self.l_max else None
        if basis is not None:
            hit = np.nonzero(np.abs(basis.collocation - xi) < 1e-13)[0]
            if hit.size:
                if self.extended:
                    return self._g_ext[m_abs][hit[0]]
                return basis.g_table[hit[0]]
        return self._fresh_g(m_abs, xi)

    def a_values(
        self,
        m_prime: int,
        xi: float,
        q0: float,
        g_values: np.ndarray = None,
        table: WignerDTable = None,
    ) -> np.ndarray:
        """A_{lm}^{m'}(xi, q0) for every 0 <= l <= l_max, |m| <= l.

        Returns a padded complex array of shape (l_max+1, 2 l_max+1) with the
        order axis offset by l_max.  The scalar reduced amplitudes are used
        throughout (q0 along the x-axis, so the azimuthal phase factor of the
        full vector form is unity).
        """
        lm = self.l_max
        off = lm
        am = abs(m_prime)
        medium = self.medium
        rdt = self.rdt
        if g_values is None:
            g_values = self._g_vector(am, xi)
        if table is None:
            table = wigner_d_continued(lm, xi * q0, dtype=self.cdt)
        xi = rdt(xi)
        x = xi * rdt(q0)
        kz = np.hypot(rdt(1.0), x)

        g_raw = np.zeros(lm + 2, dtype=rdt)
        g_raw[am:] = g_values
        G = -g_raw if (m_prime < 0 and am % 2 == 1) else g_raw
        Gp1 = G[1:]
        Gm1 = np.concatenate([np.zeros(1, rdt), G[:-2]])

        ls = np.arange(lm + 1).astype(rdt)
        mcol = np.arange(-lm, lm + 1)
        sgn_m = (-1.0) ** np.abs(mcol)
        root = np.sqrt(self.pi / (2.0 * ls + 1.0))

        # streaming term
        sa = np.sqrt(np.clip((ls + 1.0) ** 2 - m_prime * m_prime, 0.0, None))
        sb = np.sqrt(np.clip(ls * ls - m_prime * m_prime, 0.0, None))
        c1 = kz * root * (sa * Gp1 + sb * Gm1)
        a_vals = (
            sgn_m[None, :]
            * table._table[: lm + 1, :, off + m_prime]
            * c1[:, None]
        )

        # transverse-gradient term
        if x != 0.0:
            p_lo = np.sqrt(np.clip((ls - m_prime + 1.0) * (ls - m_prime), 0.0, None))
            p_hi = np.sqrt(np.clip((ls + m_prime + 1.0) * (ls + m_prime), 0.0, None))
            for mpp, c2 in (
                (m_prime - 1, p_lo * Gm1 - p_hi * Gp1),
                (m_prime + 1, p_lo * Gp1 - p_hi * Gm1),
            ):
                if abs(mpp) > lm:
                    continue
                a_vals += (
                    (-0.5j * x)
                    * sgn_m[None, :]
                    * table._table[: lm + 1, :, off + mpp]
                    * (root * c2)[:, None]
                )

        # scattering (double-integral) term
        if am <= medium.L:
            w_grid = (
                kz * self.mu[:, None]
                - 1j * x * self.sin_mu[:, None] * np.cos(self.phi)[None, :]
            )
            denom = xi + w_grid
            if np.abs(denom).min() < 1e-14:
                raise SolverError("vanishing denominator in the kernel integral")
            ptab = normalized_p_table(am, medium.L, w_grid)
            lp = np.arange(am, medium.L + 1)
            coeffs = (
                np.asarray(medium.beta[am:], dtype=rdt)
                * (-1.0) ** (lp + am)
                * g_raw[am : medium.L + 1]
            )
            kernel = np.tensordot(coeffs, ptab, axes=(0, 0)) / denom
            if self.extended:
                h_four = np.zeros((self.n_mu, self.n_phi), dtype=self.cdt)
                h_four[:, self._dft_cols] = kernel @ self._dft_w
            else:
                h_four = 2.0 * np.pi * np.fft.ifft(kernel, axis=1)  # H_k(mu_n)

            sgn_power = (-1.0) ** am if m_prime < 0 else 1.0
            s_fac = sgn_power / normalized_p_seed(am, dtype=rdt)
            pref3 = (
                0.5
                * (rdt(medium.mu_s) / (rdt(medium.mu_a) + rdt(medium.mu_s)))
                * xi
                * (-1.0) ** np.arange(lm + 1)
                * np.sqrt((2.0 * ls + 1.0) / (4.0 * self.pi))
                * s_fac
            )
            base = self.wq * self.mu
            q_acc = np.zeros((2 * lm + 1, self.n_mu), dtype=self.cdt)
            for mpp in range(-am, am + 1):
                dv = table.d(am, mpp, -m_prime)
                if dv == 0.0:
                    continue
                coef = ((-1.0) ** abs(mpp)) * dv * self.lam[am, off + mpp] * base
                idx = (mcol + mpp) % self.n_phi
                q_acc += coef[None, :] * h_four[:, idx].T
            a_vals += pref3[:, None] * np.einsum("lmn,mn->lm", self.lam, q_acc)

        return a_vals

    def k_value(
        self,
        m_prime: int,
        xi: float,
        q0: float,
        g_values: np.ndarray = None,
        table: WignerDTable = None,
    ) -> complex:
        """Structured-illumination source projection for one (m', xi) row.

        Exactly zero for |m'| > L: the truncated phase function carries no
        azimuthal harmonics beyond L.
        """
        am = abs(m_prime)
        medium = self.medium
        rdt = self.rdt
        if am > medium.L:
            return self.cdt(0.0)
        if g_values is None:
            g_values = self._g_vector(am, xi)
        if table is None:
            table = wigner_d_continued(self.l_max, xi * q0, dtype=self.cdt)
        xi = rdt(xi)
        x = xi * rdt(q0)
        kz = np.hypot(rdt(1.0), x)
        g_signed = g_values * ((-1.0) ** am if m_prime < 0 else 1.0)
        total = self.cdt(0.0)
        for l in range(am, medium.L + 1):
            total = total + (
                (-1.0) ** l
                * rdt(medium.beta[l])
                * table.d(l, 0, m_prime)
                * g_signed[l - am]
            )
        albedo = rdt(medium.mu_s) / (rdt(medium.mu_a) + rdt(medium.mu_s))
        return -2.0 * self.pi**2 * albedo * xi / (xi + kz) * total

    # -- full system -----------------------------------------------------------

    def assemble(self, q0: float):
        """Dense reduced system (A, K) for all rows at spatial frequency q0."""
        if q0 < 0:
            raise ConfigurationError("q0 must be >= 0")
        n = n_total(self.l_max)
        lm = self.l_max
        off = lm
        a_mat = np.zeros((n, n), dtype=self.cdt)
        k_vec = np.zeros(n, dtype=self.cdt)
        cols_m = np.array([m for m, _ in self.columns])
        cols_l = np.array([l for _, l in self.columns])
        i = 0
        for m_prime in range(lm + 1):
            basis = self.bases[m_prime]
            for j, xi in enumerate(basis.collocation):
                g_row = (
                    self._g_ext[m_prime][j] if self.extended else basis.g_table[j]
                )
                table = wigner_d_continued(lm, float(xi) * q0, dtype=self.cdt)
                vals = self.a_values(
                    m_prime, float(xi), q0, g_values=g_row, table=table
                )
                pos = vals[cols_l, off + cols_m]
                neg = vals[cols_l, off - cols_m]
                reduced = pos + np.where(cols_m > 0, (-1.0) ** cols_m, 0.0) * neg
                a_mat[i] = reduced
                k_vec[i] = self.k_value(
                    m_prime, float(xi), q0, g_values=g_row, table=table
                )
                i += 1
        return a_mat, k_vec

    def solve(self, q0: float) -> FnSystem:
        """Assemble and solve; enforces the residual accuracy contract."""
        a_mat, k_vec = self.assemble(q0)
        row_scale = np.abs(a_mat).max(axis=1)
        row_scale[row_scale == 0.0] = 1.0
        a_r = a_mat / row_scale[:, None]
        k_r = k_vec / row_scale
        col_scale = np.abs(a_r).max(axis=0)
        col_scale[col_scale == 0.0] = 1.0
        a_s = a_r / col_scale[None, :]

        if self.extended:
            coeffs, residual = _solve_mp(a_s, k_r, col_scale)
            cond = np.linalg.cond(a_s.astype(complex))
        else:
            lu = lu_factor(a_s)
            y = lu_solve(lu, k_r)
            residual = math.inf
            for _ in range(4):
                r = k_r - a_s @ y
                residual = np.linalg.norm(r) / max(np.linalg.norm(k_r), 1e-300)
                if residual < 1e-10:
                    break
                y = y + lu_solve(lu, r)
            cond = np.linalg.cond(a_s)
            coeffs = y / col_scale
        if residual > 1e-8:
            # an unsolvably ill-conditioned system shows up here: refinement
            # cannot push the residual down
            raise SolverError(
                f"solve residual {residual:.3e} exceeds 1e-8 "
                f"(condition estimate {cond:.3e}); "
                "try different quadrature/collocation sizes"
            )
        return FnSystem(
            l_max=self.l_max,
            q0=q0,
            columns=self.columns,
            rows=self.rows,
            a_matrix=a_mat,
            rhs=k_vec,
            coeffs=coeffs,
            cond=cond,
            residual=residual,
        )


def _mp_str(v) -> str:
    return repr(np.longdouble(v)).split("'")[1] if "'" in repr(v) else repr(v)


def _solve_mp(a_s: np.ndarray, k_r: np.ndarray, col_scale: np.ndarray):
    """40-digit LU solve of the equilibrated system; returns complex128 data."""
    import mpmath as mp

    n = a_s.shape[0]
    with mp.workdps(40):
        rows = []
        for i in range(n):
            rows.append(
                [
                    mp.mpc(mp.mpf(_mp_str(a_s[i, j].real)), mp.mpf(_mp_str(a_s[i, j].imag)))
                    for j in range(n)
                ]
            )
        a_mp = mp.matrix(rows)
        k_mp = mp.matrix(
            [
                mp.mpc(mp.mpf(_mp_str(v.real)), mp.mpf(_mp_str(v.imag)))
                for v in k_r
            ]
        )
        y = mp.lu_solve(a_mp, k_mp)
        r = a_mp * y - k_mp
        num = mp.sqrt(mp.fsum(abs(v) ** 2 for v in r))
        den = mp.sqrt(mp.fsum(abs(v) ** 2 for v in k_mp))
        residual = float(num / den) if den > 0 else 0.0
        coeffs = np.array(
            [complex(y[i]) / float(col_scale[i]) for i in range(n)], dtype=complex
        )
    return coeffs, residual


def solve_fn(config: FnConfig, medium: OpticalMedium, extended: bool = False) -> FnSystem:
    """One-shot solve; prefer a shared FnWorkspace for q0 sweeps."""
    ws = FnWorkspace(medium, config.l_max, config.n_mu, config.n_phi, extended=extended)
    return ws.solve(config.q0)


def assemble_A_entry(
    workspace: FnWorkspace, l: int, m: int, m_prime: int, xi: float, q0: float
) -> complex:
    """Single collocation-matrix amplitude A_{lm}^{m'}(xi, q0)."""
    lm = workspace.l_max
    if not (abs(m) <= l <= lm):
        raise ConfigurationError("need |m| <= l <= l_max")
    vals = workspace.a_values(m_prime, xi, q0)
    return complex(vals[l, lm + m])


def assemble_K_structured(
    workspace: FnWorkspace, m_prime: int, xi: float, q0: float
) -> complex:
    """Source projection for one row; exact zero when |m'| > L."""
    return complex(workspace.k_value(m_prime, xi, q0))


def half_mu_moment(l: int) -> float:
    """int_0^1 mu P_l(mu) dmu for even l."""
    if l % 2 != 0:
        raise ConfigurationError("half-range moment used only for even degrees")
    half = l // 2
    return (
        -((-1.0) ** half)
        * math.factorial(l)
        / (2.0**l * (l - 1) * (l + 2) * math.factorial(half) ** 2)
    )


def hemispheric_flux(system: FnSystem) -> float:
    """Exiting hemispheric flux magnitude J_+(q0) from the solved system.

    Only m = 0, even-l coefficients contribute once the azimuthal integral
    is taken; the 1/(2 pi)^2 of the inverse transform is folded in.
    """
    total = 0.0 + 0.0j
    for l in range(0, system.l_max + 1, 2):
        total += (
            math.sqrt(2.0 * l + 1.0) * half_mu_moment(l) * system.coefficient(l, 0)
        )
    return abs(total) / (4.0 * math.pi**1.5)


def reconstruct_reflected_intensity(system: FnSystem, mu: float, phi: float) -> complex:
    """Truncated boundary expansion of the reflected intensity at (mu, phi).

    mu is the outgoing polar cosine on the exit hemisphere (0 < mu <= 1).
    """
    if not 0.0 < mu <= 1.0:
        raise ConfigurationError("reconstruction is defined for 0 < mu <= 1")
    total = 0.0 + 0.0j
    fac = math.sqrt(max(1.0 - mu * mu, 0.0))
    for m in range(-system.l_max, system.l_max + 1):
        am = abs(m)
        ptab = normalized_p_table(am, system.l_max, mu)
        phase = np.exp(1j * m * phi)
        cs = (-1.0) ** am if m >= 0 else 1.0
        for l in range(am, system.l_max + 1, 2):
            y_lm = (
                math.sqrt((2.0 * l + 1.0) / (4.0 * np.pi))
                * cs
                * ptab[l - am]
                * fac**am
                * phase
            )
            total += system.coefficient(l, m) * y_lm
    return complex(total)


@dataclass(frozen=True)
class FluxSample:
    """One flux evaluation: q0 in transport mean free path units."""

    q0_per_ellstar: float
    j_plus: float
    method: str
    l_max: int
    stderr: float = None

    def __post_init__(self):
        if not math.isfinite(self.j_plus) or self.j_plus < 0:
            raise ConfigurationError("flux must be finite and >= 0")


@dataclass
class FluxCurve:
    """Flux samples of one or more methods over a q0 grid."""

    samples: list

    def for_method(self, method: str, l_max: int = None):
        picked = [
            s
            for s in self.samples
            if s.method == method and (l_max is None or s.l_max == l_max)
        ]
        return sorted(picked, key=lambda s: s.q0_per_ellstar)
