"""Monte Carlo photon transport in the half space with Henyey-Greenstein
scattering, and Fourier synthesis of the structured-illumination exitance.

Photons launch at the origin along +z into the medium (lengths in 1/mu_t),
propagate with unit-rate exponential free paths, scatter with implicit
capture (weight times albedo per collision), and exit through the vacuum
boundary at z = 0 with no re-entry.  Each fixed-size chunk of photons owns a
counter-based Philox stream keyed by (seed, chunk index) and consumes a fixed
number of variates per photon per step, so results are bit-identical for a
given seed regardless of evaluation order.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .spectrum import OpticalMedium

__all__ = ["PhotonRecords", "flux_fourier", "simulate"]

_CHUNK = 1 << 21


@dataclass(frozen=True)
class PhotonRecords:
    """Boundary-crossing records of all photons that exited through z = 0."""

    x: np.ndarray
    y: np.ndarray
    mu: np.ndarray  # exit direction cosine, strictly negative
    weight: np.ndarray  # in (0, 1]
    photon_index: np.ndarray
    n_photons: int

    def __post_init__(self):
        if self.mu.size and self.mu.max() >= 0:
            raise ConfigurationError("exit records must have mu < 0")
        if self.weight.size and (
            self.weight.min() <= 0 or self.weight.max() > 1.0 + 1e-12
        ):
            raise ConfigurationError("weights must lie in (0, 1]")


def _scatter_directions(ux, uy, uz, g, u_cos, u_phi):
    """Rotate unit directions by a Henyey-Greenstein polar angle."""
    if g > 1e-8:
        ct = (1.0 + g * g - ((1.0 - g * g) / (1.0 - g + 2.0 * g * u_cos)) ** 2) / (
            2.0 * g
        )
        np.clip(ct, -1.0, 1.0, out=ct)
    else:
        ct = 2.0 * u_cos - 1.0
    st = np.sqrt(1.0 - ct * ct)
    phi = (2.0 * np.pi) * u_phi
    cp = np.cos(phi)
    sp = np.sin(phi)
    denom = np.sqrt(np.maximum(1.0 - uz * uz, 1e-30))
    fac = st / denom
    nx = fac * (ux * uz * cp - uy * sp) + ux * ct
    ny = fac * (uy * uz * cp + ux * sp) + uy * ct
    nz = -st * cp * denom + uz * ct
    vertical = np.abs(uz) > 0.99999
    if vertical.any():
        nx[vertical] = (st * cp)[vertical]
        ny[vertical] = (st * sp)[vertical]
        nz[vertical] = (np.sign(uz) * ct)[vertical]
    norm = np.sqrt(nx * nx + ny * ny + nz * nz)
    return nx / norm, ny / norm, nz / norm


def simulate(
    medium: OpticalMedium,
    n_photons: int,
    seed: int,
    chunk_size: int = _CHUNK,
    roulette_threshold: float = 1e-2,
    roulette_survive: float = 0.15,
    max_steps: int = 200000,
) -> PhotonRecords:
    """Random-walk all photons and record the boundary crossings.

    Deterministic for fixed (medium, n_photons, seed): the chunk partition
    and the per-step draw layout are part of the contract.
    """
    if n_photons < 1:
        raise ConfigurationError("n_photons must be >= 1")
    if not 0.0 < medium.g < 1.0:
        raise ConfigurationError("Henyey-Greenstein sampling needs g in (0, 1)")
    albedo = medium.albedo
    g = medium.g
    xs, ys, mus, ws, idxs = [], [], [], [], []
    for chunk_id, start in enumerate(range(0, n_photons, chunk_size)):
        m = min(chunk_size, n_photons - start)
        # one counter-based stream per chunk; the walk below is deterministic,
        # so chunk results do not depend on how chunks are scheduled
        rng = np.random.Generator(
            np.random.Philox(key=np.array([seed, chunk_id], dtype=np.uint64))
        )
        x = np.zeros(m)
        y = np.zeros(m)
        z = np.zeros(m)
        ux = np.zeros(m)
        uy = np.zeros(m)
        uz = np.ones(m)
        w = np.ones(m)
        gid = start + np.arange(m, dtype=np.int64)
        for _ in range(max_steps):
            if x.size == 0:
                break
            draws = rng.random((4, x.size))
            step = -np.log1p(-draws[0])
            down = uz < 0
            t_bound = np.full(x.size, np.inf)
            np.divide(-z, uz, out=t_bound, where=down)
            exiting = step >= t_bound
            if exiting.any():
                tb = t_bound[exiting]
                xs.append(x[exiting] + ux[exiting] * tb)
                ys.append(y[exiting] + uy[exiting] * tb)
                mus.append(uz[exiting])
                ws.append(w[exiting])
                idxs.append(gid[exiting])
            w_next = w * albedo
            faint = ~exiting & (w_next < roulette_threshold)
            killed = faint & (draws[3] >= roulette_survive)
            keep = ~exiting & ~killed
            if not keep.any():
                break
            x = x[keep] + ux[keep] * step[keep]
            y = y[keep] + uy[keep] * step[keep]
            z = z[keep] + uz[keep] * step[keep]
            w = np.where(faint[keep], w_next[keep] / roulette_survive, w_next[keep])
            gid = gid[keep]
            ux, uy, uz = _scatter_directions(
                ux[keep], uy[keep], uz[keep], g, draws[1][keep], draws[2][keep]
            )
        else:
            raise ConfigurationError("photon walk exceeded the step cap")
    cat = lambda parts: (
        np.concatenate(parts) if parts else np.zeros(0, dtype=float)
    )
    idx = (
        np.concatenate(idxs).astype(np.int64) if idxs else np.zeros(0, dtype=np.int64)
    )
    order = np.argsort(idx, kind="stable")
    return PhotonRecords(
        cat(xs)[order], cat(ys)[order], cat(mus)[order], cat(ws)[order],
        idx[order], n_photons,
    )


def flux_fourier(
    records: PhotonRecords,
    q0: float,
    n_photons: int = None,
    n_groups: int = 50,
):
    """Structured-illumination exitance |sum w exp(i q0 x)| / N at one q0.

    Returns (value, stderr) with a grouped-jackknife standard error; an
    empty record set yields (0.0, inf).
    """
    n = n_photons if n_photons is not None else records.n_photons
    if records.weight.size == 0:
        return 0.0, math.inf
    phase = np.exp(1j * q0 * records.x)
    contrib = records.weight * phase
    groups = np.minimum(
        (records.photon_index * n_groups) // n, n_groups - 1
    ).astype(np.int64)
    g_re = np.bincount(groups, weights=contrib.real, minlength=n_groups)
    g_im = np.bincount(groups, weights=contrib.imag, minlength=n_groups)
    total = complex(math.fsum(g_re), math.fsum(g_im))
    value = abs(total) / n
    # leave-one-group-out estimates; group k holds the photons whose index
    # falls in its fixed launch range, so the per-group photon count is known
    bounds = [(k * n) // n_groups for k in range(n_groups + 1)]
    counts = np.diff(bounds)
    used = counts > 0
    loo = np.abs(total - (g_re + 1j * g_im))[used] / (n - counts[used])
    k = used.sum()
    if k < 2:
        return value, math.inf
    se = math.sqrt((k - 1) / k * np.sum((loo - loo.mean()) ** 2))
    return value, se
