"""Complex plane-wave direction vectors and rotated direction cosines.

A frame parameter nu and a transverse spatial frequency q define the complex
unit vector k(nu, q) = (i nu q_vec, sqrt(1 + (nu q)^2)) with k.k = 1; angular
functions are evaluated in the frame whose z-axis points along k.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = ["PlaneWaveFrame", "frame_angles", "khat_z", "rotated_mu"]


def khat_z(x):
    """z-component sqrt(1 + x^2) >= 1 of the complex unit direction."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("argument must be finite")
    out = np.hypot(1.0, x)
    return out[()] if out.ndim == 0 else out


def rotated_mu(xi: float, q: float, mu, phi, phi_q: float = 0.0):
    """Direction cosine seen from the frame tilted toward k(-xi, q_vec):
    khat_z(xi q) mu - i xi q sqrt(1 - mu^2) cos(phi - phi_q)."""
    mu = np.asarray(mu, dtype=float)
    sin = np.sqrt(np.clip(1.0 - mu * mu, 0.0, None))
    return khat_z(xi * q) * mu - 1j * xi * q * sin * np.cos(np.asarray(phi) - phi_q)


def frame_angles(nu: float, q_vec):
    """Wigner-table argument x = |nu| q and the frame azimuth phi_k.

    phi_k equals the polar angle of q_vec for nu > 0 and gains pi for
    nu < 0; the q = 0 frame degenerates to the identity rotation (x = 0,
    phi_k = 0 by convention).
    """
    nu = float(nu)
    if nu == 0.0:
        raise ConfigurationError("frame parameter nu must be nonzero")
    qx, qy = float(q_vec[0]), float(q_vec[1])
    q = math.hypot(qx, qy)
    if q == 0.0:
        return 0.0, 0.0
    phi_q = math.atan2(qy, qx)
    return abs(nu) * q, phi_q if nu > 0 else phi_q + math.pi


@dataclass(frozen=True)
class PlaneWaveFrame:
    """Immutable bookkeeping for one (nu, q_vec) plane-wave frame."""

    nu: float
    q_vec: tuple

    def __post_init__(self):
        if self.nu == 0.0:
            raise ConfigurationError("frame parameter nu must be nonzero")
        object.__setattr__(
            self, "q_vec", (float(self.q_vec[0]), float(self.q_vec[1]))
        )

    @property
    def q(self) -> float:
        return math.hypot(*self.q_vec)

    @property
    def phi_q(self) -> float:
        return math.atan2(self.q_vec[1], self.q_vec[0]) if self.q > 0 else 0.0

    @property
    def x(self) -> float:
        """Argument |nu q| of the continued Wigner d-matrices."""
        return abs(self.nu) * self.q

    @property
    def cos_theta(self) -> float:
        return khat_z(self.x)

    @property
    def sin_theta(self) -> complex:
        return 1j * self.x

    @property
    def phi_khat(self) -> float:
        if self.q == 0.0:
            return 0.0
        return self.phi_q if self.nu > 0 else self.phi_q + math.pi

    @property
    def khat(self) -> np.ndarray:
        return np.array(
            [1j * self.nu * self.q_vec[0], 1j * self.nu * self.q_vec[1], self.cos_theta]
        )

    def unit_dot(self) -> complex:
        """k.k, identically 1 up to rounding."""
        kx, ky, kz = self.khat
        return kx * kx + ky * ky + kz * kz
