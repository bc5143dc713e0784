"""Half-space radiative transport under structured illumination.

Three routes to the exiting hemispheric flux J_+(q0): a facile boundary
expansion solved by collocation against decaying rotated eigenmodes, the
rotated-reference-frame expansion, and Monte Carlo photon transport.
"""

from .errors import ConfigurationError, SolverError
from .fn_solver import (
    FluxCurve,
    FluxSample,
    FnConfig,
    FnSystem,
    FnWorkspace,
    assemble_A_entry,
    assemble_K_structured,
    hemispheric_flux,
    reconstruct_reflected_intensity,
    solve_fn,
)
from .mc_oracle import PhotonRecords, flux_fourier, simulate
from .mrrf_solver import MrrfBasis, MrrfSolution, mrrf_flux, solve_mrrf
from .spectrum import OpticalMedium, SpectralBasis
from .cli import RunConfig, convert_units, main, run

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "FluxCurve",
    "FluxSample",
    "FnConfig",
    "FnSystem",
    "FnWorkspace",
    "MrrfBasis",
    "MrrfSolution",
    "OpticalMedium",
    "PhotonRecords",
    "RunConfig",
    "SolverError",
    "SpectralBasis",
    "assemble_A_entry",
    "assemble_K_structured",
    "convert_units",
    "flux_fourier",
    "hemispheric_flux",
    "main",
    "mrrf_flux",
    "reconstruct_reflected_intensity",
    "run",
    "simulate",
    "solve_fn",
    "solve_mrrf",
]
