"""Spectral computations for Schrodinger operators on armchair nanotube graphs."""

from .errors import DegenerateError, NumericalError, PoleError
from .potential import Potential, PotentialError, make_delta_family, parse_potential
from .hill import fundamental_solutions, hill_band_edges, hill_bands, dirichlet_eigenvalues
from .monodromy import TubeParams, build_monodromy, build_monodromy_oracle, verify_identities
from .lyapunov import lyapunov, lyapunov_at, track_branches
from .spectrum import bands_for_k, full_spectrum, flat_bands
from .resonance import complex_resonances, real_resonances, delta_asymptotics
from .flatband import build_psi, decompose, reconstruct

__version__ = "0.1.0"

__all__ = [
    "DegenerateError", "NumericalError", "PoleError",
    "Potential", "PotentialError", "make_delta_family", "parse_potential",
    "fundamental_solutions", "hill_band_edges", "hill_bands", "dirichlet_eigenvalues",
    "TubeParams", "build_monodromy", "build_monodromy_oracle", "verify_identities",
    "lyapunov", "lyapunov_at", "track_branches",
    "bands_for_k", "full_spectrum", "flat_bands",
    "complex_resonances", "real_resonances", "delta_asymptotics",
    "build_psi", "decompose", "reconstruct",
]
