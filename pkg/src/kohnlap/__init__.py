"""Numerical Kohn Laplacian on compact strictly pseudoconvex hypersurfaces.

Spectra by Galerkin projection onto polynomial spaces, eigenvalue branches
under conformal changes of the contact form, and criticality certificates
for eigenvalue functionals.
"""
from .catalog import CatalogEntry, KnownEigenvalue, deformed_sphere, from_id, reinhardt, sphere
from .deformation import DeformationPath, eigen_branches, make_path, verify_slopes
from .errors import ComputationError, ConfigError, KohnLapError
from .expr import parse
from .functions import FunctionRep
from .geometry import DefiningSurface, build_quadrature, integrate, levi_data, tangential_pairing
from .kohn import PseudohermitianStructure, apply_box_strong, conformal_apply, d0_distance
from .spectral import SpectrumResult, build_basis, spectrum
from .criticality import CriticalityCertificate, ratio_certificate, search_certificate

__version__ = "0.1.0"

__all__ = [
    "CatalogEntry", "KnownEigenvalue", "deformed_sphere", "from_id", "reinhardt", "sphere",
    "DeformationPath", "eigen_branches", "make_path", "verify_slopes",
    "ComputationError", "ConfigError", "KohnLapError",
    "parse", "FunctionRep",
    "DefiningSurface", "build_quadrature", "integrate", "levi_data", "tangential_pairing",
    "PseudohermitianStructure", "apply_box_strong", "conformal_apply", "d0_distance",
    "SpectrumResult", "build_basis", "spectrum",
    "CriticalityCertificate", "ratio_certificate", "search_certificate",
]
