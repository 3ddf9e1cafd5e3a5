from .certification import Certificate, certify, compute_I_epsilon, m0_bound
from .curve_geometry import CurvatureProfile, TubeGeometry, validate_tube
from .eigensolve import SolverOptions, SpectralResult, dense_oracle, lowest_pairs
from .run_service import RunResult, run
from .strip_operator import AssembledForms, StripGrid, assemble_square_form
from .transverse_spectrum import dispersion, essential_edge, solve_root

__all__ = [
    "AssembledForms",
    "Certificate",
    "CurvatureProfile",
    "RunResult",
    "SolverOptions",
    "SpectralResult",
    "StripGrid",
    "TubeGeometry",
    "assemble_square_form",
    "certify",
    "compute_I_epsilon",
    "dense_oracle",
    "dispersion",
    "essential_edge",
    "lowest_pairs",
    "m0_bound",
    "run",
    "solve_root",
    "validate_tube",
]
