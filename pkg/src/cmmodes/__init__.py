"""Compressed manifold modes on triangle meshes via accelerated ADMM."""

from .acceleration import ConvergenceTrace, MomentumState, solve
from .harness import RunSpec, compare, run
from .mesh import TriangleMesh, generate_lshape, generate_sphere, load_mesh
from .operators import LaplaceOperator, build_laplacian, generalized_eigs
from .solver import AdmmState, SolveConfig
from .spectra import ModeSet, build_mode_set, compressed_eigenvalue, flip_mode

__all__ = [
    "AdmmState",
    "ConvergenceTrace",
    "LaplaceOperator",
    "ModeSet",
    "MomentumState",
    "RunSpec",
    "SolveConfig",
    "TriangleMesh",
    "build_laplacian",
    "build_mode_set",
    "compare",
    "compressed_eigenvalue",
    "flip_mode",
    "generalized_eigs",
    "generate_lshape",
    "generate_sphere",
    "load_mesh",
    "run",
    "solve",
]

__version__ = "0.1.0"
