"""Multivariate decomposition finite element method for lognormal diffusion in 1D."""

from .allocate import allocate, derive_rates, exponents
from .driver import ProblemSpec, reference, run
from .gausscube import integrate, make_cubature
from .gf2lattice import cbc_construct
from .mdm import build_active_set
from .randomfield import make_field

__all__ = [
    "ProblemSpec",
    "allocate",
    "build_active_set",
    "cbc_construct",
    "derive_rates",
    "exponents",
    "integrate",
    "make_cubature",
    "make_field",
    "reference",
    "run",
]
__version__ = "0.1.0"
