"""Numerical laboratory for inequalities on tensor fields.

Submodules: ``algebra`` (pointwise matrix algebra), ``calculus`` (grids,
fields, difference operators), ``kernel`` (conformal Killing fields),
``counterexamples``, ``spectra`` (discrete constants), ``stokes``
(least-squares Stokes solver) and ``cli``.
"""

from .algebra import cartan_decompose, dev, skew, sym
from .calculus import BoundaryPartition, Grid, ScalarField, TensorField, VectorField
from .spectra import SPECS, estimate_constant, refinement_study

__all__ = [
    "BoundaryPartition",
    "Grid",
    "SPECS",
    "ScalarField",
    "TensorField",
    "VectorField",
    "cartan_decompose",
    "dev",
    "estimate_constant",
    "refinement_study",
    "skew",
    "sym",
]
__version__ = "0.1.0"
