"""Numerical invariants of low-dimensional symplectic dynamics.

Rotation numbers of symplectic matrix paths, Conley-Zehnder indices, Ruelle
and Calabi invariants of Hamiltonian disk maps, open-book transfer of disk
data to contact three-spheres, and direct Reeb-flow invariants of star-shaped
hypersurfaces in R^4.
"""
from __future__ import annotations

__version__ = "0.1.0"

from . import errors  # noqa: F401
from .sp2 import (  # noqa: F401
    CzResult,
    LiftedSymplecticPath,
    cz_index,
    lift_path,
    rotation_rel_s,
    sigma,
)
