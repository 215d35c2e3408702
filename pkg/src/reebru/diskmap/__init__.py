"""Hamiltonian dynamics on the unit disk and invariants of the time-one map.

Conventions: the symplectic form is dx ∧ dy, the Hamiltonian field solves
ι_X ω = dH (so X = (∂H/∂y, −∂H/∂x)), the radial primitive is
λ = (x dy − y dx)/2, and rotation numbers are in turns.  Time-dependent
Hamiltonians are 1-periodic in t; "one iteration" always means the time-one
map.
"""
from .hamiltonians import (  # noqa: F401
    CallableHamiltonian,
    DiskHamiltonian,
    RadialHamiltonian,
    RadialProfile,
    RotatedHamiltonian,
    TimeConcatHamiltonian,
    TwistHamiltonian,
    cosine_profile,
    quartic_profile,
    random_polynomial_hamiltonian,
    rotation_profile,
    validate_hamiltonian,
)
from .engine import DiskFlow, FlowResult, integrate_flow  # noqa: F401
from .invariants import (  # noqa: F401
    BirkhoffResult,
    CalabiResult,
    DiskOrbitSpec,
    DomainDecomposition,
    RuelleResult,
    action_map,
    birkhoff_averages,
    calabi,
    disk_quadrature,
    radial_action,
    radial_rotation,
    ruelle_diskmap,
)
from .periodic import (  # noqa: F401
    FloodRecord,
    PeriodicPoint,
    PeriodicReport,
    find_periodic_points,
)
