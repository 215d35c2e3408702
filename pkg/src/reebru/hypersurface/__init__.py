"""Geometry and contact dynamics of star-shaped hypersurfaces in R^4.

Bodies are sublevel sets of smooth implicit functions; the boundary
three-sphere carries the restriction of the radial primitive of the
symplectic form, and this subpackage measures its invariants: surface
quadrature and curvature integrals, quaternion frames and rotation
densities, contact-flow trajectories with rotation-angle lifts, the
average-rotation (Ruelle-type) invariant, closed-orbit search for the
systolic ratio, inscribed-ellipsoid fitting with symplectic
standardization, and survey drivers tabulating how the invariants move
across families of convex bodies.
"""

from .bodies import (
    Ellipsoid,
    EllipsoidShape,
    ImplicitBody,
    QuadraticBody,
    QuarticBody,
    TransformedBody,
    boundary_point,
    convexity_certificate,
    ellipsoid_quantities,
    random_convex_body,
    star_shape_certificate,
)
from .dynamics import (
    OrbitSearchResult,
    ReebTrajectory,
    RuelleEstimate,
    TangentAverages,
    closed_orbit_search,
    default_step,
    reeb_flow,
    ruelle_invariant,
    unit_tangent_averages,
)
from .geometry import (
    CurvatureData,
    FrameArrays,
    QuaternionFrame,
    SurfaceQuadrature,
    curvature_integrals,
    diameter,
    frame_arrays,
    geometry_at,
    rotation_density,
    support_points,
    surface_quadrature,
)
from .john import (
    JohnResult,
    john_ellipsoid,
    mvee_centered,
    standardized_body,
    williamson_normal_form,
)
from .survey import (
    BoundRow,
    BoundSurvey,
    SandwichReport,
    SandwichRow,
    bound_experiment,
    sandwich_check,
)

__all__ = [
    "Ellipsoid",
    "EllipsoidShape",
    "ImplicitBody",
    "QuadraticBody",
    "QuarticBody",
    "TransformedBody",
    "boundary_point",
    "convexity_certificate",
    "ellipsoid_quantities",
    "random_convex_body",
    "star_shape_certificate",
    "OrbitSearchResult",
    "ReebTrajectory",
    "RuelleEstimate",
    "TangentAverages",
    "closed_orbit_search",
    "default_step",
    "reeb_flow",
    "ruelle_invariant",
    "unit_tangent_averages",
    "CurvatureData",
    "FrameArrays",
    "QuaternionFrame",
    "SurfaceQuadrature",
    "curvature_integrals",
    "diameter",
    "frame_arrays",
    "geometry_at",
    "rotation_density",
    "support_points",
    "surface_quadrature",
    "JohnResult",
    "john_ellipsoid",
    "mvee_centered",
    "standardized_body",
    "williamson_normal_form",
    "BoundRow",
    "BoundSurvey",
    "SandwichReport",
    "SandwichRow",
    "bound_experiment",
    "sandwich_check",
]
