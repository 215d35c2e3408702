"""Star-shaped domains in R^4 with smooth implicit defining functions.

A body is the sublevel set ``{p : F(p) <= 1}`` of a smooth function
``F : R^4 -> R`` with ``F(0) < 1`` and ``F`` increasing along rays from the
origin, so the boundary hypersurface ``Y = {F = 1}`` is star-shaped about 0
and every ray meets it exactly once.  All geometric routines in this
subpackage consume batched evaluations of ``F``, its gradient and its
Hessian, so a body must expose those three callables (points are float
arrays of shape ``(n, 4)``).

Concrete bodies provided here:

* :class:`Ellipsoid` -- ``F(p) = pi*(|z1|^2/a + |z2|^2/b)`` in coordinates
  ``z1 = p0 + i p1``, ``z2 = p2 + i p3``; boundary encloses symplectic
  volume ``a*b/2``.
* :class:`QuadraticBody` -- a general positive-definite quadratic, possibly
  off-center.
* :class:`QuarticBody` -- quadratic plus a nonnegative combination of
  fourth powers of linear forms; convex by construction but certified
  post hoc like any other body.
* :class:`TransformedBody` -- pullback of a body under an affine map,
  used to express standardized (John-frame) copies of a body.

:func:`random_convex_body` draws reproducible random convex bodies for
survey experiments, and :func:`star_shape_certificate` /
:func:`convexity_certificate` bound the geometric invariants that the
rest of the toolkit assumes.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

from ..errors import PreconditionViolated

__all__ = [
    "ImplicitBody",
    "Ellipsoid",
    "QuadraticBody",
    "QuarticBody",
    "TransformedBody",
    "EllipsoidShape",
    "ellipsoid_quantities",
    "random_convex_body",
    "star_shape_certificate",
    "convexity_certificate",
    "boundary_point",
]


def _as_points(p: np.ndarray) -> np.ndarray:
    q = np.asarray(p, dtype=float)
    if q.ndim == 1:
        q = q[None, :]
    if q.ndim != 2 or q.shape[1] != 4:
        raise ValueError(f"expected points of shape (n, 4), got {q.shape}")
    return q


class ImplicitBody:
    """Base class: a star-shaped body ``{F <= 1}`` in R^4.

    Subclasses implement :meth:`value`, :meth:`grad` and :meth:`hess` on
    batches of points.  ``hess_form`` (the quadratic form ``v^T H v``) has
    a generic implementation; bodies with structured Hessians override it
    because the dynamics integrators call it in their inner loop.
    """

    def value(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_form(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        h = self.hess(p)
        return np.einsum("ni,nij,nj->n", v, h, v)

    def hess_mix(self, p: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        h = self.hess(p)
        return np.einsum("ni,nij,nj->n", v, h, w)


class Ellipsoid(ImplicitBody):
    """Standard symplectic ellipsoid with area parameters ``0 < a <= b``.

    The defining function is ``F(p) = d . p^2`` with
    ``d = (pi/a, pi/a, pi/b, pi/b)``; the two distinguished planar circles
    bound areas ``a`` and ``b``.
    """

    def __init__(self, a: float, b: float):
        if not (0.0 < a <= b):
            raise ValueError(f"need 0 < a <= b, got a={a!r}, b={b!r}")
        self.a = float(a)
        self.b = float(b)
        self.d = np.array([math.pi / a, math.pi / a, math.pi / b, math.pi / b])

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return f"Ellipsoid(a={self.a:g}, b={self.b:g})"

    def value(self, p: np.ndarray) -> np.ndarray:
        p = _as_points(p)
        return (p * p) @ self.d

    def grad(self, p: np.ndarray) -> np.ndarray:
        p = _as_points(p)
        return 2.0 * self.d * p

    def hess(self, p: np.ndarray) -> np.ndarray:
        p = _as_points(p)
        h = np.zeros((p.shape[0], 4, 4))
        h[:, np.arange(4), np.arange(4)] = 2.0 * self.d
        return h

    def hess_form(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        return 2.0 * ((v * v) @ self.d)

    def hess_mix(self, p: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return 2.0 * ((v * w) @ self.d)


class QuadraticBody(ImplicitBody):
    """Body ``{(p - c)^T Q (p - c) <= 1}`` for a positive-definite ``Q``."""

    def __init__(self, form: np.ndarray, center: Optional[np.ndarray] = None):
        q = np.asarray(form, dtype=float)
        if q.shape != (4, 4):
            raise ValueError("form must be a 4x4 matrix")
        q = 0.5 * (q + q.T)
        eigs = np.linalg.eigvalsh(q)
        if eigs[0] <= 0.0:
            raise PreconditionViolated(
                f"positive_definite: quadratic form has eigenvalue {eigs[0]:.3e} <= 0"
            )
        self.form = q
        self.center = (
            np.zeros(4) if center is None else np.asarray(center, dtype=float)
        )
        if self.center.shape != (4,):
            raise ValueError("center must be a 4-vector")
        # the origin must lie strictly inside for star-shapedness about 0
        if float(self.center @ q @ self.center) >= 1.0:
            raise PreconditionViolated(
                "contains_origin: quadratic body does not contain the origin"
            )

    def value(self, p: np.ndarray) -> np.ndarray:
        x = _as_points(p) - self.center
        return np.einsum("ni,ij,nj->n", x, self.form, x)

    def grad(self, p: np.ndarray) -> np.ndarray:
        x = _as_points(p) - self.center
        return 2.0 * x @ self.form

    def hess(self, p: np.ndarray) -> np.ndarray:
        p = _as_points(p)
        return np.broadcast_to(2.0 * self.form, (p.shape[0], 4, 4)).copy()

    def hess_form(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        return 2.0 * np.einsum("ni,ij,nj->n", v, self.form, v)

    def hess_mix(self, p: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return 2.0 * np.einsum("ni,ij,nj->n", v, self.form, w)


class QuarticBody(ImplicitBody):
    """Positive-definite quadratic plus nonnegative quartic ridge terms.

    ``F(p) = (p-c)^T Q (p-c) + sum_k t_k <u_k, p-c>^4`` with ``t_k >= 0``.
    Each quartic term is convex, so the sublevel set stays convex for any
    nonnegative coefficients; the certificates still verify this on
    samples because downstream code must not trust constructions blindly.
    """

    def __init__(
        self,
        form: np.ndarray,
        directions: np.ndarray,
        coefficients: np.ndarray,
        center: Optional[np.ndarray] = None,
    ):
        self._quad = QuadraticBody(form, center)
        self.directions = np.atleast_2d(np.asarray(directions, dtype=float))
        self.coefficients = np.atleast_1d(np.asarray(coefficients, dtype=float))
        if self.directions.shape[1] != 4:
            raise ValueError("directions must be (m, 4)")
        if self.coefficients.shape[0] != self.directions.shape[0]:
            raise ValueError("one coefficient per direction required")
        if np.any(self.coefficients < 0.0):
            raise PreconditionViolated(
                "nonnegative_ridges: quartic coefficients must be >= 0"
            )
        self.form = self._quad.form
        self.center = self._quad.center

    def _lin(self, p: np.ndarray) -> np.ndarray:
        x = _as_points(p) - self.center
        return x @ self.directions.T  # (n, m)

    def value(self, p: np.ndarray) -> np.ndarray:
        s = self._lin(p)
        return self._quad.value(p) + (s**4) @ self.coefficients

    def grad(self, p: np.ndarray) -> np.ndarray:
        s = self._lin(p)
        g = self._quad.grad(p)
        return g + 4.0 * ((s**3) * self.coefficients) @ self.directions

    def hess(self, p: np.ndarray) -> np.ndarray:
        s = self._lin(p)
        h = self._quad.hess(p)
        w = 12.0 * self.coefficients * s**2  # (n, m)
        return h + np.einsum("nm,mi,mj->nij", w, self.directions, self.directions)

    def hess_form(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        s = self._lin(p)
        dv = v @ self.directions.T
        return self._quad.hess_form(p, v) + (
            12.0 * (s**2) * (dv**2)
        ) @ self.coefficients

    def hess_mix(self, p: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        s = self._lin(p)
        dv = v @ self.directions.T
        dw = w @ self.directions.T
        return self._quad.hess_mix(p, v, w) + (
            12.0 * (s**2) * dv * dw
        ) @ self.coefficients


class TransformedBody(ImplicitBody):
    """Pullback ``F(A p + o)`` of another body's defining function.

    If ``phi(x) = B (x - x0)`` maps the base body onto the new one, pass
    ``matrix = B^{-1}`` composed appropriately; concretely the new body is
    ``{p : F_base(A p + o) <= 1}``, i.e. the image of the base body under
    ``x -> A^{-1}(x - o)``.
    """

    def __init__(self, base: ImplicitBody, matrix: np.ndarray, offset=None):
        self.base = base
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.shape != (4, 4):
            raise ValueError("matrix must be 4x4")
        self.offset = np.zeros(4) if offset is None else np.asarray(offset, float)

    def _push(self, p: np.ndarray) -> np.ndarray:
        return _as_points(p) @ self.matrix.T + self.offset

    def value(self, p: np.ndarray) -> np.ndarray:
        return self.base.value(self._push(p))

    def grad(self, p: np.ndarray) -> np.ndarray:
        return self.base.grad(self._push(p)) @ self.matrix

    def hess(self, p: np.ndarray) -> np.ndarray:
        h = self.base.hess(self._push(p))
        return np.einsum("ki,nkl,lj->nij", self.matrix, h, self.matrix)

    def hess_form(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.base.hess_form(self._push(p), v @ self.matrix.T)

    def hess_mix(self, p: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return self.base.hess_mix(
            self._push(p), v @ self.matrix.T, w @ self.matrix.T
        )


# ---------------------------------------------------------------------------
# Closed-form ellipsoid quantities
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class EllipsoidShape:
    """Area parameters of a standard ellipsoid, ordered ``a <= b``."""

    a: float
    b: float

    def __post_init__(self):
        if not (0.0 < self.a <= self.b):
            raise ValueError(f"need 0 < a <= b, got a={self.a!r}, b={self.b!r}")


def ellipsoid_quantities(a: float, b: float) -> dict:
    """Closed-form boundary quantities of the ellipsoid with areas (a, b).

    Returns a dict with keys ``diameter``, ``area``, ``total_mean_curvature``,
    ``volume`` (symplectic volume of the solid body), ``contact_volume``
    (twice the solid volume), ``min_action``, ``systolic_ratio`` and
    ``ruelle``.  The equal-area case uses the analytic limits of the
    two-parameter formulas.
    """
    shape = EllipsoidShape(float(min(a, b)), float(max(a, b)))
    a, b = shape.a, shape.b
    rt_pi = math.sqrt(math.pi)
    if math.isclose(a, b, rel_tol=1e-13, abs_tol=0.0):
        area = 2.0 * rt_pi * a ** 1.5
        tot_h = 2.0 * math.pi * a
    else:
        area = (4.0 * rt_pi / 3.0) * (b**2 * math.sqrt(a) - math.sqrt(b) * a**2) / (b - a)
        tot_h = (2.0 * math.pi / 3.0) * (b + a + a * b * math.log(b / a) / (b - a))
    return {
        "a": a,
        "b": b,
        "diameter": 2.0 * math.sqrt(b / math.pi),
        "area": area,
        "total_mean_curvature": tot_h,
        "volume": a * b / 2.0,
        "contact_volume": a * b,
        "min_action": a,
        "systolic_ratio": a / b,
        "ruelle": a + b,
    }


# ---------------------------------------------------------------------------
# Boundary ray solves and certificates
# ---------------------------------------------------------------------------


def boundary_point(body: ImplicitBody, directions: np.ndarray) -> np.ndarray:
    """Scale unit rays from the origin onto the boundary ``{F = 1}``.

    Newton iteration on ``r -> F(r u)``; star-shapedness makes the root
    unique and the derivative ``<grad F, u> > 0`` along each ray.
    """
    u = _as_points(directions)
    u = u / np.linalg.norm(u, axis=1, keepdims=True)
    r = np.ones(u.shape[0])
    for _ in range(80):
        p = r[:, None] * u
        f = body.value(p) - 1.0
        df = np.sum(body.grad(p) * u, axis=1)
        if np.any(df <= 0.0):
            raise PreconditionViolated(
                "star_shaped: defining function is not increasing along a ray"
            )
        step = f / df
        r = r - step
        if np.max(np.abs(step)) < 1e-14:
            break
    else:
        raise PreconditionViolated("star_shaped: ray solve failed to converge")
    return r[:, None] * u


def _fibonacci_directions(n: int, seed: Optional[int] = None) -> np.ndarray:
    """Roughly equidistributed directions on S^3 (deterministic by default)."""
    rng = np.random.default_rng(0 if seed is None else seed)
    u = rng.standard_normal((n, 4))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def star_shape_certificate(body: ImplicitBody, samples: int = 2048) -> float:
    """Minimum of ``<Z, nu>`` over sampled boundary points (Z = p/2).

    Positive output certifies (up to sampling) that the radial Liouville
    field is transverse to the boundary, which every routine downstream
    assumes.
    """
    y = boundary_point(body, _fibonacci_directions(samples))
    g = body.grad(y)
    gn = np.linalg.norm(g, axis=1)
    z_nu = 0.5 * np.sum(y * g, axis=1) / gn
    return float(np.min(z_nu))


def convexity_certificate(body: ImplicitBody, samples: int = 2048) -> float:
    """Minimum eigenvalue of the boundary shape operator over samples.

    Computed as the smallest eigenvalue of the second-fundamental-form
    matrix in an orthonormal tangent frame; ``>= -1e-9`` is the toolkit's
    working notion of "certified convex".
    """
    from .geometry import frame_arrays  # local import to avoid a cycle

    y = boundary_point(body, _fibonacci_directions(samples))
    fr = frame_arrays(body, y)
    lo = np.min(np.linalg.eigvalsh(fr.shape_matrix), axis=1)
    return float(np.min(lo))


def random_convex_body(
    rng: np.random.Generator,
    *,
    ridge_count: int = 3,
    ridge_scale: float = 0.35,
    translate_scale: float = 0.08,
    certify: bool = True,
) -> ImplicitBody:
    """Draw a random convex star-shaped body.

    Construction: a random positive-definite quadratic with area
    parameters in roughly [0.5, 2.5], plus a few nonnegative quartic ridge
    terms and a small translation.  Convexity holds by construction, but
    when ``certify`` is set the sampled certificate is checked anyway and
    a failure raises :class:`~reebru.errors.PreconditionViolated`.
    """
    q_orth, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    areas = rng.uniform(0.5, 2.5, size=4)
    quad = q_orth @ np.diag(math.pi / areas) @ q_orth.T
    dirs = rng.standard_normal((ridge_count, 4))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    coeff = rng.uniform(0.0, ridge_scale, size=ridge_count) * math.pi
    center = translate_scale * rng.standard_normal(4)
    body = QuarticBody(quad, dirs, coeff, center=center)
    if certify:
        star = star_shape_certificate(body, samples=512)
        if star <= 0.0:
            raise PreconditionViolated(
                f"star_shaped: sampled certificate {star:.3e} <= 0"
            )
        cvx = convexity_certificate(body, samples=512)
        if cvx < -1e-9:
            raise PreconditionViolated(
                f"convex: sampled curvature eigenvalue {cvx:.3e} < -1e-9"
            )
    return body
