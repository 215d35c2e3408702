"""Largest inscribed ellipsoid of a convex body and its symplectic shape.

Pipeline: sample support points of the body over many directions, recover
the center (mean of opposite-direction support pairs, exact for centrally
symmetric bodies), pass to the polar body, fit the minimum-volume
enclosing ellipsoid of the polar samples with the multiplicative /
away-step coordinate ascent on the D-optimal design problem, and dualize:
the polar of the polar's MVEE is the maximal-volume inscribed ellipsoid.
A symplectic normal form of the inscribed quadratic then yields area
parameters ``a <= b`` and a linear symplectic change of frame carrying
the inscribed ellipsoid to the standard one.

The classical inclusion guarantee ``E subset K subset center + 4 (E -
center)`` (dimension 4) is *verified*, not assumed: support functions of
body and ellipsoid are compared over a fresh batch of directions and a
violation raises :class:`~reebru.errors.NotConvex`, since inclusion
failure on a genuinely convex body would indicate the fit diverged.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Tuple

import numpy as np
import scipy.linalg

from ..errors import NotConvex, PreconditionViolated
from .bodies import ImplicitBody, TransformedBody
from .geometry import support_points

__all__ = [
    "JohnResult",
    "john_ellipsoid",
    "standardized_body",
    "mvee_centered",
    "williamson_normal_form",
    "SYMPLECTIC_J",
]

# Block-diagonal symplectic structure for coordinates (x1, y1, x2, y2).
SYMPLECTIC_J = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)


def mvee_centered(
    points: np.ndarray, tol: float = 1e-7, max_iter: int = 200_000
) -> Tuple[np.ndarray, int]:
    """Minimum-volume origin-centered ellipsoid containing ``points``.

    Coordinate-ascent on the D-optimal design weights (multiplicative
    updates with away steps); returns the matrix ``A`` of the ellipsoid
    ``{x : x^T A x <= 1}`` and the iteration count.  Terminates when all
    leverages lie within ``tol`` of the dimension, which bounds the
    volume suboptimality by ``(1 + tol)^dim``.
    """
    x = np.asarray(points, dtype=float)
    m, dim = x.shape
    if m < dim + 1:
        raise ValueError("need more sample points than the dimension")
    w = np.full(m, 1.0 / m)
    it = 0
    for it in range(1, max_iter + 1):
        mat = (x * w[:, None]).T @ x
        try:
            minv = np.linalg.inv(mat)
        except np.linalg.LinAlgError as exc:
            raise NotConvex(f"enclosing-ellipsoid design became singular: {exc}") from exc
        g = np.einsum("ni,ij,nj->n", x, minv, x)
        hi = int(np.argmax(g))
        up = g[hi]
        active = w > 1e-12
        low_idx = np.flatnonzero(active)[int(np.argmin(g[active]))]
        low = g[low_idx]
        if up <= dim * (1.0 + tol) and low >= dim * (1.0 - tol):
            break
        if up - dim >= dim - low:
            lam = (up - dim) / (dim * (up - 1.0))
            w *= 1.0 - lam
            w[hi] += lam
        else:
            cap = w[low_idx] / max(1.0 - w[low_idx], 1e-300)
            if low > 1.0:
                lam = min((dim - low) / (dim * (low - 1.0)), cap)
            else:
                lam = cap
            w *= 1.0 + lam
            w[low_idx] = max(w[low_idx] - lam, 0.0)
    mat = (x * w[:, None]).T @ x
    return np.linalg.inv(mat) / dim, it


def williamson_normal_form(q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Symplectic diagonalization of a positive-definite 4x4 form.

    Returns ``(m, d)`` with ``m`` symplectic, ``m.T @ q @ m = diag(d)``
    and ``d = (d1, d1, d2, d2)``, ordered ``d1 >= d2 > 0``.
    """
    q = 0.5 * (np.asarray(q, dtype=float) + np.asarray(q, dtype=float).T)
    qh = scipy.linalg.sqrtm(q)
    qh = 0.5 * (qh.real + qh.real.T)
    qhi = np.linalg.inv(qh)
    k = qhi @ SYMPLECTIC_J @ qhi
    t, u = scipy.linalg.schur(k, output="real")
    # enforce +frequency orientation inside each 2x2 block
    for blk in (0, 2):
        if t[blk, blk + 1] < 0.0:
            u[:, [blk, blk + 1]] = u[:, [blk + 1, blk]]
            t[blk, blk + 1], t[blk + 1, blk] = -t[blk, blk + 1], -t[blk + 1, blk]
    s1, s2 = t[0, 1], t[2, 3]
    if s1 <= 0.0 or s2 <= 0.0:
        raise PreconditionViolated("positive_definite: symplectic frequencies not positive")
    d = np.array([1.0 / s1, 1.0 / s1, 1.0 / s2, 1.0 / s2])
    m = qhi @ u @ np.diag(np.sqrt(d))
    if d[0] < d[2]:
        perm = np.zeros((4, 4))
        perm[0, 2] = perm[1, 3] = perm[2, 0] = perm[3, 1] = 1.0
        m = m @ perm
        d = d[[2, 3, 0, 1]]
    return m, d


@dataclasses.dataclass(frozen=True)
class JohnResult:
    """Largest inscribed ellipsoid and the symplectic frame it defines.

    The inscribed ellipsoid is ``{x : (x-center)^T form (x-center) <= 1}``.
    ``matrix`` maps the standard ellipsoid frame into the body frame
    (``x = matrix @ z + center``); the standardizer is its inverse affine
    map, a linear symplectomorphism up to the recorded defect.
    """

    center: np.ndarray
    form: np.ndarray
    a: float
    b: float
    matrix: np.ndarray
    symplectic_defect: float
    inclusion_low: float
    inclusion_high: float
    design_iterations: int
    direction_count: int

    @property
    def standardizer(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


def _direction_grid(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((n, 4))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u


def john_ellipsoid(
    body: ImplicitBody,
    direction_count: int = 512,
    *,
    design_tol: float = 1e-7,
    check_directions: int = 4096,
    inclusion_slack: float = 5e-3,
) -> JohnResult:
    """Fit the maximal inscribed ellipsoid of a convex body.

    Raises :class:`~reebru.errors.NotConvex` when the verified inclusions
    ``E subset K subset center + 4(E - center)`` fail beyond
    ``inclusion_slack`` (relative), which is the operational convexity
    test of this toolkit.
    """
    u = _direction_grid(direction_count, seed=61_203)
    sp = support_points(body, u)
    sm = support_points(body, -u)
    center = 0.5 * (np.mean(sp, axis=0) + np.mean(sm, axis=0))

    h = np.sum(u * (sp - center), axis=1)
    h_opp = np.sum(-u * (sm - center), axis=1)
    if np.any(h <= 0.0) or np.any(h_opp <= 0.0):
        raise NotConvex("support function not positive about the recovered center")
    polar_pts = np.vstack([u / h[:, None], -u / h_opp[:, None]])
    a_mat, iters = mvee_centered(polar_pts, tol=design_tol)
    form = np.linalg.inv(a_mat)  # inscribed ellipsoid quadratic
    form = 0.5 * (form + form.T)

    m, d = williamson_normal_form(form)
    a, b = math.pi / d[0], math.pi / d[2]
    defect = float(np.max(np.abs(m.T @ SYMPLECTIC_J @ m - SYMPLECTIC_J)))
    if defect > 1e-10:
        raise PreconditionViolated(
            f"symplectic_frame: normal form defect {defect:.3e} exceeds 1e-10"
        )

    v = _direction_grid(check_directions, seed=90_317)
    body_support = np.sum(v * (support_points(body, v) - center), axis=1)
    ell_support = np.sqrt(np.einsum("ni,ij,nj->n", v, a_mat, v))
    ratio = body_support / ell_support
    lo, hi = float(np.min(ratio)), float(np.max(ratio))
    if lo < 1.0 - inclusion_slack or hi > 4.0 * (1.0 + inclusion_slack):
        raise NotConvex(
            "inscribed-ellipsoid inclusion failed: support ratio range "
            f"[{lo:.4f}, {hi:.4f}] outside [1, 4]"
        )
    return JohnResult(
        center=center,
        form=form,
        a=float(a),
        b=float(b),
        matrix=m,
        symplectic_defect=defect,
        inclusion_low=lo,
        inclusion_high=hi,
        design_iterations=iters,
        direction_count=direction_count,
    )


def standardized_body(body: ImplicitBody, fit: JohnResult) -> TransformedBody:
    """Image of ``body`` under the John-frame symplectomorphism.

    The returned body is ``{z : F(matrix @ z + center) <= 1}`` -- the
    original body carried to the frame where its inscribed ellipsoid is
    the standard ``E(a, b)``.  Linear symplectic maps preserve the contact
    dynamics' invariants, which tests exploit.
    """
    return TransformedBody(body, fit.matrix, fit.center)
