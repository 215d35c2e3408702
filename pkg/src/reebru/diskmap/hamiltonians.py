"""Disk Hamiltonians: radial profiles, localized twists, time concatenation.

Every Hamiltonian exposes vectorized ``value/grad/hess`` over component
arrays ``(t, x, y)`` and decomposes the unit time interval into *legs* —
windows with an autonomous generator and a time multiplier.  A single
time-dependent evaluator is one leg; the two-stage composite used by the
counterexample construction is two legs at double strength.  Integrators
bind a leg to the current batch of points first (``bind``), which lets the
twist Hamiltonian freeze its point-to-disk assignment for the whole leg.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.polynomial import polyval2d

TWO_PI = 2.0 * np.pi
_TINY_R = 1e-12


# ---------------------------------------------------------------------------
# radial profiles


@dataclass(frozen=True)
class RadialProfile:
    """A radial function h(r) with derivatives, for rotationally symmetric
    Hamiltonians H(z) = h(|z|).

    ``dh_over_r`` may be supplied when h′(r)/r has a removable singularity
    that the default guarded quotient would resolve less accurately.
    """

    h: Callable[[np.ndarray], np.ndarray]
    dh: Callable[[np.ndarray], np.ndarray]
    d2h: Callable[[np.ndarray], np.ndarray]
    dh_over_r: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    #: radius up to which h(r) = h(0) + h''(0) r^2/2 holds exactly, making the
    #: generated field linear there (rigid rotation about the center).  The
    #: integrator may advance such points in closed form.  inf = everywhere.
    quadratic_radius: float = 0.0
    #: radius beyond which h vanishes identically (None = no compact support)
    support_radius: Optional[float] = None

    def ratio(self, r: np.ndarray) -> np.ndarray:
        """h′(r)/r with the r → 0 limit h″(0) filled in."""
        if self.dh_over_r is not None:
            return self.dh_over_r(r)
        r = np.asarray(r, dtype=float)
        rs = np.maximum(r, _TINY_R)
        out = self.dh(rs) / rs
        small = r < 1e-7
        if np.any(small):
            out = np.where(small, self.d2h(r), out)
        return out


def rotation_profile(coefficient: float) -> RadialProfile:
    """h(r) = coefficient * pi * (1 - r^2): rigid rotation by ``coefficient``
    turns per unit time (counterclockwise for positive values)."""
    c = float(coefficient)
    return RadialProfile(
        h=lambda r: c * np.pi * (1.0 - r * r),
        dh=lambda r: -2.0 * np.pi * c * r,
        d2h=lambda r: np.full_like(np.asarray(r, dtype=float), -2.0 * np.pi * c),
        dh_over_r=lambda r: np.full_like(np.asarray(r, dtype=float), -2.0 * np.pi * c),
        name=f"rotation({c:g})",
        quadratic_radius=np.inf,
    )


def quartic_profile() -> RadialProfile:
    """h(r) = (1 - r^2)^2, the standard analytic test profile."""
    return RadialProfile(
        h=lambda r: (1.0 - r * r) ** 2,
        dh=lambda r: -4.0 * r * (1.0 - r * r),
        d2h=lambda r: -4.0 + 12.0 * r * r,
        dh_over_r=lambda r: -4.0 * (1.0 - r * r),
        name="quartic",
    )


def cosine_profile() -> RadialProfile:
    """h(r) = cos(pi r^2 / 2), vanishing at the boundary with zero slope at 0."""
    # h'(r)/r = −pi sin(pi r²/2): no singularity to guard at all
    return RadialProfile(
        h=lambda r: np.cos(0.5 * np.pi * r * r),
        dh=lambda r: -np.pi * r * np.sin(0.5 * np.pi * r * r),
        d2h=lambda r: (-np.pi * np.sin(0.5 * np.pi * r * r)
                       - np.pi ** 2 * r * r * np.cos(0.5 * np.pi * r * r)),
        dh_over_r=lambda r: -np.pi * np.sin(0.5 * np.pi * r * r),
        name="cosine",
    )


# ---------------------------------------------------------------------------
# Hamiltonian base and legs


@dataclass(frozen=True)
class Leg:
    """One autonomous window of the unit time interval.

    The generator is ``mult * ham`` active on [t0, t1); integrating it is the
    same as integrating ``ham`` for proper time mult*(t1 − t0).
    """

    ham: "DiskHamiltonian"
    mult: float
    t0: float
    t1: float

    @property
    def proper_time(self) -> float:
        return self.mult * (self.t1 - self.t0)


class DiskHamiltonian:
    """Base class; subclasses fill in value/grad/hess.

    Evaluators take (t, x, y) with x, y broadcastable arrays and are pure.
    ``boundary_coefficient`` is the B of a Hamiltonian equal to B*pi*(1-r^2)
    near the boundary circle, when that applies (the open-book transfer
    needs it); None otherwise.
    """

    autonomous: bool = True
    radial: bool = False
    boundary_coefficient: Optional[float] = None

    def value(self, t, x, y):
        raise NotImplementedError

    def grad(self, t, x, y):
        raise NotImplementedError

    def hess(self, t, x, y):
        raise NotImplementedError

    def legs(self) -> Sequence[Leg]:
        return (Leg(self, 1.0, 0.0, 1.0),)

    def omega_hint(self) -> Optional[float]:
        """Bound on the angular rate of the variational flow (rad per unit
        proper time), used for step-size planning; None = sample it."""
        return None

    def bind(self, x, y) -> "BoundField":
        return BoundField(self)


class BoundField:
    """A Hamiltonian frozen against one batch of points for one leg.

    The default implementation just forwards to the Hamiltonian; localized
    Hamiltonians override ``bind`` to precompute which disk each point
    belongs to (valid for a whole leg because their flows preserve the
    distance to the assigned center).
    """

    def __init__(self, ham: DiskHamiltonian):
        self.ham = ham

    def velocity(self, t, x, y):
        gx, gy = self.ham.grad(t, x, y)
        return gy, -gx

    def hess(self, t, x, y):
        return self.ham.hess(t, x, y)

    def lagrangian(self, t, x, y):
        """Action integrand λ(X_H) + H = H − (x H_x + y H_y)/2."""
        gx, gy = self.ham.grad(t, x, y)
        return self.ham.value(t, x, y) - 0.5 * (x * gx + y * gy)

    def energy(self, t, x, y):
        return self.ham.value(t, x, y)


# ---------------------------------------------------------------------------
# concrete Hamiltonians


class RadialHamiltonian(DiskHamiltonian):
    radial = True

    def __init__(self, profile: RadialProfile,
                 boundary_coefficient: Optional[float] = None,
                 omega: Optional[float] = None):
        self.profile = profile
        self.boundary_coefficient = boundary_coefficient
        self._omega = omega

    def __repr__(self):
        return f"RadialHamiltonian({self.profile.name or 'custom'})"

    def value(self, t, x, y):
        return self.profile.h(np.hypot(x, y))

    def grad(self, t, x, y):
        w = self.profile.ratio(np.hypot(x, y))
        return w * x, w * y

    def hess(self, t, x, y):
        r = np.hypot(x, y)
        w = self.profile.ratio(r)
        u = self.profile.d2h(r) - w
        r2 = np.maximum(r * r, _TINY_R)
        hxx = w + u * x * x / r2
        hxy = u * x * y / r2
        hyy = w + u * y * y / r2
        return hxx, hxy, hyy

    def omega_hint(self):
        if self._omega is not None:
            return self._omega
        r = np.linspace(0.0, 1.0, 257)
        return 2.0 * float(np.max(np.abs(self.profile.d2h(r))
                                  + np.abs(self.profile.ratio(r))))


class CallableHamiltonian(DiskHamiltonian):
    """Wrap plain callables; missing derivatives fall back to central
    differences (step 1e-6 for the gradient, 1e-4 for the Hessian)."""

    def __init__(self, fn, grad=None, hess=None, autonomous=True,
                 boundary_coefficient=None, omega=None):
        self._fn = fn
        self._grad = grad
        self._hess = hess
        self.autonomous = autonomous
        self.boundary_coefficient = boundary_coefficient
        self._omega = omega

    def value(self, t, x, y):
        return self._fn(t, np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def grad(self, t, x, y):
        if self._grad is not None:
            return self._grad(t, x, y)
        e = 1e-6
        gx = (self._fn(t, x + e, y) - self._fn(t, x - e, y)) / (2 * e)
        gy = (self._fn(t, x, y + e) - self._fn(t, x, y - e)) / (2 * e)
        return gx, gy

    def hess(self, t, x, y):
        if self._hess is not None:
            return self._hess(t, x, y)
        e = 1e-4
        gxp, _ = self.grad(t, x + e, y)
        gxm, _ = self.grad(t, x - e, y)
        gxu, gyu = self.grad(t, x, y + e)
        gxd, gyd = self.grad(t, x, y - e)
        return ((gxp - gxm) / (2 * e), (gxu - gxd) / (2 * e),
                (gyu - gyd) / (2 * e))

    def omega_hint(self):
        return self._omega


class _CenterHash:
    """Uniform-cell spatial index mapping points to the disk containing them.

    Cells have side 2*support_radius, so a support circle meets at most a
    2 x 2 block; each cell stores the (few) candidate disk ids overlapping it.
    """

    def __init__(self, centers: np.ndarray, support_radius: float):
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        self.rad = float(support_radius)
        w = 2.0 * self.rad
        self.w = w
        self.lo = -1.0 - w
        self.n_cells = int(np.ceil((2.0 + 2.0 * w) / w)) + 1
        buckets: dict[int, list[int]] = {}
        for j, (cx, cy) in enumerate(self.centers):
            i0 = int((cx - self.rad - self.lo) / w)
            i1 = int((cx + self.rad - self.lo) / w)
            k0 = int((cy - self.rad - self.lo) / w)
            k1 = int((cy + self.rad - self.lo) / w)
            for ii in range(i0, i1 + 1):
                for kk in range(k0, k1 + 1):
                    buckets.setdefault(ii * self.n_cells + kk, []).append(j)
        cmax = max((len(v) for v in buckets.values()), default=1)
        table = np.full((self.n_cells * self.n_cells, cmax), -1, dtype=np.int64)
        for cell, ids in buckets.items():
            table[cell, :len(ids)] = ids
        self.table = table

    def assign(self, x, y):
        """Return (inside mask, dx, dy) relative to each point's disk center;
        dx, dy are zero for points in no disk."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(self.centers) == 0:          # zero-disk filler Hamiltonian
            inside = np.zeros(x.shape, dtype=bool)
            return inside, np.zeros_like(x), np.zeros_like(y)
        ix = np.clip(((x - self.lo) / self.w).astype(np.int64), 0, self.n_cells - 1)
        iy = np.clip(((y - self.lo) / self.w).astype(np.int64), 0, self.n_cells - 1)
        cand = self.table[ix * self.n_cells + iy]          # (N, cmax)
        cx = self.centers[cand, 0]
        cy = self.centers[cand, 1]
        d2 = (x[..., None] - cx) ** 2 + (y[..., None] - cy) ** 2
        d2 = np.where(cand >= 0, d2, np.inf)
        best = np.argmin(d2, axis=-1)
        take = np.arange(len(best))
        d2b = d2[take, best]
        inside = d2b <= self.rad * self.rad
        bx = np.where(inside, cx[take, best], x)
        by = np.where(inside, cy[take, best], y)
        return inside, x - bx, y - by


class TwistHamiltonian(DiskHamiltonian):
    """Sum of one radial bump per disk, over a family of disjoint disks:
    H(z) = g(|z − c_j|) for the disk containing z, 0 elsewhere.

    ``profile`` must vanish identically for r ≥ support_radius.
    """

    def __init__(self, centers, profile: RadialProfile, support_radius: float,
                 omega: Optional[float] = None):
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        self.profile = profile
        self.support_radius = float(support_radius)
        self._hash = _CenterHash(self.centers, self.support_radius)
        self._omega = omega

    def value(self, t, x, y):
        inside, dx, dy = self._hash.assign(x, y)
        out = self.profile.h(np.hypot(dx, dy))
        return np.where(inside, out, 0.0)

    def grad(self, t, x, y):
        inside, dx, dy = self._hash.assign(x, y)
        w = np.where(inside, self.profile.ratio(np.hypot(dx, dy)), 0.0)
        return w * dx, w * dy

    def hess(self, t, x, y):
        inside, dx, dy = self._hash.assign(x, y)
        r = np.hypot(dx, dy)
        w = np.where(inside, self.profile.ratio(r), 0.0)
        u = np.where(inside, self.profile.d2h(r) - self.profile.ratio(r), 0.0)
        r2 = np.maximum(r * r, _TINY_R)
        return (w + u * dx * dx / r2, u * dx * dy / r2, w + u * dy * dy / r2)

    def bind(self, x, y):
        inside, dx, dy = self._hash.assign(x, y)
        return _BoundTwist(self, inside, x - dx, y - dy)

    def omega_hint(self):
        if self._omega is not None:
            return self._omega
        r = np.linspace(0.0, self.support_radius, 513)
        return 2.0 * float(np.max(np.abs(self.profile.d2h(r))
                                  + np.abs(self.profile.ratio(r))))


class _BoundTwist(BoundField):
    """Twist field with the point → disk assignment frozen for a leg.

    Valid because each local flow is a rotation about its disk center: the
    radius |z − c| is conserved, so no point changes disk mid-leg.
    """

    def __init__(self, ham: TwistHamiltonian, inside, cx, cy):
        self.ham = ham
        self.inside = inside
        self._cx = cx
        self._cy = cy

    def _offsets(self, x, y):
        return x - self._cx, y - self._cy

    def velocity(self, t, x, y):
        dx, dy = self._offsets(x, y)
        w = np.where(self.inside, self.ham.profile.ratio(np.hypot(dx, dy)), 0.0)
        return w * dy, -w * dx

    def hess(self, t, x, y):
        dx, dy = self._offsets(x, y)
        r = np.hypot(dx, dy)
        pr = self.ham.profile
        w = np.where(self.inside, pr.ratio(r), 0.0)
        u = np.where(self.inside, pr.d2h(r) - pr.ratio(r), 0.0)
        r2 = np.maximum(r * r, _TINY_R)
        return (w + u * dx * dx / r2, u * dx * dy / r2, w + u * dy * dy / r2)

    def lagrangian(self, t, x, y):
        dx, dy = self._offsets(x, y)
        r = np.hypot(dx, dy)
        pr = self.ham.profile
        w = np.where(self.inside, pr.ratio(r), 0.0)
        val = np.where(self.inside, pr.h(r), 0.0)
        # λ(X) = −w (x dx + y dy)/2 with X = w (dy, −dx)
        return val - 0.5 * w * (x * dx + y * dy)

    def energy(self, t, x, y):
        dx, dy = self._offsets(x, y)
        return np.where(self.inside, self.ham.profile.h(np.hypot(dx, dy)), 0.0)


class TimeConcatHamiltonian(DiskHamiltonian):
    """Run each part at k-fold strength on its 1/k window of the unit
    interval; the time-one map is the composition of the parts' time-one
    maps (last part applied last)."""

    autonomous = False

    def __init__(self, parts: Sequence[DiskHamiltonian],
                 boundary_coefficient: Optional[float] = None):
        self.parts = list(parts)
        if not self.parts:
            raise ValueError("need at least one part")
        self.boundary_coefficient = boundary_coefficient

    def legs(self):
        k = len(self.parts)
        return tuple(Leg(p, float(k), i / k, (i + 1) / k)
                     for i, p in enumerate(self.parts))

    def _pick(self, t):
        k = len(self.parts)
        i = int(np.floor((t % 1.0) * k))
        return self.parts[min(i, k - 1)], k

    def value(self, t, x, y):
        p, k = self._pick(t)
        return k * p.value(t, x, y)

    def grad(self, t, x, y):
        p, k = self._pick(t)
        gx, gy = p.grad(t, x, y)
        return k * gx, k * gy

    def hess(self, t, x, y):
        p, k = self._pick(t)
        hxx, hxy, hyy = p.hess(t, x, y)
        return k * hxx, k * hxy, k * hyy


class RotatedHamiltonian(DiskHamiltonian):
    """H∘R(−θ): generates the conjugated flow R(θ) φ R(−θ)."""

    def __init__(self, ham: DiskHamiltonian, angle_turns: float):
        self.base = ham
        self.angle_turns = float(angle_turns)
        a = TWO_PI * angle_turns
        self._c, self._s = np.cos(a), np.sin(a)
        self.autonomous = ham.autonomous
        self.boundary_coefficient = ham.boundary_coefficient

    def _back(self, x, y):
        return self._c * x + self._s * y, -self._s * x + self._c * y

    def value(self, t, x, y):
        return self.base.value(t, *self._back(x, y))

    def grad(self, t, x, y):
        gx, gy = self.base.grad(t, *self._back(x, y))
        return self._c * gx - self._s * gy, self._s * gx + self._c * gy

    def hess(self, t, x, y):
        hxx, hxy, hyy = self.base.hess(t, *self._back(x, y))
        c, s = self._c, self._s
        nxx = c * c * hxx - 2 * c * s * hxy + s * s * hyy
        nxy = c * s * (hxx - hyy) + (c * c - s * s) * hxy
        nyy = s * s * hxx + 2 * c * s * hxy + c * c * hyy
        return nxx, nxy, nyy

    def legs(self):
        return tuple(Leg(RotatedHamiltonian(leg.ham, self.angle_turns),
                         leg.mult, leg.t0, leg.t1)
                     for leg in self.base.legs())

    def omega_hint(self):
        return self.base.omega_hint()


def random_polynomial_hamiltonian(rng: np.random.Generator, degree: int = 3,
                                  amplitude: float = 0.3) -> CallableHamiltonian:
    """A random smooth autonomous Hamiltonian vanishing on the boundary:
    (1 − r²) times a random polynomial.  Analytic derivatives throughout."""
    c = rng.normal(scale=amplitude, size=(degree + 1, degree + 1))
    cx = np.zeros_like(c)
    cx[:-1, :] = c[1:, :] * np.arange(1, degree + 1)[:, None]
    cy = np.zeros_like(c)
    cy[:, :-1] = c[:, 1:] * np.arange(1, degree + 1)[None, :]
    cxx = np.zeros_like(cx)
    cxx[:-1, :] = cx[1:, :] * np.arange(1, degree + 1)[:, None]
    cxy = np.zeros_like(cx)
    cxy[:, :-1] = cx[:, 1:] * np.arange(1, degree + 1)[None, :]
    cyy = np.zeros_like(cy)
    cyy[:, :-1] = cy[:, 1:] * np.arange(1, degree + 1)[None, :]

    def fn(t, x, y):
        return (1.0 - x * x - y * y) * polyval2d(x, y, c)

    def grad(t, x, y):
        q = 1.0 - x * x - y * y
        p = polyval2d(x, y, c)
        return (q * polyval2d(x, y, cx) - 2.0 * x * p,
                q * polyval2d(x, y, cy) - 2.0 * y * p)

    def hess(t, x, y):
        q = 1.0 - x * x - y * y
        p = polyval2d(x, y, c)
        px, py = polyval2d(x, y, cx), polyval2d(x, y, cy)
        hxx = q * polyval2d(x, y, cxx) - 4.0 * x * px - 2.0 * p
        hxy = q * polyval2d(x, y, cxy) - 2.0 * x * py - 2.0 * y * px
        hyy = q * polyval2d(x, y, cyy) - 4.0 * y * py - 2.0 * p
        return hxx, hxy, hyy

    return CallableHamiltonian(fn, grad=grad, hess=hess)


def validate_hamiltonian(ham: DiskHamiltonian,
                         rng: Optional[np.random.Generator] = None) -> dict:
    """Check the two structural invariants: vanishing on the boundary circle
    (64 samples, a few times) and gradient consistency with central
    differences at random interior points.  Returns a report dict."""
    rng = rng or np.random.default_rng(0)
    th = TWO_PI * (np.arange(64) + 0.5) / 64
    bx, by = np.cos(th), np.sin(th)
    boundary_max = 0.0
    for t in (0.0, 0.37, 0.52, 0.81):
        boundary_max = max(boundary_max, float(np.max(np.abs(ham.value(t, bx, by)))))
    r = np.sqrt(rng.uniform(0.0, 0.9, size=24))
    a = rng.uniform(0.0, TWO_PI, size=24)
    px, py = r * np.cos(a), r * np.sin(a)
    e = 1e-6
    grad_max = 0.0
    for t in (0.1, 0.6):
        gx, gy = ham.grad(t, px, py)
        fx = (ham.value(t, px + e, py) - ham.value(t, px - e, py)) / (2 * e)
        fy = (ham.value(t, px, py + e) - ham.value(t, px, py - e)) / (2 * e)
        grad_max = max(grad_max, float(np.max(np.abs(gx - fx))),
                       float(np.max(np.abs(gy - fy))))
    return {"boundary_max": boundary_max, "gradient_max": grad_max,
            "ok": boundary_max < 1e-9 and grad_max < 1e-6}
