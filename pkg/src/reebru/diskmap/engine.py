"""Batch integration of disk Hamiltonian flows with Jacobian transport.

Two fixed-step engines:

* ``rk4`` — classical Runge–Kutta on positions and on the variational
  equation dJ/dt = (J_std · Hess H) J.  Default.
* ``midpoint`` — implicit midpoint with a 2x2 Newton solve per step for the
  positions and the induced Cayley update for the Jacobian.  The Cayley
  factor has unit determinant identically (the generator is traceless), and
  for locally linear fields (rigid rotations, the deep interior of twist
  disks) the step preserves the conserved radius exactly, so points never
  leak across region boundaries no matter how long the run.

Both engines stream the circle invariant of the transported Jacobian and
maintain its continuous lift in turns; a jump of a quarter turn or more
between steps marks the node as under-resolved (``coarse``) rather than
raising, so grid sweeps can refine or exclude selectively.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import StepUnstable
from .hamiltonians import (BoundField, DiskHamiltonian, Leg,
                           TwistHamiltonian)

TWO_PI = 2.0 * np.pi
SIGMA_GUARD = 0.25
DRIFT_TOL = 1e-6
#: target phase advance per step: rk4 keeps energy drift ~(h w)^6/72 per step
#: below 1e-6 over hundreds of steps; midpoint only needs angle accuracy.
_TARGET = {"rk4": 0.05, "midpoint": 0.25}
_NEWTON_ITERS = 3
#: generator phase (radian-equivalent) consumed per closed-form twist chunk.
#: Chunks exist only to keep sigma-lift increments unambiguous: sigma sweeps
#: half a turn across each near-parabolic window of the transported frame,
#: and the window width in rotation angle is ~4/|J|, so the phase budget is
#: set so that moderately sheared frames (|J| up to ~25) still resolve every
#: window with a couple of chunks; stiffer frames flag coarse honestly and
#: refinement scales tighten the chunks like step counts elsewhere.
_TWIST_CHUNK_PHASE = 0.15
#: hard ceiling on sigma-lift chunks per twist-leg advance (before refinement
#: scaling).  Taper bands of very small width force phase rates in the
#: thousands; positions, actions and tangent maps stay exact regardless of
#: chunking, so the cap only limits sigma resolution, and points whose own
#: phase budget overruns it are flagged coarse rather than silently aliased.
_TWIST_CHUNK_CAP = 4096


def _wrap(d):
    return d - np.round(d)


def _sigma4(a, b, c, d):
    """Circle invariant in turns from unrolled matrix components.

    Same branch logic as sp2.sigma; duplicated here because the streaming
    loop is the hot path and works on component arrays.  Cross-checked
    against sp2.sigma in the tests.
    """
    tr = a + d
    disc = tr * tr - 4.0
    sig = np.where(tr >= 0.0, 0.0, 0.5)
    m = disc < -1e-12
    if np.any(m):
        phi0 = np.arctan2(np.sqrt(-disc[m]), tr[m]) / TWO_PI
        q = c[m]
        q = np.where(np.abs(q) < 1e-12, -b[m], q)
        sig[m] = np.where(q > 0.0, phi0, 1.0 - phi0)
    return sig


class BatchState:
    """Positions, optional Jacobians (unrolled [[a,b],[c,d]]), accumulated
    action, and the streamed sigma lift for a batch of points."""

    __slots__ = ("x", "y", "a", "b", "c", "d", "action", "lifted", "sig",
                 "coarse", "drift", "want_jac", "want_action")

    def __init__(self, x, y, want_jac=False, want_action=False):
        n = len(x)
        self.x = np.array(x, dtype=float)
        self.y = np.array(y, dtype=float)
        self.want_jac = want_jac
        self.want_action = want_action
        if want_jac:
            self.a = np.ones(n)
            self.b = np.zeros(n)
            self.c = np.zeros(n)
            self.d = np.ones(n)
            self.lifted = np.zeros(n)
            self.sig = np.zeros(n)
        else:
            self.a = self.b = self.c = self.d = None
            self.lifted = self.sig = None
        self.action = np.zeros(n) if want_action else None
        self.coarse = np.zeros(n, dtype=bool)
        self.drift = np.zeros(n)

    def scatter_from(self, other: "BatchState", mask: np.ndarray) -> None:
        """Overwrite the masked columns with another (mask-sized) state."""
        for name in ("x", "y", "a", "b", "c", "d", "action", "lifted", "sig",
                     "coarse", "drift"):
            mine = getattr(self, name)
            theirs = getattr(other, name)
            if mine is not None and theirs is not None:
                mine[mask] = theirs

    def extract(self, mask: np.ndarray) -> "BatchState":
        """A new state holding copies of the masked columns."""
        sub = BatchState(self.x[mask], self.y[mask], want_jac=self.want_jac,
                         want_action=self.want_action)
        for name in ("a", "b", "c", "d", "action", "lifted", "sig",
                     "coarse", "drift"):
            mine = getattr(self, name)
            if mine is not None:
                setattr(sub, name, mine[mask].copy())
        return sub

    def snapshot(self) -> dict:
        out = {"x": self.x.copy(), "y": self.y.copy()}
        if self.lifted is not None:
            out["lifted"] = self.lifted.copy()
        if self.action is not None:
            out["action"] = self.action.copy()
        return out

    def det(self):
        return self.a * self.d - self.b * self.c


def _stream_sigma(st: BatchState, guard: float) -> None:
    s = _sigma4(st.a, st.b, st.c, st.d)
    dlt = _wrap(s - st.sig)
    bad = ~(np.abs(dlt) < guard)  # catches NaN too
    if bad.any():
        st.coarse |= bad
    st.lifted += np.where(np.isnan(dlt), 0.0, dlt)
    st.sig = s


def _advance_leg_rk4(field: BoundField, st: BatchState, t_base: float,
                     mult: float, proper: float, nsteps: int, guard: float,
                     step_cb=None) -> None:
    h = proper / nsteps
    want_jac, want_action = st.want_jac, st.want_action
    if want_action:
        f0 = field.lagrangian(t_base, st.x, st.y)
    for k in range(nsteps):
        tau = k * h
        t1 = t_base + tau / mult
        tm = t_base + (tau + 0.5 * h) / mult
        te = t_base + (tau + h) / mult
        x, y = st.x, st.y
        v1x, v1y = field.velocity(t1, x, y)
        x2 = x + 0.5 * h * v1x
        y2 = y + 0.5 * h * v1y
        v2x, v2y = field.velocity(tm, x2, y2)
        x3 = x + 0.5 * h * v2x
        y3 = y + 0.5 * h * v2y
        v3x, v3y = field.velocity(tm, x3, y3)
        x4 = x + h * v3x
        y4 = y + h * v3y
        v4x, v4y = field.velocity(te, x4, y4)
        if want_jac:
            a, b, c, d = st.a, st.b, st.c, st.d
            hxx, hxy, hyy = field.hess(t1, x, y)
            p1, q1, r1 = hxy, hyy, -hxx
            hxx, hxy, hyy = field.hess(tm, x2, y2)
            p2, q2, r2 = hxy, hyy, -hxx
            hxx, hxy, hyy = field.hess(tm, x3, y3)
            p3, q3, r3 = hxy, hyy, -hxx
            hxx, hxy, hyy = field.hess(te, x4, y4)
            p4, q4, r4 = hxy, hyy, -hxx
            k1a = p1 * a + q1 * c
            k1b = p1 * b + q1 * d
            k1c = r1 * a - p1 * c
            k1d = r1 * b - p1 * d
            ja = a + 0.5 * h * k1a
            jb = b + 0.5 * h * k1b
            jc = c + 0.5 * h * k1c
            jd = d + 0.5 * h * k1d
            k2a = p2 * ja + q2 * jc
            k2b = p2 * jb + q2 * jd
            k2c = r2 * ja - p2 * jc
            k2d = r2 * jb - p2 * jd
            ja = a + 0.5 * h * k2a
            jb = b + 0.5 * h * k2b
            jc = c + 0.5 * h * k2c
            jd = d + 0.5 * h * k2d
            k3a = p3 * ja + q3 * jc
            k3b = p3 * jb + q3 * jd
            k3c = r3 * ja - p3 * jc
            k3d = r3 * jb - p3 * jd
            ja = a + h * k3a
            jb = b + h * k3b
            jc = c + h * k3c
            jd = d + h * k3d
            k4a = p4 * ja + q4 * jc
            k4b = p4 * jb + q4 * jd
            k4c = r4 * ja - p4 * jc
            k4d = r4 * jb - p4 * jd
            st.a = a + (h / 6) * (k1a + 2 * k2a + 2 * k3a + k4a)
            st.b = b + (h / 6) * (k1b + 2 * k2b + 2 * k3b + k4b)
            st.c = c + (h / 6) * (k1c + 2 * k2c + 2 * k3c + k4c)
            st.d = d + (h / 6) * (k1d + 2 * k2d + 2 * k3d + k4d)
        st.x = x + (h / 6) * (v1x + 2 * v2x + 2 * v3x + v4x)
        st.y = y + (h / 6) * (v1y + 2 * v2y + 2 * v3y + v4y)
        if want_jac:
            _stream_sigma(st, guard)
        if want_action:
            f1 = field.lagrangian(te, st.x, st.y)
            st.action += 0.5 * h * (f0 + f1)
            f0 = f1
        if step_cb is not None:
            step_cb(te, st)


def _advance_leg_midpoint(field: BoundField, st: BatchState, t_base: float,
                          mult: float, proper: float, nsteps: int,
                          guard: float, step_cb=None) -> None:
    h = proper / nsteps
    want_jac, want_action = st.want_jac, st.want_action
    if want_action:
        f0 = field.lagrangian(t_base, st.x, st.y)
    for k in range(nsteps):
        tau = k * h
        tm = t_base + (tau + 0.5 * h) / mult
        te = t_base + (tau + h) / mult
        x, y = st.x, st.y
        vx, vy = field.velocity(tm, x, y)
        x1 = x + h * vx
        y1 = y + h * vy
        for _ in range(_NEWTON_ITERS):
            xm = 0.5 * (x + x1)
            ym = 0.5 * (y + y1)
            vx, vy = field.velocity(tm, xm, ym)
            gx = x1 - x - h * vx
            gy = y1 - y - h * vy
            hxx, hxy, hyy = field.hess(tm, xm, ym)
            m11 = 1.0 - 0.5 * h * hxy
            m12 = -0.5 * h * hyy
            m21 = 0.5 * h * hxx
            m22 = 1.0 + 0.5 * h * hxy
            det = m11 * m22 - m12 * m21
            x1 = x1 - (m22 * gx - m12 * gy) / det
            y1 = y1 - (m11 * gy - m21 * gx) / det
        if want_jac:
            xm = 0.5 * (x + x1)
            ym = 0.5 * (y + y1)
            hxx, hxy, hyy = field.hess(tm, xm, ym)
            # Cayley tangent map (I - h/2 A)^(-1) (I + h/2 A), A = J_std Hess
            e11 = 0.5 * h * hxy
            e12 = 0.5 * h * hyy
            e21 = -0.5 * h * hxx
            det = (1.0 - e11) * (1.0 + e11) - e12 * e21  # = 1 - e11^2 - e12 e21
            p11 = ((1.0 + e11) * (1.0 + e11) + e12 * e21) / det
            p12 = 2.0 * e12 / det
            p21 = 2.0 * e21 / det
            p22 = ((1.0 - e11) * (1.0 - e11) + e12 * e21) / det
            a, b, c, d = st.a, st.b, st.c, st.d
            st.a = p11 * a + p12 * c
            st.b = p11 * b + p12 * d
            st.c = p21 * a + p22 * c
            st.d = p21 * b + p22 * d
            _stream_sigma(st, guard)
        st.x = x1
        st.y = y1
        if want_action:
            f1 = field.lagrangian(te, x1, y1)
            st.action += 0.5 * h * (f0 + f1)
            f0 = f1
        if step_cb is not None:
            step_cb(te, st)


_ADVANCERS = {"rk4": _advance_leg_rk4, "midpoint": _advance_leg_midpoint}


# ---------------------------------------------------------------------------
# closed-form legs
#
# A radial Hamiltonian h(r) = h(0) + h''(0) r^2/2 generates a rigid rotation,
# and a twist disk conserves each point's distance u to its center, so the
# whole leg is a per-point rotation at rate h'(u)/u whose tangent map and
# action integral are known in closed form at every radius.  Such legs carry
# no step error at all; sub-chunking exists only to keep each streamed
# sigma-lift increment unambiguous under the quarter-turn guard.


def _exact_rotation_jac_stream(st: BatchState, phi, chunk: float = 2.0):
    """Left-multiply the Jacobians by per-node rotations R(phi) (radians),
    lifting sigma exactly: multiplying by a one-signed rotation winds sigma
    monotonically, and each chunk winds strictly less than a full turn, so
    a signed mod-1 unwrap is exact rather than merely guard-checked."""
    amax = float(np.max(np.abs(phi))) if np.size(phi) else 0.0
    nsub = max(1, int(np.ceil(amax / chunk)))
    dphi = np.asarray(phi, dtype=float) / nsub
    cs, sn = np.cos(dphi), np.sin(dphi)
    pos = dphi >= 0.0
    for _ in range(nsub):
        a, b, c, d = st.a, st.b, st.c, st.d
        st.a = cs * a - sn * c
        st.b = cs * b - sn * d
        st.c = sn * a + cs * c
        st.d = sn * b + cs * d
        s_new = _sigma4(st.a, st.b, st.c, st.d)
        raw = s_new - st.sig
        dp = np.mod(raw, 1.0)
        dp = np.where(dp > 1.0 - 1e-7, dp - 1.0, dp)
        dn = np.mod(-raw, 1.0)
        dn = np.where(dn > 1.0 - 1e-7, dn - 1.0, dn)
        st.lifted = st.lifted + np.where(pos, dp, -dn)
        st.sig = s_new


def _advance_leg_rot_exact(ham, st: BatchState, proper: float) -> None:
    """Rigid rotation about the origin: h(r) = h0 + w r^2/2 everywhere."""
    w0 = float(np.asarray(ham.profile.ratio(np.zeros(1)))[0])
    h0 = float(np.asarray(ham.profile.h(np.zeros(1)))[0])
    phi = -w0 * proper
    cs, sn = np.cos(phi), np.sin(phi)
    x, y = st.x, st.y
    st.x = cs * x - sn * y
    st.y = sn * x + cs * y
    if st.want_jac:
        _exact_rotation_jac_stream(st, phi)
    if st.want_action:
        # lagrangian h - r h'/2 is identically h0 for a quadratic profile
        st.action += h0 * proper


def _emit_rot_exact(leg: Leg, st: BatchState, proper: float, clip: float,
                    step_cb) -> None:
    """Recorded variant of the exact rotation leg: advances in closed-form
    pieces sized so that the recorded sigma path stays safely liftable even
    when the incoming Jacobians carry accumulated shear (sigma can move up to
    |J|^2/2pi turns per radian of rotation)."""
    ham = leg.ham
    w0 = float(np.asarray(ham.profile.ratio(np.zeros(1)))[0])
    phi = abs(w0) * proper
    s2 = 1.0
    if st.want_jac and st.a.size:
        s2 = float(np.max(st.a * st.a + st.b * st.b + st.c * st.c
                          + st.d * st.d))
    dmax = min(1.0, 0.9 / max(1.0, s2))
    n_s = max(1, int(np.ceil(phi / dmax)))
    span = (leg.t1 - leg.t0) * clip
    for j in range(1, n_s + 1):
        _advance_leg_rot_exact(ham, st, proper / n_s)
        step_cb(leg.t0 + span * j / n_s, st)


def _advance_leg_twist_exact(leg: Leg, st: BatchState, proper: float,
                             clip: float = 1.0, steps_scale: int = 1,
                             guard: float = SIGMA_GUARD,
                             step_cb=None) -> None:
    """Localized radial twist about frozen centers, closed-form everywhere.

    The distance u from a point to its disk center is conserved, so the leg
    rotates each supported point rigidly at its own rate rho(u) = h'(u)/u,
    and the exact time-T tangent map is the unit-determinant rotation-shear

        D = R(-rho T) (I - T u rho'(u) e_theta e_u^T).

    Composing chunks of this map telescopes back to the one-shot formula
    (the shear factor is nilpotent), so positions, Jacobians, and action
    carry no step error at any chunk size; chunking exists only to keep each
    streamed sigma-lift increment under the quarter-turn guard and to give
    recorded runs a dense sample.  Refinement scales tighten the chunks the
    same way they multiply step counts elsewhere, so a node whose sigma hops
    are flagged near a parabolic crossing genuinely re-resolves.  The action
    integrand h(u) - u h'(u)/2 is constant along the orbit and the center
    -offset cross term integrates through the primitive of a rotating
    vector, with a masked denominator covering the rho -> 0 limit."""
    if proper <= 0.0:
        return
    ham: TwistHamiltonian = leg.ham
    pr = ham.profile
    bound = ham.bind(st.x, st.y)
    inside = bound.inside
    cx, cy = bound._cx, bound._cy
    wx, wy = st.x - cx, st.y - cy
    u = np.hypot(wx, wy)
    usafe = np.where(u > 1e-12, u, 1.0)
    rho = np.where(inside, pr.ratio(u), 0.0)
    # d(rho)/du = (u h'' - h')/u^2: identically zero on a quadratic stretch
    # and zero at centers by evenness of the profile
    dif = np.where(inside & (u > 1e-12),
                   (pr.d2h(u) * u - pr.dh(u)) / (usafe * usafe), 0.0)
    kap_rate = -u * dif
    if st.want_action:
        lag = np.where(inside, pr.h(u) - 0.5 * u * pr.dh(u), 0.0)
    point_rate = np.abs(rho) + np.abs(kap_rate)
    rate = float(np.max(point_rate, initial=0.0))
    if (st.want_jac or step_cb is not None) and rate > 0.0:
        n_s = int(np.ceil(rate * proper / _TWIST_CHUNK_PHASE))
        n_s = min(max(1, n_s), _TWIST_CHUNK_CAP) * max(1, int(steps_scale))
        if st.want_jac:
            budget = n_s * _TWIST_CHUNK_PHASE / proper
            st.coarse |= point_rate > budget * (1.0 + 1e-12)
    else:
        n_s = 1
    dt = proper / n_s
    phi = -rho * dt
    cs, sn = np.cos(phi), np.sin(phi)
    kap = kap_rate * dt
    if st.want_action:
        # cross term -(rho/2) <c, integral of w(tau)>; the integral of the
        # rotating radius vector is M w0 with M -> dt * I as rho -> 0
        tiny = np.abs(rho) * dt < 1e-9
        rsafe = np.where(tiny, 1.0, rho)
    span = (leg.t1 - leg.t0) * clip
    for j in range(1, n_s + 1):
        if st.want_action:
            swt, cwt = -sn, 1.0 - cs
            ix = np.where(tiny, dt * wx, (swt * wx + cwt * wy) / rsafe)
            iy = np.where(tiny, dt * wy, (-cwt * wx + swt * wy) / rsafe)
            st.action += dt * lag - 0.5 * rho * (cx * ix + cy * iy)
        if st.want_jac:
            eux, euy = wx / usafe, wy / usafe
            # K = I + kap e_theta e_u^T with e_theta = (-e_uy, e_ux)
            k00 = 1.0 - kap * euy * eux
            k01 = -kap * euy * euy
            k10 = kap * eux * eux
            k11 = 1.0 + kap * eux * euy
            a, b, c, d = st.a, st.b, st.c, st.d
            ma = k00 * a + k01 * c
            mb = k00 * b + k01 * d
            mc = k10 * a + k11 * c
            md = k10 * b + k11 * d
            st.a = cs * ma - sn * mc
            st.b = cs * mb - sn * md
            st.c = sn * ma + cs * mc
            st.d = sn * mb + cs * md
            _stream_sigma(st, guard)
        wx, wy = cs * wx - sn * wy, sn * wx + cs * wy
        st.x = cx + wx
        st.y = cy + wy
        if step_cb is not None:
            step_cb(leg.t0 + span * (j / n_s), st)


def _sample_omega(ham: DiskHamiltonian) -> float:
    """Crude spectral bound on the variational rotation rate by sampling the
    Hessian on a polar grid (and several times, for time-dependent fields)."""
    r = np.sqrt(np.linspace(0.003, 0.95, 14))
    th = np.linspace(0.0, TWO_PI, 17)[:-1]
    rr, tt = np.meshgrid(r, th)
    x, y = (rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()
    times = (0.0,) if ham.autonomous else (0.05, 0.3, 0.55, 0.8)
    w = 0.0
    for t in times:
        hxx, hxy, hyy = ham.hess(t, x, y)
        lam = np.abs(0.5 * (hxx + hyy)) + np.hypot(0.5 * (hxx - hyy), hxy)
        w = max(w, float(np.max(lam)))
    return 2.0 * w


def _even(n: int) -> int:
    n = int(n)
    return n + (n & 1)


def _leg_exact_mode(leg: Leg) -> Optional[str]:
    pr = getattr(leg.ham, "profile", None)
    if pr is None:
        return None
    if getattr(leg.ham, "radial", False) and np.isinf(pr.quadratic_radius):
        return "rotation"
    if isinstance(leg.ham, TwistHamiltonian):
        return "twist"
    return None


class DiskFlow:
    """A disk Hamiltonian with a resolved integration plan.

    ``steps_per_unit`` overrides the plan wholesale (distributed over legs
    by window length); by default each leg gets enough steps for its own
    stiffness at the engine's target phase-per-step, with the spec floor of
    200 steps per time unit overall.

    ``exact_legs`` (default on) advances radially symmetric legs — rigid
    rotations and localized twists about frozen centers — in closed form at
    every radius.  Turn it off to force stepping everywhere: that is the
    cross-validation route, and the two must agree to the stepped engine's
    truncation error.
    """

    def __init__(self, hamiltonian: DiskHamiltonian,
                 steps_per_unit: Optional[int] = None, engine: str = "rk4",
                 exact_legs: bool = True):
        if engine not in _ADVANCERS:
            raise ValueError(f"unknown engine {engine!r}")
        self.hamiltonian = hamiltonian
        self.engine = engine
        self.legs: Sequence[Leg] = tuple(hamiltonian.legs())
        self.exact_modes = tuple(
            _leg_exact_mode(leg) if exact_legs else None for leg in self.legs)
        target = _TARGET[engine]
        steps = []
        for leg in self.legs:
            window = leg.t1 - leg.t0
            if steps_per_unit is not None:
                n = _even(max(2, round(steps_per_unit * window)))
            else:
                omega = leg.ham.omega_hint()
                if omega is None:
                    omega = 1.25 * _sample_omega(leg.ham)
                n = _even(max(int(np.ceil(200 * window)),
                              int(np.ceil(omega * leg.proper_time / target))))
            steps.append(n)
        self.leg_steps = tuple(steps)
        self.steps_per_unit = sum(steps)

    # -- driving ----------------------------------------------------------

    def advance(self, x, y, units: float, *, want_jac=False, want_action=False,
                steps_scale: int = 1, guard: float = SIGMA_GUARD,
                unit_callback=None, step_cb=None) -> BatchState:
        """Advance a batch through ``units`` time units (fractional allowed).

        unit_callback(m, state) fires after each whole unit; step_cb fires
        after every internal step (use only with small batches).
        """
        st = BatchState(x, y, want_jac=want_jac, want_action=want_action)
        whole = int(np.floor(units + 1e-12))
        frac = units - whole
        advancer = _ADVANCERS[self.engine]
        for m in range(whole):
            self._one_unit(advancer, st, 1.0, steps_scale, guard, step_cb)
            if unit_callback is not None:
                unit_callback(m + 1, st)
        if frac > 1e-12:
            self._one_unit(advancer, st, frac, steps_scale, guard, step_cb)
        return st

    def _one_unit(self, advancer, st, fraction, steps_scale, guard, step_cb):
        for leg, nsteps, mode in zip(self.legs, self.leg_steps,
                                     self.exact_modes):
            if leg.t0 >= fraction - 1e-15:
                break
            clip = min(1.0, (fraction - leg.t0) / (leg.t1 - leg.t0))
            n = max(1, int(np.ceil(nsteps * steps_scale * clip)))
            proper = leg.proper_time * clip
            if mode == "rotation":
                if step_cb is None:
                    _advance_leg_rot_exact(leg.ham, st, proper)
                else:
                    _emit_rot_exact(leg, st, proper, clip, step_cb)
                continue
            if mode == "twist":
                _advance_leg_twist_exact(leg, st, proper, clip, steps_scale,
                                         guard, step_cb)
                continue
            field = leg.ham.bind(st.x, st.y)
            if leg.ham.autonomous:
                e0 = field.energy(leg.t0, st.x, st.y)
            advancer(field, st, leg.t0, leg.mult, proper, n, guard, step_cb)
            if leg.ham.autonomous:
                e1 = field.energy(leg.t0, st.x, st.y)
                np.maximum(st.drift, np.abs(e1 - e0), out=st.drift)
            if st.want_jac and self.engine == "rk4":
                # cheap truncation-error proxy; Cayley keeps det = 1 exactly
                st.coarse |= np.abs(st.det() - 1.0) > 1e-6

    def advance_refined(self, x, y, units, *, want_jac=False, want_action=False,
                        snapshot_units: Sequence[int] = (), refine_max: int = 3,
                        guard: float = SIGMA_GUARD, drift_tol: float = DRIFT_TOL):
        """Advance with automatic re-runs of under-resolved nodes at doubled
        step counts.  Returns (state, snapshots, bad) where ``snapshots`` maps
        each requested unit index to copies of (x, y, lifted, action) and
        ``bad`` flags nodes still unresolved after ``refine_max`` doublings.
        """
        x0 = np.array(x, dtype=float)
        y0 = np.array(y, dtype=float)
        wanted = set(int(u) for u in snapshot_units)
        snaps: dict[int, dict] = {}

        def cb(m, state):
            if m in wanted:
                snaps[m] = state.snapshot()

        st = self.advance(x0, y0, units, want_jac=want_jac,
                          want_action=want_action, guard=guard,
                          unit_callback=cb if wanted else None)
        bad = st.coarse | (st.drift > drift_tol)
        scale = 1
        for _ in range(refine_max):
            if not bad.any():
                break
            scale *= 2
            sub_snaps: dict[int, dict] = {}

            def sub_cb(m, state):
                if m in wanted:
                    sub_snaps[m] = state.snapshot()

            sub = self.advance(x0[bad], y0[bad], units, want_jac=want_jac,
                               want_action=want_action, steps_scale=scale,
                               guard=guard,
                               unit_callback=sub_cb if wanted else None)
            st.scatter_from(sub, bad)
            for m, snap in sub_snaps.items():
                for key, arr in snap.items():
                    snaps[m][key][bad] = arr
            sub_bad = sub.coarse | (sub.drift > drift_tol)
            idx = np.flatnonzero(bad)
            bad = np.zeros_like(bad)
            bad[idx[sub_bad]] = True
        return st, snaps, bad

    def time_one(self, x, y, iters: int = 1):
        """Apply the time-one map ``iters`` times to a batch of points."""
        st = self.advance(x, y, float(iters))
        return st.x, st.y


@dataclass
class FlowResult:
    """Recorded trajectory of a single point: per-step times, positions,
    transported Jacobians, accumulated action, and the sigma lift (turns)."""

    times: np.ndarray
    points: np.ndarray
    jacobians: np.ndarray
    actions: np.ndarray
    lifted: np.ndarray
    energy_drift: float
    coarse: bool

    @property
    def end(self):
        return self.points[-1]

    @property
    def rho(self) -> float:
        return float(self.lifted[-1])


def integrate_flow(ham, z0, t_span=(0.0, 1.0), steps_per_unit=None,
                   engine="rk4") -> FlowResult:
    """Integrate one point with full per-step recording.

    ``ham`` may be a DiskHamiltonian or a prebuilt DiskFlow.  The time span
    must start at 0 (flows here are 1-periodic in t and always launched at
    t = 0).  Raises StepUnstable when an autonomous Hamiltonian drifts by
    more than 1e-6 over the span.
    """
    flow = ham if isinstance(ham, DiskFlow) else DiskFlow(
        ham, steps_per_unit=steps_per_unit, engine=engine)
    t0, t1 = float(t_span[0]), float(t_span[1])
    if abs(t0) > 1e-12:
        raise ValueError("t_span must start at 0")
    z0 = np.asarray(z0, dtype=float).reshape(2)
    times = [0.0]
    pts = [(z0[0], z0[1])]
    jacs = [(1.0, 0.0, 0.0, 1.0)]
    acts = [0.0]
    lifts = [0.0]
    offset = [0.0]

    def cb(t_local, st):
        t = offset[0] + t_local
        times.append(t)
        pts.append((st.x[0], st.y[0]))
        jacs.append((st.a[0], st.b[0], st.c[0], st.d[0]))
        acts.append(st.action[0])
        lifts.append(st.lifted[0])

    def unit_cb(m, st):
        offset[0] = float(m)

    # local time within a unit restarts at each unit boundary; offset fixes it
    st = flow.advance(z0[0:1], z0[1:2], t1, want_jac=True, want_action=True,
                      step_cb=cb, unit_callback=unit_cb)
    drift = float(st.drift[0])
    if flow.hamiltonian.autonomous and drift > DRIFT_TOL:
        raise StepUnstable(
            f"energy drift {drift:.2e} over span {t1:g} exceeds {DRIFT_TOL:g}")
    j = np.array(jacs).reshape(-1, 2, 2)
    return FlowResult(times=np.asarray(times), points=np.asarray(pts),
                      jacobians=j, actions=np.asarray(acts),
                      lifted=np.asarray(lifts), energy_drift=drift,
                      coarse=bool(st.coarse[0]))
