"""Contact-invariant transfer from Hamiltonian disk maps.

A positive Hamiltonian disk map whose generator agrees with ``B*pi*(1-r^2)``
on a collar of the boundary circle arises as the first-return map of a Reeb
flow on a three-sphere: the map's mapping torus fills the complement of one
closed "binding" orbit.  Every invariant this package needs is determined by
the map alone, so the contact form is never materialized; this module is the
dictionary:

* contact volume   =  Calabi invariant of the map (units of area squared);
* Ruelle invariant =  disk-map Ruelle invariant, plus pi;
* binding orbit    :  action pi, rotation ``1 + 1/B``;
* interior orbits  :  a periodic point of minimal period L becomes a closed
  orbit with linking number L, the same action, and rotation ``rho + L``.

The systolic ratio is ``min_action**2 / volume`` with the minimum taken over
the orbits found; the flow is reported dynamically convex when every found
orbit has rotation > 1.  Both statements are exhaustive only up to the
period bound of the search, so the verdict string is "verified-up-to-K",
never an absolute claim, and iterated covers of each found orbit are listed
as separate records (flagged) so the orbit list is closed under iteration up
to the bound.

``counterexample`` assembles the two extreme flows from the staged-twist
construction in :mod:`reebru.special`: many tiny twist disks filling most of
the area, with twist coefficient just above -2 (small mode: the Ruelle
invariant collapses while the systolic ratio stays near 1) or equal to kappa
(large mode: the Ruelle invariant blows up).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (NonPositiveVolume, PackingInfeasible,
                     PreconditionViolated, SamplingTooCoarse)
from . import diskmap as dm
from .diskmap.engine import BatchState, DiskFlow
from .diskmap.hamiltonians import TwistHamiltonian
from .diskmap.invariants import disk_quadrature
from .diskmap.periodic import PeriodicReport, find_periodic_points
from . import special as sp

__all__ = [
    "OrbitRecord", "ContactInvariants", "contact_invariants",
    "orbit_rotation_from_disk", "normalize", "counterexample",
    "boundary_form_deviation", "boundary_collar",
]

_ROTATION_MARGIN = 1e-9


@dataclass(frozen=True)
class OrbitRecord:
    """One closed orbit of the transferred flow.

    ``source`` is "binding", "periodic-point", or "flood-family" (an open
    family fixed by an iterate; ``count`` members, values taken at the
    family's minimum so the record is conservative for both the action
    minimum and the convexity verdict).  ``linking`` is the linking number
    with the binding orbit — the period of the underlying periodic point.
    ``iterate`` marks the m-fold cover of an orbit already listed.
    """

    source: str
    linking: int
    action: float
    rotation: float
    count: int = 1
    iterate: bool = False


@dataclass(frozen=True)
class ContactInvariants:
    """Invariants of the transferred Reeb flow.

    ``volume`` is in area-squared units; rescaling the contact form by c
    multiplies volume by c**2 and all actions (hence ``min_action`` and the
    binding action) by c, and leaves rotations and ``systolic_ratio``
    unchanged.  ``scale`` accumulates the rescaling factors applied so far.
    ``dynamically_convex`` is "verified-up-to-K" (every orbit found up to
    the period bound has rotation > 1), "violated" (a witness with rotation
    < 1 was found), or "unknown" (an orbit sits at rotation 1 within
    tolerance, or some family members did not resolve).
    """

    volume: float
    ruelle: float
    min_action: float
    systolic_ratio: float
    dynamically_convex: str
    binding: Tuple[float, float]
    period_bound: int
    orbits: Tuple[OrbitRecord, ...] = ()
    scale: float = 1.0
    boundary_coefficient: Optional[float] = None
    volume_uncertainty: float = 0.0
    ruelle_uncertainty: float = 0.0
    search: Optional[PeriodicReport] = field(default=None, repr=False)

    def consistency_gap(self) -> float:
        """Relative gap between the stored systolic ratio and the one
        recomputed from the stored action and volume; zero up to roundoff by
        construction."""
        ref = self.min_action ** 2 / self.volume
        return abs(self.systolic_ratio - ref) / max(abs(ref), 1e-300)

    def rescaled(self, c: float) -> "ContactInvariants":
        """The same flow with the contact form scaled by ``c > 0``."""
        c = float(c)
        if not c > 0.0:
            raise ValueError(f"scale factor must be > 0, got {c:g}")
        vol = self.volume * c * c
        amin = self.min_action * c
        return replace(
            self,
            volume=vol,
            ruelle=self.ruelle * c,
            min_action=amin,
            systolic_ratio=amin * amin / vol,
            binding=(self.binding[0] * c, self.binding[1]),
            orbits=tuple(replace(r, action=r.action * c)
                         for r in self.orbits),
            scale=self.scale * c,
            volume_uncertainty=self.volume_uncertainty * c * c,
            ruelle_uncertainty=self.ruelle_uncertainty * c,
        )

    def normalized(self) -> "ContactInvariants":
        return normalize(self)


# ---------------------------------------------------------------------------
# preconditions


def _as_flow(flow, engine: str, steps_per_unit: Optional[int]) -> DiskFlow:
    if isinstance(flow, DiskFlow):
        return flow
    return DiskFlow(flow, engine=engine, steps_per_unit=steps_per_unit)


def boundary_collar(ham) -> float:
    """Width of the collar of the boundary circle that every localized twist
    provably avoids, from the flow's own metadata: 1 minus the farthest
    reach (center distance + support radius) over all twist parts.  0.03
    when there are no twist parts; may be <= 0 when a support leaks out."""
    reach = 0.0
    any_twist = False
    for leg in ham.legs():
        part = leg.ham
        if isinstance(part, TwistHamiltonian) and len(part.centers):
            any_twist = True
            dist = float(np.max(np.hypot(part.centers[:, 0],
                                         part.centers[:, 1])))
            reach = max(reach, dist + part.support_radius)
    if not any_twist:
        return 0.03
    return 1.0 - reach


def boundary_form_deviation(ham, boundary_coefficient: float,
                            collar: Optional[float] = None,
                            n_theta: int = 24) -> float:
    """Largest deviation of the time-averaged generator from
    ``B*pi*(1-r^2)`` on rings inside the boundary collar.

    The time average is the per-leg midpoint value weighted by proper time,
    which is exact for piecewise-autonomous generators (every Hamiltonian in
    this package).
    """
    B = float(boundary_coefficient)
    if collar is None:
        collar = boundary_collar(ham)
    if collar <= 0.0:
        raise PreconditionViolated(
            "boundary_form: a twist support reaches the boundary circle "
            f"(collar width {collar:.3e} <= 0)")
    radii = 1.0 - collar * np.array([0.9, 0.6, 0.3, 0.1, 1e-6])
    th = 2.0 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    r = radii[:, None]
    x = (r * np.cos(th)).ravel()
    y = (r * np.sin(th)).ravel()
    avg = np.zeros_like(x)
    for leg in ham.legs():
        t_mid = 0.5 * (leg.t0 + leg.t1)
        avg += leg.proper_time * np.asarray(leg.ham.value(t_mid, x, y))
    want = (B * np.pi * (1.0 - r * r) * np.ones_like(th)).ravel()
    return float(np.max(np.abs(avg - want)))


def _check_preconditions(flow: DiskFlow, B: float, boundary_tol: float,
                         refine_max: int) -> None:
    ham = flow.hamiltonian
    dev = boundary_form_deviation(ham, B)
    if dev > boundary_tol * max(1.0, abs(B) * np.pi):
        raise PreconditionViolated(
            f"boundary_form: generator deviates from B*pi*(1-r^2) with "
            f"B={B:g} by {dev:.3e} inside the boundary collar")
    x, y, _ = disk_quadrature(24, 48)
    st, _, _ = flow.advance_refined(x, y, 1.0, want_action=True,
                                    refine_max=refine_max)
    smin = float(np.min(st.action))
    if smin <= 1e-12:
        raise PreconditionViolated(
            f"positive_action: one-step generating action has minimum "
            f"{smin:.3e} <= 0, the map is not positive")


# ---------------------------------------------------------------------------
# the transfer


def _iterate_records(base: OrbitRecord, bound: int) -> List[OrbitRecord]:
    """m-fold covers of ``base`` with linking still within the bound."""
    out = []
    m = 2
    while m * base.linking <= bound:
        out.append(replace(base, linking=m * base.linking,
                           action=m * base.action,
                           rotation=m * base.rotation, iterate=True))
        m += 1
    return out


def _convexity_verdict(rotations: Sequence[float], unresolved: int,
                       period_bound: int) -> str:
    rmin = min(rotations)
    if rmin < 1.0 - _ROTATION_MARGIN:
        return "violated"
    if rmin > 1.0 + _ROTATION_MARGIN and unresolved == 0:
        return f"verified-up-to-{period_bound}"
    return "unknown"


def contact_invariants(flow, boundary_coefficient: Optional[float] = None,
                       period_bound: Optional[int] = None, *,
                       decomposition=None, grid: int = 21,
                       engine: str = "rk4",
                       steps_per_unit: Optional[int] = None,
                       ruelle_horizon: int = 32,
                       n_r: int = 64, n_theta: int = 64,
                       refine_max: int = 3,
                       check_preconditions: bool = True,
                       boundary_tol: float = 1e-8) -> ContactInvariants:
    """Invariants of the Reeb flow whose first-return map is ``flow``.

    ``flow`` is a DiskFlow or a disk Hamiltonian; ``boundary_coefficient``
    is the B of the collar form ``B*pi*(1-r^2)`` (read off the Hamiltonian
    when it carries one).  ``period_bound`` caps the periodic-orbit search;
    orbit-dependent outputs (``min_action``, the convexity verdict) are
    exhaustive only up to it.  ``decomposition`` routes the volume/Ruelle
    quadratures through the decomposed estimator (essential for flows with
    many localized twists).

    Preconditions checked (raising PreconditionViolated naming the check):
    the generator matches the collar form, and the one-step generating
    action is strictly positive.
    """
    flow = _as_flow(flow, engine, steps_per_unit)
    ham = flow.hamiltonian
    B = boundary_coefficient
    if B is None:
        B = getattr(ham, "boundary_coefficient", None)
    if B is None:
        raise ValueError("boundary_coefficient not given and not carried "
                         "by the Hamiltonian")
    B = float(B)
    if period_bound is None or int(period_bound) < 1:
        raise ValueError("period_bound must be a positive integer")
    K = int(period_bound)

    if check_preconditions:
        _check_preconditions(flow, B, boundary_tol, refine_max)

    cal = dm.calabi(ham, n_r=n_r, n_theta=n_theta, engine=engine,
                    steps_per_unit=steps_per_unit,
                    decomposition=decomposition, refine_max=refine_max)
    ru = dm.ruelle_diskmap(ham, k=ruelle_horizon,
                           n_r=max(32, n_r // 2), n_theta=max(32, n_theta // 2),
                           engine=engine, steps_per_unit=steps_per_unit,
                           decomposition=decomposition, refine_max=refine_max)

    binding = (np.pi, 1.0 + 1.0 / B)
    records: List[OrbitRecord] = [
        OrbitRecord("binding", 1, binding[0], binding[1])]

    per = find_periodic_points(flow, K, grid=grid)
    base: List[OrbitRecord] = []
    for pt in per.points:
        base.append(OrbitRecord("periodic-point", pt.period, pt.action,
                                pt.rotation + pt.period))
    unresolved = 0
    for fr in per.non_isolated:
        base.append(OrbitRecord("flood-family", fr.period,
                                fr.action_range[0],
                                fr.rotation_range[0] + fr.period,
                                count=fr.count))
        unresolved += fr.unresolved
    for rec in base:
        records.append(rec)
        records.extend(_iterate_records(rec, K))

    volume = float(cal.value)
    ruelle = float(ru.value) + np.pi
    min_action = min(r.action for r in records)
    verdict = _convexity_verdict([r.rotation for r in records],
                                 unresolved, K)
    return ContactInvariants(
        volume=volume,
        ruelle=ruelle,
        min_action=float(min_action),
        systolic_ratio=float(min_action) ** 2 / volume,
        dynamically_convex=verdict,
        binding=binding,
        period_bound=K,
        orbits=tuple(records),
        scale=1.0,
        boundary_coefficient=B,
        volume_uncertainty=float(cal.uncertainty),
        ruelle_uncertainty=float(ru.uncertainty) + float(ru.diagnostic),
        search=per,
    )


def orbit_rotation_from_disk(flow, point, k: int, *, engine: str = "rk4",
                             steps_per_unit: Optional[int] = None,
                             return_tol: float = 1e-6,
                             refine_max: int = 3) -> float:
    """Rotation number of the closed Reeb orbit over a k-periodic point of
    the disk map: the map's lifted rotation over k units, plus k (one extra
    turn of the transferred frame per page return).

    Raises PreconditionViolated when the point does not return to itself
    within ``return_tol`` after k units.
    """
    flow = _as_flow(flow, engine, steps_per_unit)
    k = int(k)
    if k < 1:
        raise ValueError("k must be a positive integer")
    p = np.asarray(point, dtype=float).reshape(2)
    st, _, bad = flow.advance_refined(p[:1], p[1:], float(k), want_jac=True,
                                      refine_max=refine_max)
    gap = float(np.hypot(st.x[0] - p[0], st.y[0] - p[1]))
    if gap > return_tol:
        raise PreconditionViolated(
            f"periodic_return: |phi^{k}(p) - p| = {gap:.3e} > {return_tol:g}")
    if bad[0]:
        raise SamplingTooCoarse(
            "rotation lift stayed under-resolved after refinement")
    return float(st.lifted[0]) + k


def normalize(inv: ContactInvariants) -> ContactInvariants:
    """Rescale the contact form so the volume is exactly 1 (actions and the
    Ruelle invariant divide by the square root of the original volume; the
    systolic ratio is unchanged; the factor is recorded in ``scale``)."""
    if not inv.volume > 0.0:
        raise NonPositiveVolume(
            f"cannot normalize volume {inv.volume:g} <= 0")
    out = inv.rescaled(1.0 / math.sqrt(inv.volume))
    return replace(out, volume=1.0,
                   systolic_ratio=out.min_action ** 2)


# ---------------------------------------------------------------------------
# the two extreme flows


def _counterexample_params(mode: str, kappa: float,
                           target_area: Optional[float]) -> sp.SpecialParams:
    """Disk family for the requested mode, respecting the size budget:
    small mode caps each disk's diameter at 1/kappa and the total taper-band
    area at 1/kappa; large mode caps each disk's area at 1/kappa^2 and the
    band area likewise.  The default area target is 97% of what ring packing
    can actually reach under those caps (at most 1.9): the size caps shrink
    the feasible total with ring-quantization wobble, so a fixed target
    would either fail for some kappa or waste area for others.  Passing an
    explicit unreachable target raises PackingInfeasible."""
    n = int(math.floor(kappa)) + 1
    if mode == "small":
        twist = -2.0 + 1.0 / kappa
        s = 0.4995 / kappa            # diameter strictly below 1/kappa
        band_cap = 1.0 / kappa
    else:
        twist = float(kappa)
        s = 0.995 / (kappa * math.sqrt(math.pi))   # area below 1/kappa^2
        band_cap = 1.0 / kappa ** 2
    delta = s / 50.0
    if target_area is None:
        full = sp.pack_sector_rings(n, delta=delta, target_area=None,
                                    radius=s)
        target_area = min(1.9, 0.97 * sum(d.area for d in full))
    disks: List[sp.Disk] = []
    for _ in range(4):
        disks = sp.pack_sector_rings(n, delta=delta,
                                     target_area=target_area, radius=s)
        if not disks:
            raise PackingInfeasible(
                f"no disk of radius {s:g} fits a 1/{n} sector")
        band = 4.0 * math.pi * s * delta * len(disks)
        if band < 0.9 * band_cap:
            break
        delta = 0.8 * band_cap / (4.0 * math.pi * s * len(disks))
    return sp.SpecialParams(n=n, disks=tuple(disks), delta=delta,
                            twist=twist)


def counterexample(mode: str, kappa: float, *,
                   target_area: Optional[float] = None,
                   period_bound: Optional[int] = None,
                   grid: int = 21, engine: str = "rk4",
                   ruelle_horizon: int = 8, refine_max: int = 3,
                   quadrature: Optional[dict] = None,
                   ) -> Tuple[sp.SpecialParams, ContactInvariants]:
    """Volume-normalized invariants of an extreme staged-twist flow.

    mode "small": twist coefficient ``-2 + 1/kappa`` — the Ruelle invariant
    nearly cancels against the area term while every orbit keeps rotation
    > 1 and action >= pi, so the flow stays dynamically convex with systolic
    ratio near 1.  mode "large": twist coefficient ``kappa`` — the Ruelle
    invariant grows linearly in kappa at essentially fixed volume.

    Returns (construction parameters, normalized invariants).  The period
    bound defaults to three times the symmetry order.
    """
    if mode not in ("small", "large"):
        raise ValueError(f"mode must be 'small' or 'large', got {mode!r}")
    kappa = float(kappa)
    if not kappa >= 10.0:
        raise PreconditionViolated(
            f"kappa: need kappa >= 10 for the size budget, got {kappa:g}")
    p = _counterexample_params(mode, kappa, target_area)
    ham = sp.build_special_hamiltonian(p)
    dec = sp.make_decomposition(p, **(quadrature or {}))
    K = int(period_bound) if period_bound is not None else 3 * p.n
    inv = contact_invariants(
        DiskFlow(ham, engine=engine), p.boundary_rate, K,
        decomposition=dec, grid=grid, engine=engine,
        ruelle_horizon=ruelle_horizon, refine_max=refine_max)
    return p, normalize(inv)
