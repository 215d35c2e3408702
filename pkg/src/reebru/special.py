"""Two-stage disk Hamiltonians: a global rotation composed with localized
disk twists.

The construction takes an integer ``n``, a Z/n-symmetric family of small
disjoint disks (each inside one open angular sector), a mollification
half-width ``delta`` and a twist coefficient ``twist``.  It produces the
time-periodic Hamiltonian whose time-one map is the composition of

* the rigid rotation generated by ``pi*(n+1)/n * (1 - r^2)``, and
* one localized twist per disk, generated near each disk center by the
  profile ``pi * twist * (s^2 - u^2)`` (``u`` the distance to the center,
  ``s`` the disk radius), tapered to zero across ``[s - delta, s + delta]``.

Inside each twist core the profile is exactly quadratic, so both stages act
by rigid rotations there and the map's action and rotation numbers have
closed predictions; this module builds the Hamiltonian, validates the
geometric preconditions, packs disk families, and measures how far the
numerical invariants drift from the predictions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import diskmap as dm
from .diskmap.engine import DiskFlow
from .diskmap.periodic import PeriodicReport, find_periodic_points
from .errors import InfeasibleProfile, PackingInfeasible

__all__ = [
    "Disk",
    "SpecialParams",
    "TwistProfile",
    "build_twist_profile",
    "validate_setup",
    "build_special_hamiltonian",
    "make_decomposition",
    "rotation_orbits",
    "pack_sector_rings",
    "predicted_ruelle",
    "predicted_calabi",
    "predicted_action",
    "predicted_rotation",
    "near_mollified_edge",
    "SpecialReport",
    "verify_special_lemmas",
]

#: tolerance for matching a disk with its rotated partner
SYMMETRY_TOL = 1e-9


# ---------------------------------------------------------------------------
# twist profile


def _smoothstep(t):
    """Quintic smoothstep: 0 -> 1 with vanishing first and second derivative
    at both ends."""
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _smoothstep_d(t):
    return 30.0 * t * t * (t - 1.0) * (t - 1.0)


def _smoothstep_int(t):
    """Integral of the quintic smoothstep from 0 to t."""
    return t * t * t * t * (t * (t - 3.0) + 2.5)


@dataclass(frozen=True)
class TwistProfile:
    """Radial generator of one localized twist.

    Exactly ``pi * twist * (core_radius^2 - u^2)`` for
    ``u <= core_radius - delta``; across the band
    ``[core_radius - delta, core_radius + delta]`` the derivative holds at
    its core-edge magnitude (a plateau) and then tapers to zero through a
    quintic step, which keeps ``|g'|`` below the core-edge slope everywhere
    while still absorbing the full value drop inside the band.  The profile
    vanishes identically before ``core_radius + delta``.
    """

    core_radius: float            # disk radius s; quadratic up to s - delta
    delta: float                  # half-width of the taper band
    twist: float                  # coefficient of the quadratic core
    mollifier_width: float        # width of the quintic taper (absolute)
    plateau_end: float            # end of the full-slope plateau, in [0, 1]
    taper_frac: float             # taper width as a fraction of the band
    slope_cap: float              # 2*pi*|twist|*(s - delta)
    r_samples: np.ndarray = field(repr=False)
    g_samples: np.ndarray = field(repr=False)
    dg_samples: np.ndarray = field(repr=False)

    # -- evaluation --------------------------------------------------------

    def _band_coord(self, u):
        return (u - (self.core_radius - self.delta)) / (2.0 * self.delta)

    def g(self, u):
        """Profile value."""
        u = np.asarray(u, dtype=float)
        s, d, R = self.core_radius, self.delta, self.twist
        v = np.clip(self._band_coord(u), 0.0, 1.0)
        u0, tau = self.plateau_end, self.taper_frac
        w = np.clip((v - u0) / tau, 0.0, 1.0)
        ib = np.where(v <= u0, v, u0 + tau * (w - _smoothstep_int(w)))
        edge = np.pi * R * d * (2.0 * s - d)
        band = edge - 2.0 * np.pi * R * (s - d) * 2.0 * d * ib
        out = np.where(u <= s - d, np.pi * R * (s * s - u * u), band)
        return np.where(v >= u0 + tau, 0.0, out)

    def dg(self, u):
        """Profile derivative."""
        u = np.asarray(u, dtype=float)
        s, d, R = self.core_radius, self.delta, self.twist
        v = np.clip(self._band_coord(u), 0.0, 1.0)
        u0, tau = self.plateau_end, self.taper_frac
        w = np.clip((v - u0) / tau, 0.0, 1.0)
        bump = np.where(v <= u0, 1.0, 1.0 - _smoothstep(w))
        band = -2.0 * np.pi * R * (s - d) * bump
        out = np.where(u <= s - d, -2.0 * np.pi * R * u, band)
        return np.where(v >= u0 + tau, 0.0, out)

    def d2g(self, u):
        """Profile second derivative (discontinuous at the core edge: the
        slope cap binds there with equality, so curvature must jump to 0)."""
        u = np.asarray(u, dtype=float)
        s, d, R = self.core_radius, self.delta, self.twist
        v = np.clip(self._band_coord(u), 0.0, 1.0)
        u0, tau = self.plateau_end, self.taper_frac
        w = np.clip((v - u0) / tau, 0.0, 1.0)
        slope = np.where(v <= u0, 0.0, -_smoothstep_d(w) / tau)
        band = -2.0 * np.pi * R * (s - d) * slope / (2.0 * d)
        out = np.where(u <= s - d, -2.0 * np.pi * R, band)
        return np.where(v >= u0 + tau, 0.0, out)

    # -- adapters -----------------------------------------------------------

    @property
    def support_radius(self) -> float:
        """Outer radius past which the profile is identically zero (strictly
        inside core_radius + delta)."""
        return (self.core_radius - self.delta
                + 2.0 * self.delta * (self.plateau_end + self.taper_frac))

    def to_radial_profile(self) -> dm.RadialProfile:
        """Adapter for the flow engine.  The quadratic core makes the twist
        an exact rigid rotation for u <= core_radius - delta."""
        s, d, R = self.core_radius, self.delta, self.twist

        def dh_over_r(u):
            u = np.asarray(u, dtype=float)
            core = u <= s - d
            safe = np.where(core, 1.0, np.maximum(u, s - d))
            return np.where(core, -2.0 * np.pi * R, self.dg(u) / safe)

        return dm.RadialProfile(
            h=self.g, dh=self.dg, d2h=self.d2g, dh_over_r=dh_over_r,
            name=f"disk-twist(s={s:g}, coeff={R:g})",
            quadratic_radius=s - d, support_radius=s + d)


def build_twist_profile(core_radius: float, delta: float, twist: float, *,
                        mollifier_width: Optional[float] = None,
                        samples: int = 1024) -> TwistProfile:
    """Construct the tapered twist profile and verify its contract on a
    sample grid.

    Requirements checked (raising InfeasibleProfile):
      * ``core_radius > 4 * delta`` and ``0 < mollifier_width <= delta``;
      * value exactly ``pi*twist*(s^2 - u^2)`` for ``u <= s - delta``;
      * ``|g'| <= 2*pi*|twist|*(s - delta)`` across the band;
      * support contained in ``[0, s + delta)``;
      * monotonic (derivative of constant sign).

    The slope bound holds with equality where the plateau runs, because the
    band must absorb the core-edge value with a derivative that can never
    exceed its core-edge magnitude; roughly half the band at full slope
    suffices, leaving room for the taper.
    """
    s = float(core_radius)
    d = float(delta)
    R = float(twist)
    if not (s > 0.0 and d > 0.0):
        raise InfeasibleProfile("core radius and band half-width must be > 0")
    if s <= 4.0 * d:
        raise InfeasibleProfile(
            f"core radius {s:g} must exceed 4 * band half-width {4 * d:g}")
    m = 0.5 * d if mollifier_width is None else float(mollifier_width)
    if not (0.0 < m <= d):
        raise InfeasibleProfile(
            f"mollifier width {m:g} must lie in (0, delta={d:g}]")

    # normalized band accounting: the drop pi*R*d*(2s-d) over width 2d at
    # slope magnitude 2*pi*|R|*(s-d) needs mean bump height W
    W = (2.0 * s - d) / (4.0 * (s - d))
    tau = m / (2.0 * d)
    u0 = W - 0.5 * tau
    if u0 <= 0.0 or u0 + tau >= 1.0 - 1e-12:
        raise InfeasibleProfile(
            "taper does not fit the band: need plateau >= 0 and "
            f"plateau + taper < 1, got {u0:g} and {u0 + tau:g}")

    r = np.linspace(0.0, s + d, int(samples))
    prof = TwistProfile(core_radius=s, delta=d, twist=R, mollifier_width=m,
                        plateau_end=u0, taper_frac=tau,
                        slope_cap=2.0 * np.pi * abs(R) * (s - d),
                        r_samples=r, g_samples=None, dg_samples=None)
    g = prof.g(r)
    dg = prof.dg(r)
    object.__setattr__(prof, "g_samples", g)
    object.__setattr__(prof, "dg_samples", dg)

    core = r <= s - d
    scale = max(1.0, np.pi * abs(R) * s * s)
    exact = np.pi * R * (s * s - r[core] * r[core])
    if np.max(np.abs(g[core] - exact), initial=0.0) > 1e-12 * scale:
        raise InfeasibleProfile("core value drifted from the quadratic form")
    if np.max(np.abs(dg)) > prof.slope_cap * (1.0 + 1e-9) + 1e-15:
        raise InfeasibleProfile("profile slope exceeds the band cap")
    tail = r >= prof.support_radius
    if np.max(np.abs(g[tail]), initial=0.0) > 1e-13 * scale:
        raise InfeasibleProfile("support leaks past the taper end")
    sgn = np.sign(dg[np.abs(dg) > 1e-14 * max(1.0, prof.slope_cap)])
    if sgn.size and (np.max(sgn) - np.min(sgn)) > 0:
        raise InfeasibleProfile("profile is not monotonic")
    return prof


# ---------------------------------------------------------------------------
# parameters and validation


@dataclass(frozen=True)
class Disk:
    """One twist disk: center in the open unit disk, radius of the exact
    quadratic region's outer edge."""

    center: Tuple[float, float]
    radius: float

    @property
    def area(self) -> float:
        return np.pi * self.radius ** 2


def _as_disk(obj) -> Disk:
    if isinstance(obj, Disk):
        return Disk((float(obj.center[0]), float(obj.center[1])),
                    float(obj.radius))
    c, s = obj
    return Disk((float(c[0]), float(c[1])), float(s))


@dataclass(frozen=True)
class SpecialParams:
    """Parameters of the two-stage construction.

    ``n`` sets both the rotation rate (n+1)/n and the Z/n symmetry order;
    ``disks`` is the full symmetric family (all members listed, not one
    fundamental domain); ``delta`` the taper half-width shared by all disks;
    ``twist`` the quadratic coefficient; ``mollifier_width`` the quintic
    taper width (defaults to delta/2).
    """

    n: int
    disks: Tuple[Disk, ...]
    delta: float
    twist: float
    mollifier_width: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "disks",
                           tuple(_as_disk(d) for d in self.disks))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "twist", float(self.twist))
        if self.mollifier_width is not None:
            object.__setattr__(self, "mollifier_width",
                               float(self.mollifier_width))

    # -- derived quantities -------------------------------------------------

    @property
    def boundary_rate(self) -> float:
        """Rotation turns per unit time near the disk boundary: (n+1)/n."""
        return (self.n + 1.0) / self.n

    @property
    def taper_width(self) -> float:
        return (0.5 * self.delta if self.mollifier_width is None
                else self.mollifier_width)

    @property
    def max_diameter(self) -> float:
        """Largest disk diameter; the error budget of the closed predictions
        scales with this."""
        if not self.disks:
            return 0.0
        return 2.0 * max(d.radius for d in self.disks)

    @property
    def total_disk_area(self) -> float:
        return float(sum(d.area for d in self.disks))

    def centers_array(self) -> np.ndarray:
        if not self.disks:
            return np.empty((0, 2))
        return np.array([d.center for d in self.disks], dtype=float)

    # -- serialization (cli JSON schema) -------------------------------------

    def to_config(self) -> dict:
        cfg = {
            "n": self.n,
            "disks": [{"center": [d.center[0], d.center[1]],
                       "radius": d.radius} for d in self.disks],
            "delta": self.delta,
            "R": self.twist,
        }
        if self.mollifier_width is not None:
            cfg["mollifier_width"] = self.mollifier_width
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "SpecialParams":
        n = int(cfg["n"])
        delta = float(cfg["delta"])
        twist = float(cfg["R"])
        moll = cfg.get("mollifier_width")
        if "disks" in cfg and cfg["disks"] is not None:
            disks = tuple(Disk((float(d["center"][0]), float(d["center"][1])),
                               float(d["radius"])) for d in cfg["disks"])
        elif "packing" in cfg and cfg["packing"] is not None:
            pack = cfg["packing"]
            target = float(pack["target_area"])
            radius = pack.get("radius")
            disks = tuple(pack_sector_rings(
                n, delta=delta, target_area=target,
                radius=None if radius is None else float(radius)))
        else:
            disks = ()
        return cls(n=n, disks=disks, delta=delta, twist=twist,
                   mollifier_width=None if moll is None else float(moll))


def _ray_distance(cx, cy, angle):
    """Euclidean distance from (cx, cy) to the ray from the origin at
    ``angle``."""
    ca, sa = math.cos(angle), math.sin(angle)
    along = cx * ca + cy * sa
    if along <= 0.0:
        return math.hypot(cx, cy)
    return abs(-cx * sa + cy * ca)


def validate_setup(p: SpecialParams) -> dict:
    """Check the geometric preconditions; report per condition with the
    offending disk indices rather than raising.

    Conditions: n >= 10; every disk inside one open angular sector of width
    2*pi/n with margin > delta from both boundary rays; the family closed
    under rotation by 2*pi/n (partners matched within 1e-9); pairwise
    boundary separation > 2*delta; delta < radius/4 for every disk; taper
    support inside the open unit disk; mollifier width in (0, delta].
    """
    n = p.n
    sector = 2.0 * np.pi / n
    checks: Dict[str, dict] = {}

    checks["n_minimum"] = {"ok": n >= 10, "offending": [] if n >= 10 else [n]}

    bad = []
    for i, d in enumerate(p.disks):
        cx, cy = d.center
        theta = math.atan2(cy, cx) % (2.0 * np.pi)
        k = int(theta // sector)
        margin = min(_ray_distance(cx, cy, k * sector),
                     _ray_distance(cx, cy, (k + 1) * sector)) - d.radius
        if not margin > p.delta:
            bad.append(i)
    checks["sector_containment"] = {"ok": not bad, "offending": bad}

    bad = []
    c, s = math.cos(sector), math.sin(sector)
    for i, d in enumerate(p.disks):
        rx = c * d.center[0] - s * d.center[1]
        ry = s * d.center[0] + c * d.center[1]
        hit = any(math.hypot(rx - e.center[0], ry - e.center[1])
                  <= SYMMETRY_TOL and abs(d.radius - e.radius) <= SYMMETRY_TOL
                  for e in p.disks)
        if not hit:
            bad.append(i)
    checks["symmetry"] = {"ok": not bad, "offending": bad}

    pairs = []
    for i in range(len(p.disks)):
        for j in range(i + 1, len(p.disks)):
            a, b = p.disks[i], p.disks[j]
            gap = (math.hypot(a.center[0] - b.center[0],
                              a.center[1] - b.center[1])
                   - a.radius - b.radius)
            if not gap > 2.0 * p.delta:
                pairs.append((i, j))
    checks["separation"] = {"ok": not pairs, "offending": pairs}

    bad = [i for i, d in enumerate(p.disks) if not p.delta < d.radius / 4.0]
    checks["radius_ratio"] = {"ok": not bad, "offending": bad}

    bad = [i for i, d in enumerate(p.disks)
           if not math.hypot(*d.center) + d.radius + p.delta < 1.0]
    checks["interior_clearance"] = {"ok": not bad, "offending": bad}

    m = p.taper_width
    ok = 0.0 < m <= p.delta
    checks["mollifier"] = {"ok": ok, "offending": [] if ok else [m]}

    return {"ok": all(c["ok"] for c in checks.values()), "checks": checks}


# ---------------------------------------------------------------------------
# construction


def _radius_groups(p: SpecialParams) -> List[Tuple[float, np.ndarray]]:
    groups: Dict[float, List[Tuple[float, float]]] = {}
    for d in p.disks:
        groups.setdefault(round(d.radius, 12), []).append(d.center)
    return [(s, np.array(cs, dtype=float)) for s, cs in sorted(groups.items())]


def build_special_hamiltonian(p: SpecialParams, *, check: bool = True):
    """Hamiltonian whose time-one map composes the global rotation with all
    disk twists (time-concatenated parts, each at proportionally raised
    strength; the stages commute because every twist support is carried onto
    a twist support by the rotation).

    With no disks the result is the plain rotation Hamiltonian.  Disks of
    equal radius share one part; distinct radii get one part each (their
    flows commute, supports being disjoint).
    """
    if check:
        rep = validate_setup(p)
        if not rep["ok"]:
            failing = [k for k, v in rep["checks"].items() if not v["ok"]]
            raise ValueError("invalid twist-disk setup: "
                             + ", ".join(failing))
    B = p.boundary_rate
    rot = dm.RadialHamiltonian(dm.rotation_profile(B), boundary_coefficient=B)
    if not p.disks:
        return rot
    parts = [rot]
    for s, centers in _radius_groups(p):
        prof = build_twist_profile(
            s, p.delta, p.twist, mollifier_width=p.mollifier_width)
        parts.append(dm.TwistHamiltonian(centers, prof.to_radial_profile(),
                                         s + p.delta))
    return dm.TimeConcatHamiltonian(parts, boundary_coefficient=B)


def rotation_orbits(p: SpecialParams) -> List[List[int]]:
    """Partition disk indices into orbits of the rotation by 2*pi/n."""
    n = p.n
    sector = 2.0 * np.pi / n
    c, s = math.cos(sector), math.sin(sector)
    unassigned = set(range(len(p.disks)))
    orbits = []
    while unassigned:
        i = min(unassigned)
        orbit = [i]
        unassigned.discard(i)
        cx, cy = p.disks[i].center
        for _ in range(n):
            cx, cy = c * cx - s * cy, s * cx + c * cy
            j = next((j for j in unassigned
                      if math.hypot(cx - p.disks[j].center[0],
                                    cy - p.disks[j].center[1])
                      <= SYMMETRY_TOL), None)
            if j is None:
                break
            orbit.append(j)
            unassigned.discard(j)
        orbits.append(orbit)
    return orbits


def make_decomposition(p: SpecialParams, **quadrature) -> dm.DomainDecomposition:
    """Decomposed-quadrature plan for the construction: radial background
    (same leg skeleton with empty twist parts) plus one local patch per
    rotation orbit of disks."""
    B = p.boundary_rate
    rot_prof = dm.rotation_profile(B)
    rot = dm.RadialHamiltonian(rot_prof, boundary_coefficient=B)
    if p.disks:
        parts = [rot]
        for s, _ in _radius_groups(p):
            prof = build_twist_profile(
                s, p.delta, p.twist, mollifier_width=p.mollifier_width)
            parts.append(dm.TwistHamiltonian(np.empty((0, 2)),
                                             prof.to_radial_profile(),
                                             s + p.delta))
        background = dm.TimeConcatHamiltonian(parts, boundary_coefficient=B)
    else:
        background = rot
    orbits = []
    for orbit in rotation_orbits(p):
        d = p.disks[orbit[0]]
        orbits.append(dm.DiskOrbitSpec(
            center=d.center, inner_radius=d.radius - p.delta,
            outer_radius=d.radius + p.delta, count=len(orbit)))
    return dm.DomainDecomposition(background, rot_prof, orbits, **quadrature)


# ---------------------------------------------------------------------------
# packing helper


def _auto_radius(n: int, delta: float) -> float:
    """Deterministic default disk radius for packing: large enough to be
    useful, small enough that a mid-radius ring clears the sector rays."""
    cap = 0.35 * math.sin(np.pi / n)
    return max(min(0.12, cap), 4.2 * delta)


def pack_sector_rings(n: int, *, delta: float,
                      target_area: Optional[float],
                      radius: Optional[float] = None,
                      margin_factor: float = 1.1) -> List[Disk]:
    """Place equal disks on concentric rings inside one angular sector, then
    replicate the sector by the Z/n rotation.

    Rings are filled inside-out, angular slots left-to-right, stopping as
    soon as the replicated family reaches ``target_area``; raises
    PackingInfeasible when the sector is exhausted first.  With
    ``target_area=None`` every admissible slot is taken and the result is
    whatever total area fits (never raises for lack of space).  All margins
    are taken ``margin_factor`` times wider than the validation minima so
    the result passes validate_setup strictly.
    """
    if target_area is not None and target_area <= 0.0:
        return []
    s = _auto_radius(n, delta) if radius is None else float(radius)
    if s <= 4.0 * delta:
        raise PackingInfeasible(
            f"disk radius {s:g} incompatible with delta {delta:g} "
            "(need radius > 4*delta)")
    m = margin_factor * delta
    sector = 2.0 * np.pi / n
    clear = s + m                     # required distance to a boundary ray
    chord = 2.0 * s + 2.0 * delta + m  # required center-to-center spacing
    rho = max(clear / math.sin(min(0.5 * sector, 0.5 * np.pi)),
              0.5 * chord) + 1e-9
    rho_max = 1.0 - s - delta - m
    per_disk = np.pi * s * s
    if target_area is None:
        need = None
    else:
        need = int(math.ceil(target_area / (n * per_disk) - 1e-12))
    base: List[Tuple[float, float]] = []
    while (need is None or len(base) < need) and rho <= rho_max:
        t_lo = math.asin(min(1.0, clear / rho))
        t_hi = sector - t_lo
        if t_hi > t_lo:
            dt = 2.0 * math.asin(min(1.0, 0.5 * chord / rho))
            count = int((t_hi - t_lo) / dt) + 1
            start = t_lo + 0.5 * ((t_hi - t_lo) - (count - 1) * dt)
            for j in range(count):
                if need is not None and len(base) >= need:
                    break
                a = start + j * dt
                base.append((rho * math.cos(a), rho * math.sin(a)))
        rho += chord
    if need is not None and len(base) < need:
        got = n * len(base) * per_disk
        raise PackingInfeasible(
            f"packed area {got:.6f} of requested {target_area:.6f} "
            f"(n={n}, radius={s:g}, delta={delta:g})")
    disks = []
    for k in range(n):
        ck, sk = math.cos(k * sector), math.sin(k * sector)
        disks.extend(Disk((ck * x - sk * y, sk * x + ck * y), s)
                     for (x, y) in base)
    return disks


# ---------------------------------------------------------------------------
# closed predictions


def predicted_ruelle(p: SpecialParams) -> float:
    """pi*(n+1)/n plus twist times the total disk area; error budget
    O(twist * area of the taper bands)."""
    return np.pi * p.boundary_rate + p.twist * p.total_disk_area


def predicted_calabi(p: SpecialParams) -> float:
    """pi^2*(n+1)/n plus twist times the sum of squared disk areas; error
    budget O(max diameter)."""
    return (np.pi ** 2 * p.boundary_rate
            + p.twist * float(sum(d.area ** 2 for d in p.disks)))


def _core_membership(p: SpecialParams, x, y):
    """Boolean mask of points inside some twist core, and the per-point disk
    area for those inside (0 elsewhere)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = np.zeros(x.shape, dtype=bool)
    area = np.zeros(x.shape, dtype=float)
    for d in p.disks:
        u = np.hypot(x - d.center[0], y - d.center[1])
        mine = u <= d.radius - p.delta
        inside |= mine
        area = np.where(mine, d.area, area)
    return inside, area


def predicted_action(p: SpecialParams, x, y) -> np.ndarray:
    """One-step generating action: pi*(n+1)/n everywhere, plus twist times
    the disk area inside each twist core.  Valid away from the taper bands,
    up to O(max_diameter)."""
    _, area = _core_membership(p, x, y)
    return np.pi * p.boundary_rate + p.twist * area


def predicted_rotation(p: SpecialParams, x, y) -> np.ndarray:
    """Asymptotic rotation number of the map: (n+1)/n everywhere, plus the
    twist coefficient inside the cores.  Exact away from the taper bands."""
    inside, _ = _core_membership(p, x, y)
    return p.boundary_rate + p.twist * inside.astype(float)


def near_mollified_edge(p: SpecialParams, x, y, pad: float = 0.0) -> np.ndarray:
    """Mask of points within any taper band (distance to some disk edge at
    most delta + pad); the closed predictions exclude this region."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = np.zeros(x.shape, dtype=bool)
    for d in p.disks:
        u = np.hypot(x - d.center[0], y - d.center[1])
        mask |= np.abs(u - d.radius) <= p.delta + pad
    return mask


# ---------------------------------------------------------------------------
# lemma verification


@dataclass
class SpecialReport:
    """Measured deviations from the closed predictions plus the periodic
    audit.  ``fitted_constant`` is sigma_max_dev / max_diameter, the sampled
    estimate of the linear error constant."""

    n_samples: int
    k: int
    sigma_max_dev: float
    rotation_max_dev: float
    max_diameter: float
    fitted_constant: Optional[float]
    ruelle_prediction: float
    calabi_prediction: float
    periodic: Optional[PeriodicReport] = None
    period_bound: Optional[int] = None
    min_action: Optional[float] = None
    min_rotation_plus_period: Optional[float] = None
    action_bound_ok: Optional[bool] = None
    rotation_period_bound_ok: Optional[bool] = None


def _sample_off_band(p: SpecialParams, samples: int, seed: int, pad: float):
    rng = np.random.default_rng(seed)
    xs: List[np.ndarray] = []
    ys: List[np.ndarray] = []
    got = 0
    while got < samples:
        m = 4 * (samples - got) + 16
        r = 0.995 * np.sqrt(rng.uniform(0.0, 1.0, m))
        t = rng.uniform(0.0, 2.0 * np.pi, m)
        x, y = r * np.cos(t), r * np.sin(t)
        keep = ~near_mollified_edge(p, x, y, pad=pad)
        xs.append(x[keep])
        ys.append(y[keep])
        got += int(keep.sum())
    x = np.concatenate(xs)[:samples]
    y = np.concatenate(ys)[:samples]
    return x, y


def _periodic_minima(report: PeriodicReport):
    """Minimum action and minimum (rotation + period) over isolated points
    and flood families together."""
    actions = [pt.action for pt in report.points]
    rho_l = [pt.rotation + pt.period for pt in report.points]
    for fr in report.non_isolated:
        actions.append(fr.action_range[0])
        rho_l.append(fr.rotation_range[0] + fr.period)
    if not actions:
        return None, None
    return min(actions), min(rho_l)


def verify_special_lemmas(p: SpecialParams, *, k: int = 8,
                          samples: int = 400, seed: int = 0,
                          band_pad: Optional[float] = None,
                          period_bound: Optional[int] = None,
                          periodic_grid: int = 21,
                          engine: str = "rk4") -> SpecialReport:
    """Measure the construction against its closed predictions.

    Samples the one-step action and the k-step rotation average on points
    away from the taper bands and reports maximum deviations from
    predicted_action / predicted_rotation, plus the fitted linear error
    constant.  When ``twist > -2`` (or a period bound is forced) the
    periodic audit enumerates periodic points and flood families up to
    ``period_bound`` (default 3n) and records the minimum action and the
    minimum of rotation + period; ``period_bound=0`` skips the audit.
    """
    ham = build_special_hamiltonian(p)
    pad = 0.25 * p.delta if band_pad is None else float(band_pad)
    x, y = _sample_off_band(p, samples, seed, pad)
    flow = DiskFlow(ham, engine=engine)
    sig = flow.advance(x, y, 1.0, want_action=True).action
    rot = flow.advance(x, y, float(k), want_jac=True).lifted / float(k)
    sigma_dev = float(np.max(np.abs(sig - predicted_action(p, x, y))))
    rot_dev = float(np.max(np.abs(rot - predicted_rotation(p, x, y))))
    fitted = (sigma_dev / p.max_diameter) if p.disks else None

    report = SpecialReport(
        n_samples=int(samples), k=int(k), sigma_max_dev=sigma_dev,
        rotation_max_dev=rot_dev, max_diameter=p.max_diameter,
        fitted_constant=fitted, ruelle_prediction=predicted_ruelle(p),
        calabi_prediction=predicted_calabi(p))

    if period_bound is None:
        run_periodic = p.twist > -2.0
    else:
        run_periodic = int(period_bound) >= 1
    if run_periodic:
        bound = 3 * p.n if period_bound is None else int(period_bound)
        per = find_periodic_points(ham, bound, grid=periodic_grid,
                                   engine=engine)
        report.periodic = per
        report.period_bound = bound
        a_min, rl_min = _periodic_minima(per)
        report.min_action = a_min
        report.min_rotation_plus_period = rl_min
        if a_min is not None:
            report.action_bound_ok = bool(a_min >= np.pi - 1e-6)
            report.rotation_period_bound_ok = bool(rl_min > 1.0)
    return report
