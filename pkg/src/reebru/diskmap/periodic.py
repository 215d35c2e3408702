"""Periodic points of disk maps.

Strategy: seed a uniform grid (plus the origin), cache the forward orbit of
every seed at unit times, and classify each seed by its first return.  Seeds
that return *en masse* to machine-level distance are a flood — an open set on
which some iterate is the identity (or a curve of fixed points): these are
non-isolated families, reported separately with sampled invariants rather
than fed to Newton.  Remaining near-returning seeds get a damped Newton
refinement on the displacement map of the relevant iterate; candidates whose
linearization is essentially parabolic (determinant of Dphi^L - I below
1e-8) are dropped as degenerate rather than polished, since Newton cannot
isolate them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..errors import NonIsolated
from .engine import DiskFlow

RESIDUAL_TOL = 1e-9
DEDUPE_TOL = 1e-6
FLOOD_DIST = 1e-5
DEGENERATE_DET = 1e-8
NEWTON_CAP = 30
DAMPING = 0.5


@dataclass
class PeriodicPoint:
    """An isolated periodic point: location, minimal period, transported-
    Jacobian rotation over the period (turns), action over the period, the
    verified displacement residual, and a degeneracy flag
    (|det(Dphi^L - I)| <= 1e-9)."""

    point: np.ndarray
    period: int
    rotation: float
    action: float
    residual: float
    degenerate: bool

    def __repr__(self):
        return (f"PeriodicPoint(({self.point[0]:+.6f}, {self.point[1]:+.6f}),"
                f" L={self.period}, rho={self.rotation:.6f},"
                f" A={self.action:.6f})")


@dataclass
class FloodRecord:
    """A non-isolated family: an open region (or curve) of points fixed by
    the period-th iterate.  Invariants are computed for every member node
    whose Jacobian transport resolved; ranges cover those nodes and
    ``samples`` keeps an evenly spread subset with values."""

    period: int
    count: int
    samples: np.ndarray
    actions: np.ndarray
    rotations: np.ndarray
    action_range: tuple
    rotation_range: tuple
    unresolved: int = 0


@dataclass
class PeriodicReport:
    """Sequence of isolated PeriodicPoints plus flood and failure
    diagnostics.  Iterating the report iterates the isolated points."""

    points: List[PeriodicPoint] = field(default_factory=list)
    non_isolated: List[FloodRecord] = field(default_factory=list)
    diverged: int = 0
    degenerate_candidates: int = 0
    seeds: int = 0

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


def _seed_grid(grid: int, r_max: float = 0.985):
    xs = np.linspace(-1.0, 1.0, grid)
    gx, gy = np.meshgrid(xs, xs)
    gx, gy = gx.ravel(), gy.ravel()
    keep = np.hypot(gx, gy) <= r_max
    gx, gy = gx[keep], gy[keep]
    if not np.any((gx == 0.0) & (gy == 0.0)):
        gx = np.append(gx, 0.0)
        gy = np.append(gy, 0.0)
    return gx, gy


def _orbit_positions(flow: DiskFlow, x, y, k: int):
    """Positions of phi^1..phi^k for a batch, shape (k, N, 2)."""
    out = np.empty((k, len(x), 2))

    def cb(m, st):
        out[m - 1, :, 0] = st.x
        out[m - 1, :, 1] = st.y

    flow.advance(x, y, float(k), unit_callback=cb)
    return out


def _spread_indices(n: int, m: int) -> np.ndarray:
    if n <= m:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, m).round().astype(int))


def _newton_batch(flow: DiskFlow, x0, y0, period: int, report: PeriodicReport):
    """Damped Newton on phi^L - id for one batch; returns converged points."""
    zx, zy = x0.copy(), y0.copy()
    n = len(zx)
    active = np.ones(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)
    for it in range(NEWTON_CAP):
        if not active.any():
            break
        st = flow.advance(zx[active], zy[active], float(period),
                          want_jac=True)
        gx = st.x - zx[active]
        gy = st.y - zy[active]
        res = np.hypot(gx, gy)
        a = st.a - 1.0
        b = st.b
        c = st.c
        d = st.d - 1.0
        det = a * d - b * c
        if it == 0:
            deg = np.abs(det) < DEGENERATE_DET
            if deg.any():
                report.degenerate_candidates += int(deg.sum())
                idx = np.flatnonzero(active)
                active[idx[deg]] = False
                keep = ~deg
                gx, gy, res, det = gx[keep], gy[keep], res[keep], det[keep]
                a, b, c, d = a[keep], b[keep], c[keep], d[keep]
                if not active.any():
                    break
        done = res < RESIDUAL_TOL
        idx = np.flatnonzero(active)
        if done.any():
            converged[idx[done]] = True
            active[idx[done]] = False
        move = ~done
        if not move.any():
            continue
        midx = idx[move]
        bad = np.abs(det[move]) < 1e-14
        sx = (d[move] * gx[move] - b[move] * gy[move]) / det[move]
        sy = (a[move] * gy[move] - c[move] * gx[move]) / det[move]
        damp = np.where(res[move] > 1e-3, DAMPING, 1.0)
        zx[midx] -= damp * sx
        zy[midx] -= damp * sy
        off = (bad | ~np.isfinite(zx[midx]) | ~np.isfinite(zy[midx])
               | (np.hypot(zx[midx], zy[midx]) > 1.1))
        if off.any():
            report.diverged += int(off.sum())
            active[midx[off]] = False
    report.diverged += int(active.sum())  # iteration cap exhausted
    return zx[converged], zy[converged]


def _attach(flow: DiskFlow, z, period: int):
    """High-confidence invariants for one point: rotation (lifted turns),
    action, residual, degeneracy of Dphi^L - I."""
    st, _, bad = flow.advance_refined(np.array([z[0]]), np.array([z[1]]),
                                      float(period), want_jac=True,
                                      want_action=True)
    res = float(np.hypot(st.x[0] - z[0], st.y[0] - z[1]))
    det_gap = abs((st.a[0] - 1.0) * (st.d[0] - 1.0) - st.b[0] * st.c[0])
    return (float(st.lifted[0]), float(st.action[0]), res,
            det_gap <= 1e-9, bool(bad[0]))


def find_periodic_points(ham, max_period: int, grid: int = 33, *,
                         engine: str = "rk4",
                         steps_per_unit: Optional[int] = None,
                         on_flood: str = "record",
                         flood_min: Optional[int] = None,
                         max_flood_values: int = 32) -> PeriodicReport:
    """Locate periodic points of the time-one map up to ``max_period``.

    Isolated points are Newton-refined until |phi^L(p) - p| < 1e-9 and
    reported with minimal period, rotation, and action.  Non-isolated
    families (open sets or curves fixed by an iterate) are detected as
    floods and reported in ``non_isolated``; with on_flood="raise" they
    raise NonIsolated instead.  Newton failures are dropped and counted.
    """
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    if on_flood not in ("record", "raise"):
        raise ValueError("on_flood must be 'record' or 'raise'")
    flow = ham if isinstance(ham, DiskFlow) else DiskFlow(
        ham, steps_per_unit=steps_per_unit, engine=engine)
    k = int(max_period)
    sx, sy = _seed_grid(grid)
    n = len(sx)
    report = PeriodicReport(seeds=n)
    flood_min = flood_min or max(8, n // 200)

    orbit = _orbit_positions(flow, sx, sy, k)
    disp = np.hypot(orbit[:, :, 0] - sx, orbit[:, :, 1] - sy)   # (k, N)
    spacing = 2.0 / (grid - 1)
    capture = 0.75 * spacing
    returning = disp < capture
    has_ret = returning.any(axis=0)
    first_ret = np.where(has_ret, returning.argmax(axis=0) + 1, 0)

    flood_member = np.zeros(n, dtype=bool)
    for period in range(1, k + 1):
        mine = (first_ret == period) & (disp[period - 1] < FLOOD_DIST)
        count = int(mine.sum())
        if count < flood_min:
            continue
        # confirm: the tiny displacement must shrink under step refinement
        # (true returns are integration-error limited, near-returns are not)
        pick = np.flatnonzero(mine)[_spread_indices(count, 16)]
        st2 = flow.advance(sx[pick], sy[pick], float(period), steps_scale=2)
        d2 = np.hypot(st2.x - sx[pick], st2.y - sy[pick])
        d1 = disp[period - 1][pick]
        ok = (d2 < 0.51 * d1 + 1e-12) | (d1 < 1e-12)
        if not ok.all():
            continue
        if on_flood == "raise":
            raise NonIsolated(
                f"open set of period-{period} points: {count} of {n} seeds "
                f"return to within {FLOOD_DIST:g}")
        flood_member |= mine
        idx = np.flatnonzero(mine)
        st, _, bad = flow.advance_refined(sx[idx], sy[idx], float(period),
                                          want_jac=True, want_action=True)
        good = ~bad
        rot = st.lifted[good]
        act = st.action[good]
        keep = idx[good][_spread_indices(int(good.sum()), max_flood_values)]
        pos = np.column_stack([sx[keep], sy[keep]])
        sel = np.isin(idx[good], keep)
        report.non_isolated.append(FloodRecord(
            period=period, count=count, samples=pos,
            actions=act[sel], rotations=rot[sel],
            action_range=(float(act.min()), float(act.max())),
            rotation_range=(float(rot.min()), float(rot.max())),
            unresolved=int(bad.sum())))

    # Newton on the remaining near-returners, period by period
    found = []
    for period in range(1, k + 1):
        cand = (first_ret == period) & ~flood_member
        if not cand.any():
            continue
        cx, cy = _newton_batch(flow, sx[cand], sy[cand], period, report)
        for j in range(len(cx)):
            found.append((period, cx[j], cy[j]))

    # dedupe by distance and orbit equivalence; minimal period; attach data
    orbit_bank: List[np.ndarray] = []
    for period, px, py in sorted(found, key=lambda t: t[0]):
        z = np.array([px, py])
        if any(np.min(np.hypot(o[:, 0] - px, o[:, 1] - py)) < DEDUPE_TOL
               for o in orbit_bank):
            continue
        snaps = _orbit_positions(flow, z[0:1], z[1:2], period)[:, 0, :]
        back = np.hypot(snaps[:, 0] - px, snaps[:, 1] - py)
        minimal = int(np.flatnonzero(back < 10 * DEDUPE_TOL)[0] + 1)
        if minimal < period:
            rx, ry = _newton_batch(flow, z[0:1], z[1:2], minimal, report)
            if len(rx) == 0:
                continue
            z = np.array([rx[0], ry[0]])
            snaps = _orbit_positions(flow, z[0:1], z[1:2], minimal)[:, 0, :]
        rotation, action, residual, degenerate, coarse = _attach(
            flow, z, minimal)
        if residual > 10 * RESIDUAL_TOL:
            report.diverged += 1
            continue
        report.points.append(PeriodicPoint(
            point=z, period=minimal, rotation=rotation, action=action,
            residual=residual, degenerate=degenerate or coarse))
        orbit_bank.append(snaps[:minimal])
    report.points.sort(key=lambda p: (p.period, -p.action))
    return report
