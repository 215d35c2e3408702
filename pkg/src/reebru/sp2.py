"""Rotation numbers and Conley-Zehnder indices for paths of 2x2 symplectic matrices.

Angles are measured in *turns* (full revolutions) throughout.  The circle
invariant ``sigma`` classifies a matrix by its eigenvalues; continuous paths
starting at the identity lift it to a real-valued winding angle, the rotation
number ``rho``.  A second, vector-based winding ``rotation_rel_s`` tracks the
argument of the image of a fixed unit vector; the two lifts differ by less
than one turn and both are quasimorphisms with defect at most one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SamplingTooCoarse

TWO_PI = 2.0 * np.pi
#: discriminant band around trace^2 = 4 treated as the real-eigenvalue branch
DISC_TOL = 1e-12
#: threshold below which the winding probe vector is swapped for its partner
PROBE_TOL = 1e-12
#: |det - 1| tolerance for accepting a matrix as symplectic
SYMPLECTIC_TOL = 1e-10
#: maximum allowed sigma jump between consecutive path samples, in turns
MAX_JUMP = 0.25


def det2(m: np.ndarray) -> np.ndarray:
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def check_symplectic(m: np.ndarray, tol: float = SYMPLECTIC_TOL) -> None:
    """Raise ValueError unless every matrix in ``m`` has unit determinant."""
    err = np.max(np.abs(det2(np.asarray(m, dtype=float)) - 1.0))
    if not err <= tol:
        raise ValueError(f"matrix is not symplectic: |det - 1| = {err:.3e} > {tol:.1e}")


def sigma(m: np.ndarray) -> np.ndarray:
    """Circle invariant of symplectic 2x2 matrices, in turns, vectorized.

    Real positive eigenvalues map to 0, real negative to 1/2.  For complex
    (unit-circle) eigenvalues the eigenvalue in the upper half plane is taken
    if the matrix winds the probe vector positively, its conjugate otherwise;
    the probe is (1, 0) with fallback (0, 1).  Discriminants within
    ``DISC_TOL`` of zero use the real branch (both branches agree there).
    """
    m = np.asarray(m, dtype=float)
    scalar = m.ndim == 2
    m3 = m[None] if scalar else m
    tr = m3[..., 0, 0] + m3[..., 1, 1]
    disc = tr * tr - 4.0
    out = np.where(tr >= 0.0, 0.0, 0.5)
    cplx = disc < -DISC_TOL
    if np.any(cplx):
        phi0 = np.arctan2(np.sqrt(-disc[cplx]), tr[cplx]) / TWO_PI  # in (0, 1/2)
        q = m3[..., 1, 0][cplx]
        q = np.where(np.abs(q) < PROBE_TOL, -m3[..., 0, 1][cplx], q)
        out[cplx] = np.where(q > 0.0, phi0, 1.0 - phi0)
    return float(out[0]) if scalar else out


def wrap_turns(d: np.ndarray) -> np.ndarray:
    """Wrap angle differences (in turns) to the interval [-1/2, 1/2]."""
    return d - np.round(d)


@dataclass(frozen=True)
class LiftedSymplecticPath:
    """A sampled path in Sp(2, R) starting at the identity, with its lift.

    ``lifted_angle[k]`` is the continuous unwrap of ``sigma`` along the path,
    normalized to start at 0; ``rho`` is its value at the endpoint.
    """

    times: np.ndarray
    matrices: np.ndarray
    sigma_values: np.ndarray = field(repr=False)
    lifted_angle: np.ndarray = field(repr=False)

    @property
    def rho(self) -> float:
        return float(self.lifted_angle[-1])

    @property
    def end(self) -> np.ndarray:
        return self.matrices[-1]

    def __len__(self) -> int:
        return len(self.times)


def lift_path(times: np.ndarray, matrices: np.ndarray,
              max_jump: float = MAX_JUMP,
              det_tol: float = SYMPLECTIC_TOL) -> LiftedSymplecticPath:
    """Lift sigma continuously along a sampled symplectic path from the identity.

    Raises SamplingTooCoarse when consecutive sigma values jump by ``max_jump``
    (a quarter turn by default) or more -- half a turn is where the unwrap
    genuinely breaks, the default keeps a 2x safety margin.  ``det_tol`` is the
    unit-determinant tolerance: exact algebraic paths keep the strict default,
    while paths recorded from a numerical flow accumulate a small determinant
    drift per time unit and should pass their integrator's drift budget.
    """
    times = np.asarray(times, dtype=float)
    matrices = np.asarray(matrices, dtype=float)
    if matrices.ndim != 3 or matrices.shape[1:] != (2, 2):
        raise ValueError("matrices must have shape (n, 2, 2)")
    if len(times) != len(matrices) or len(times) < 2:
        raise ValueError("need matching times/matrices with at least two samples")
    if np.max(np.abs(matrices[0] - np.eye(2))) > 1e-9:
        raise ValueError("path must start at the identity")
    check_symplectic(matrices, tol=det_tol)
    sig = sigma(matrices)
    deltas = wrap_turns(np.diff(sig))
    worst = float(np.max(np.abs(deltas))) if len(deltas) else 0.0
    if worst >= max_jump:
        raise SamplingTooCoarse(
            f"sigma jumped {worst:.3f} turns between samples (limit {max_jump})")
    lifted = np.concatenate([[0.0], np.cumsum(deltas)])
    return LiftedSymplecticPath(times=times, matrices=matrices,
                                sigma_values=sig, lifted_angle=lifted)


def rel_angle_lift(matrices: np.ndarray, s: np.ndarray,
                   max_jump: float = MAX_JUMP) -> np.ndarray:
    """Unwrapped argument (in turns) of M_k s along a matrix path, starting at 0."""
    s = np.asarray(s, dtype=float)
    if not np.linalg.norm(s) > 0:
        raise ValueError("reference vector must be nonzero")
    w = matrices @ s
    ang = np.arctan2(w[..., 1], w[..., 0]) / TWO_PI
    deltas = wrap_turns(np.diff(ang))
    worst = float(np.max(np.abs(deltas))) if len(deltas) else 0.0
    if worst >= max_jump:
        raise SamplingTooCoarse(
            f"probe vector jumped {worst:.3f} turns between samples (limit {max_jump})")
    return np.concatenate([[0.0], np.cumsum(deltas)])


def rotation_rel_s(path: LiftedSymplecticPath, s: np.ndarray) -> float:
    """Winding of the unit vector s under the path, in turns (rho_s).

    Satisfies |rho_s - rho| <= 1 and |rho_s - rho_t| <= 1 for any probes s, t.
    """
    return float(rel_angle_lift(path.matrices, s)[-1])


@dataclass(frozen=True)
class CzResult:
    value: int
    degenerate: bool
    rho: float


def cz_index(path: LiftedSymplecticPath, degeneracy_tol: float = 1e-9) -> CzResult:
    """Conley-Zehnder index floor(rho) + ceil(rho) of a nondegenerate endpoint.

    When det(end - id) vanishes (within ``degeneracy_tol``) the endpoint is
    degenerate and the returned value is only the lower bound 2*ceil(rho) - 1,
    flagged by ``degenerate=True``.
    """
    rho = path.rho
    if abs(rho - round(rho)) < 1e-8:
        rho = float(round(rho))
    gap = det2(path.end - np.eye(2))
    if abs(gap) <= degeneracy_tol:
        return CzResult(value=int(2 * np.ceil(rho) - 1), degenerate=True, rho=rho)
    return CzResult(value=int(np.floor(rho) + np.ceil(rho)), degenerate=False, rho=rho)


# ---------------------------------------------------------------------------
# path construction helpers


def rotation_path(turns: float, n: int = 256) -> LiftedSymplecticPath:
    """The path t -> rotation by ``turns * t`` turns, t in [0, 1]."""
    t = np.linspace(0.0, 1.0, n)
    ang = TWO_PI * turns * t
    c, s = np.cos(ang), np.sin(ang)
    mats = np.empty((n, 2, 2))
    mats[:, 0, 0] = c
    mats[:, 0, 1] = -s
    mats[:, 1, 0] = s
    mats[:, 1, 1] = c
    return lift_path(t, mats)


def shear_path(c: float = 1.0, n: int = 64) -> LiftedSymplecticPath:
    t = np.linspace(0.0, 1.0, n)
    mats = np.tile(np.eye(2), (n, 1, 1))
    mats[:, 0, 1] = c * t
    return lift_path(t, mats)


def generator_path(gen: np.ndarray, n: int = 256) -> LiftedSymplecticPath:
    """Path t -> exp(t * gen) for a traceless 2x2 generator."""
    t = np.linspace(0.0, 1.0, n)
    mats = np.array([_expm2(gen * ti) for ti in t])
    return lift_path(t, mats)


def _expm2(a: np.ndarray) -> np.ndarray:
    """Closed-form exponential of a traceless 2x2 matrix."""
    mu2 = a[0, 0] * a[0, 0] + a[0, 1] * a[1, 0]
    mu = np.sqrt(complex(mu2))
    if abs(mu) < 1e-30:
        coef = 1.0
        ch = 1.0
    else:
        ch = np.cosh(mu).real
        coef = (np.sinh(mu) / mu).real
    return ch * np.eye(2) + coef * a


def concat_paths(first: LiftedSymplecticPath,
                 second: LiftedSymplecticPath) -> LiftedSymplecticPath:
    """Concatenation: run ``first`` on [0, 1/2], then ``second`` times first's
    endpoint on [1/2, 1].  This is the path composition whose endpoint is
    second.end @ first.end."""
    t1 = 0.5 * first.times / first.times[-1]
    t2 = 0.5 + 0.5 * second.times / second.times[-1]
    m2 = second.matrices @ first.end
    times = np.concatenate([t1, t2[1:]])
    mats = np.concatenate([first.matrices, m2[1:]])
    return lift_path(times, mats)


def path_power(path: LiftedSymplecticPath, k: int) -> LiftedSymplecticPath:
    """The path traversed k times, each repeat premultiplied by the endpoint."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    out = path
    for _ in range(k - 1):
        out = concat_paths(out, path)
    return out


def conjugate_path(path: LiftedSymplecticPath, a: np.ndarray) -> LiftedSymplecticPath:
    check_symplectic(a)
    a_inv = np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det2(a)
    mats = a @ path.matrices @ a_inv
    return lift_path(path.times, mats)


def random_sp2(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """A random symplectic matrix: the exponential of a random traceless matrix."""
    a, b, c = rng.normal(scale=scale, size=3)
    return _expm2(np.array([[a, b], [c, -a]]))


def random_path(rng: np.random.Generator, segments: int = 3,
                samples_per_segment: int = 128) -> LiftedSymplecticPath:
    """A random piecewise path: concatenated rotation / shear / scale segments.

    Built from exact one-parameter subgroups so no ODE error enters; segment
    rates are kept small enough for the default unwrap adequacy margin.
    """
    path = None
    for _ in range(segments):
        kind = rng.integers(0, 3)
        if kind == 0:
            turns = rng.uniform(-2.5, 2.5)
            seg = rotation_path(turns, samples_per_segment)
        elif kind == 1:
            gen = np.array([[0.0, rng.uniform(-2.0, 2.0)], [0.0, 0.0]])
            if rng.uniform() < 0.5:
                gen = gen.T
            seg = generator_path(gen, samples_per_segment)
        else:
            a = rng.uniform(-1.2, 1.2)
            gen = np.array([[a, rng.uniform(-1.0, 1.0)],
                            [rng.uniform(-1.0, 1.0), -a]])
            seg = generator_path(gen, samples_per_segment)
        path = seg if path is None else concat_paths(path, seg)
    return path
