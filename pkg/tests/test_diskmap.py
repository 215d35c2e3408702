"""Disk-map engine and invariants.

Oracle layout: radial Hamiltonians have closed forms for the generating
action (h - r h'/2) and the rotation number (-h'/(2 pi r)), so every radial
profile doubles as an independent oracle for the integrator, the action
accumulator, the Jacobian transport, and the quadrature layers on top.
Non-radial coverage comes from random polynomial Hamiltonians (symplectic
and cocycle identities that hold for *any* Hamiltonian) and from localized
twist constructions whose Calabi invariant has a one-dimensional closed form.
"""

import numpy as np
import pytest

from reebru import diskmap as dm
from reebru import sp2
from reebru.errors import NonIsolated, SamplingTooCoarse, StepUnstable

B = 1.1  # rotation coefficient used throughout: one-plus-one-over-ten


@pytest.fixture(scope="module")
def rot_ham():
    return dm.RadialHamiltonian(dm.rotation_profile(B), boundary_coefficient=B)


@pytest.fixture(scope="module")
def quartic_ham():
    return dm.RadialHamiltonian(dm.quartic_profile())


@pytest.fixture(scope="module")
def cosine_ham():
    return dm.RadialHamiltonian(dm.cosine_profile())


@pytest.fixture(scope="module")
def random_ham():
    return dm.random_polynomial_hamiltonian(np.random.default_rng(42), degree=4)


def _ring_points(radii, count=8, seed=0):
    rng = np.random.default_rng(seed)
    r = np.repeat(radii, count)
    th = rng.uniform(0.0, 2.0 * np.pi, r.size)
    return np.column_stack([r * np.cos(th), r * np.sin(th)]), r


# ---------------------------------------------------------------------------
# radial closed-form oracles


class TestRadialOracles:
    RADII = np.array([0.15, 0.4, 0.62, 0.85])

    @pytest.mark.parametrize("profile_name",
                             ["rotation", "quartic", "cosine"])
    def test_action_map_matches_closed_form(self, profile_name):
        prof = {"rotation": lambda: dm.rotation_profile(B),
                "quartic": dm.quartic_profile,
                "cosine": dm.cosine_profile}[profile_name]()
        ham = dm.RadialHamiltonian(prof)
        pts, r = _ring_points(self.RADII)
        got = dm.action_map(ham, pts)
        want = dm.radial_action(prof, r)
        assert np.max(np.abs(got - want)) < 1e-6

    @pytest.mark.parametrize("profile_name",
                             ["rotation", "quartic", "cosine"])
    def test_birkhoff_winding_matches_closed_form(self, profile_name):
        prof = {"rotation": lambda: dm.rotation_profile(B),
                "quartic": dm.quartic_profile,
                "cosine": dm.cosine_profile}[profile_name]()
        ham = dm.RadialHamiltonian(prof)
        for r0 in (0.3, 0.62):
            b = dm.birkhoff_averages(ham, (r0, 0.0), 4)
            w = dm.radial_rotation(prof, r0)
            assert np.max(np.abs(b.winding_seq - w)) < 1e-6

    def test_jacobian_rotation_inside_shear_envelope(self, quartic_ham):
        # The transported-Jacobian average carries a bounded wobble from the
        # polar shear (the matrix path is rotation times a linearly growing
        # shear), so it approaches the closed form only like 1/k.
        prof = quartic_ham.profile
        r0 = 0.62
        w = dm.radial_rotation(prof, r0)
        b = dm.birkhoff_averages(quartic_ham, (r0, 0.0), 8)
        ks = np.arange(1, 9)
        assert np.all(np.abs(b.r_seq - w) <= 0.5 / ks + 1e-9)

    def test_pure_rotation_exact_through_jacobian_route(self, rot_ham):
        # no shear at all: the Jacobian route itself is exact here
        b = dm.birkhoff_averages(rot_ham, (0.5, 0.0), 6)
        assert np.max(np.abs(b.r_seq - B)) < 1e-12
        assert np.max(np.abs(b.winding_seq - B)) < 1e-12

    def test_action_average_constant_along_radial_orbit(self, cosine_ham):
        r0 = 0.44
        b = dm.birkhoff_averages(cosine_ham, (r0, 0.0), 5)
        sig = dm.radial_action(cosine_ham.profile, r0)
        assert np.max(np.abs(b.s_seq - sig)) < 1e-9
        assert abs(b.action_total - 5 * sig) < 5e-9

    def test_winding_is_nan_at_center(self, quartic_ham):
        b = dm.birkhoff_averages(quartic_ham, (0.0, 0.0), 2)
        assert np.all(np.isnan(b.winding_seq))
        # the Jacobian route is still perfectly defined at the fixed point
        w0 = dm.radial_rotation(quartic_ham.profile, 0.0)
        assert abs(b.r_seq[-1] - w0) <= 0.5 / 2 + 1e-9


# ---------------------------------------------------------------------------
# the rotation flow: every invariant has an exact value


class TestRotationExamples:
    def test_action_is_constant_pi_times_b(self, rot_ham):
        pts, _ = _ring_points(np.array([0.1, 0.5, 0.9]), seed=3)
        got = dm.action_map(rot_ham, pts)
        assert np.max(np.abs(got - B * np.pi)) < 1e-9

    def test_calabi(self, rot_ham):
        res = dm.calabi(rot_ham)
        assert abs(res.value - B * np.pi ** 2) < 1e-8
        assert res.excluded == 0

    def test_ruelle(self, rot_ham):
        res = dm.ruelle_diskmap(rot_ham, k=8, n_r=24, n_theta=24)
        assert abs(res.value - B * np.pi) < 1e-9
        assert abs(res.diagnostic) < 1e-9

    def test_zero_hamiltonian_is_all_zeros(self):
        ham0 = dm.RadialHamiltonian(dm.rotation_profile(0.0))
        pts, _ = _ring_points(np.array([0.3, 0.7]), seed=5)
        assert np.max(np.abs(dm.action_map(ham0, pts))) == 0.0
        assert dm.calabi(ham0, n_r=16, n_theta=16).value == 0.0
        st = dm.DiskFlow(ham0).advance(pts[:, 0], pts[:, 1], 1.0,
                                       want_jac=True)
        assert np.max(np.abs(st.x - pts[:, 0])) == 0.0
        assert np.max(np.abs(st.det() - 1.0)) == 0.0


# ---------------------------------------------------------------------------
# symplectic structure


class TestSymplecticProperties:
    N_POINTS = 100

    def _cloud(self, seed=11):
        rng = np.random.default_rng(seed)
        r = np.sqrt(rng.uniform(0.0, 1.0, self.N_POINTS)) * 0.98
        th = rng.uniform(0.0, 2.0 * np.pi, self.N_POINTS)
        return r * np.cos(th), r * np.sin(th)

    def test_determinant_preserved_rk4(self, random_ham):
        x, y = self._cloud()
        st = dm.DiskFlow(random_ham, engine="rk4").advance(
            x, y, 1.0, want_jac=True)
        assert np.max(np.abs(st.det() - 1.0)) < 1e-7

    def test_determinant_exact_midpoint(self, random_ham):
        # the Cayley tangent map is exactly unimodular
        x, y = self._cloud(12)
        st = dm.DiskFlow(random_ham, engine="midpoint").advance(
            x, y, 1.0, want_jac=True)
        assert np.max(np.abs(st.det() - 1.0)) < 1e-12

    def test_energy_conserved_along_flow(self, random_ham):
        x, y = self._cloud(13)
        st = dm.DiskFlow(random_ham).advance(x, y, 1.0)
        assert np.max(st.drift) < 1e-9

    def test_boundary_circle_invariant(self, random_ham):
        th = np.linspace(0.0, 2.0 * np.pi, 40, endpoint=False)
        st = dm.DiskFlow(random_ham).advance(np.cos(th), np.sin(th), 1.0)
        assert np.max(np.abs(np.hypot(st.x, st.y) - 1.0)) < 1e-9

    def test_action_is_potential_of_pullback_difference(self, random_ham):
        # sigma must satisfy  d sigma = (time-one map)* lambda - lambda
        # with lambda = (x dy - y dx)/2; checked by central differences.
        g = np.linspace(-0.9, 0.9, 32)
        X, Y = np.meshgrid(g, g)
        keep = X * X + Y * Y <= 0.81
        xs, ys = X[keep], Y[keep]
        flow = dm.DiskFlow(random_ham)
        h = 1e-4

        def shifted(dx, dy):
            st = flow.advance(xs + dx, ys + dy, 1.0, want_action=True)
            return st.x, st.y, st.action

        xc, yc, _ = shifted(0.0, 0.0)
        xpx, ypx, spx = shifted(h, 0.0)
        xmx, ymx, smx = shifted(-h, 0.0)
        xpy, ypy, spy = shifted(0.0, h)
        xmy, ymy, smy = shifted(0.0, -h)
        lhs_x = (spx - smx) / (2 * h)
        lhs_y = (spy - smy) / (2 * h)
        rhs_x = 0.5 * (xc * (ypx - ymx) - yc * (xpx - xmx)) / (2 * h) + 0.5 * ys
        rhs_y = 0.5 * (xc * (ypy - ymy) - yc * (xpy - xmy)) / (2 * h) - 0.5 * xs
        err = max(np.max(np.abs(lhs_x - rhs_x)), np.max(np.abs(lhs_y - rhs_y)))
        assert err < 1e-5

    def test_streamed_lift_agrees_with_path_lift(self, quartic_ham):
        res = dm.integrate_flow(quartic_ham, (0.62, 0.0), (0.0, 3.0))
        path = sp2.lift_path(res.times, res.jacobians, det_tol=1e-6)
        assert abs(res.lifted[-1] - path.rho) < 1e-9
        assert res.energy_drift < 1e-9

    def test_exact_rotation_leg_agrees_with_stepped(self, rot_ham):
        pts, _ = _ring_points(np.array([0.25, 0.7]), count=4, seed=9)
        exact = dm.DiskFlow(rot_ham)
        stepped = dm.DiskFlow(rot_ham, exact_legs=False)
        a = exact.advance(pts[:, 0], pts[:, 1], 1.0,
                          want_jac=True, want_action=True)
        b = stepped.advance(pts[:, 0], pts[:, 1], 1.0,
                            want_jac=True, want_action=True)
        assert np.max(np.abs(a.x - b.x)) < 1e-7
        assert np.max(np.abs(a.action - b.action)) < 1e-7
        assert np.max(np.abs(a.lifted - b.lifted)) < 1e-7


# ---------------------------------------------------------------------------
# guards and failure modes


def _stiff_profile():
    # fast rotation with a slight anharmonic term: radii are conserved to
    # machine precision by the midpoint engine, but the winding per step is
    # far beyond the continuation guard at tiny step counts
    return dm.RadialProfile(
        h=lambda r: 5.0 * np.pi * (1.0 - r * r) + 0.1 * (1.0 - r * r) ** 2,
        dh=lambda r: -10.0 * np.pi * r - 0.4 * r * (1.0 - r * r),
        d2h=lambda r: -10.0 * np.pi - 0.4 + 1.2 * r * r,
        dh_over_r=lambda r: -10.0 * np.pi - 0.4 * (1.0 - r * r),
        name="stiff")


class TestGuards:
    def test_unstable_step_count_raises(self):
        ham = dm.CallableHamiltonian(lambda t, x, y: 3.0 * (1 - x*x - y*y) ** 2)
        with pytest.raises(StepUnstable):
            dm.integrate_flow(ham, (0.5, 0.0), (0.0, 1.0), steps_per_unit=8)

    def test_coarse_sampling_raises_after_refine_budget(self):
        ham = dm.RadialHamiltonian(_stiff_profile())
        with pytest.raises(SamplingTooCoarse):
            dm.birkhoff_averages(ham, (0.5, 0.0), 1, engine="midpoint",
                                 steps_per_unit=8, refine_max=0)

    def test_refinement_recovers_liftable_path(self):
        # the refine loop doubles steps until the sigma path is liftable;
        # that makes the two winding routes agree on the *numerical* map
        # (accuracy of the map itself is the step planner's job, tested next)
        ham = dm.RadialHamiltonian(_stiff_profile())
        b = dm.birkhoff_averages(ham, (0.5, 0.0), 1, engine="midpoint",
                                 steps_per_unit=8, refine_max=6)
        assert abs(b.r_seq[-1] - b.winding_seq[-1]) < 5e-2

    def test_default_step_planning_resolves_stiff_rotation(self):
        ham = dm.RadialHamiltonian(_stiff_profile())
        b = dm.birkhoff_averages(ham, (0.5, 0.0), 1)
        w = dm.radial_rotation(ham.profile, 0.5)
        assert abs(b.winding_seq[-1] - w) < 1e-6

    def test_flow_must_start_at_time_zero(self, quartic_ham):
        with pytest.raises(ValueError):
            dm.integrate_flow(quartic_ham, (0.5, 0.0), (1.0, 2.0))

    def test_unknown_engine_rejected(self, quartic_ham):
        with pytest.raises(ValueError):
            dm.DiskFlow(quartic_ham, engine="verlet")


# ---------------------------------------------------------------------------
# composition structure


class TestComposition:
    def test_concat_time_one_is_composition(self, rot_ham, quartic_ham):
        concat = dm.TimeConcatHamiltonian([rot_ham, quartic_ham])
        pts, _ = _ring_points(np.array([0.3, 0.6]), count=4, seed=21)
        x1, y1 = dm.DiskFlow(rot_ham).time_one(pts[:, 0], pts[:, 1])
        x2, y2 = dm.DiskFlow(quartic_ham).time_one(x1, y1)
        xc, yc = dm.DiskFlow(concat).time_one(pts[:, 0], pts[:, 1])
        assert np.max(np.hypot(xc - x2, yc - y2)) < 1e-8

    def test_concat_action_cocycle(self, rot_ham, quartic_ham):
        # sigma of a composition: sigma_1(z) + sigma_2(phi_1 z); both factors
        # are radial here so the sum has a closed form at every radius
        concat = dm.TimeConcatHamiltonian([rot_ham, quartic_ham])
        pts, r = _ring_points(np.array([0.35, 0.75]), count=4, seed=22)
        got = dm.action_map(concat, pts)
        want = (dm.radial_action(rot_ham.profile, r)
                + dm.radial_action(quartic_ham.profile, r))
        assert np.max(np.abs(got - want)) < 1e-7

    def test_half_time_of_concat_is_first_factor(self, rot_ham, quartic_ham):
        concat = dm.TimeConcatHamiltonian([rot_ham, quartic_ham])
        pts, _ = _ring_points(np.array([0.5]), count=5, seed=23)
        st = dm.DiskFlow(concat).advance(pts[:, 0], pts[:, 1], 0.5)
        x1, y1 = dm.DiskFlow(rot_ham).time_one(pts[:, 0], pts[:, 1])
        assert np.max(np.hypot(st.x - x1, st.y - y1)) < 1e-8

    def test_rotated_hamiltonian_conjugates_the_flow(self, random_ham):
        angle = 0.37
        conj = dm.RotatedHamiltonian(random_ham, angle)
        pts, _ = _ring_points(np.array([0.2, 0.55, 0.8]), count=3, seed=24)
        a = 2.0 * np.pi * angle
        c, s = np.cos(a), np.sin(a)
        # R(-theta) z, flow, then R(theta)
        xb = c * pts[:, 0] + s * pts[:, 1]
        yb = -s * pts[:, 0] + c * pts[:, 1]
        x1, y1 = dm.DiskFlow(random_ham).time_one(xb, yb)
        xw, yw = c * x1 - s * y1, s * x1 + c * y1
        xg, yg = dm.DiskFlow(conj).time_one(pts[:, 0], pts[:, 1])
        assert np.max(np.hypot(xg - xw, yg - yw)) < 1e-8

    def test_calabi_invariant_under_conjugation(self, random_ham):
        base = dm.calabi(random_ham, n_r=48, n_theta=48)
        # a node-commensurate angle makes the quadrature grids coincide, so
        # any disagreement is genuine non-equivariance of the flow pipeline
        conj = dm.calabi(dm.RotatedHamiltonian(random_ham, 7.0 / 48.0),
                         n_r=48, n_theta=48)
        assert abs(base.value - conj.value) < 1e-8
        # off-grid angles add only the angular rule's spectral tail
        offg = dm.calabi(dm.RotatedHamiltonian(random_ham, 0.23),
                         n_r=48, n_theta=48)
        assert abs(base.value - offg.value) < 2e-4


# ---------------------------------------------------------------------------
# localized twists and the decomposed quadrature


def hermite_twist_profile(g0, core_radius, support_radius):
    """Radial bump: exactly quadratic core g0*(1 - (u/q)^2 / 2) on [0, q],
    cubic Hermite taper to zero value and slope at the support radius."""
    q, S = float(core_radius), float(support_radius)
    c = -0.5 * g0 / (q * q)
    gq = g0 + c * q * q
    dgq = 2.0 * c * q
    L = S - q

    def _t(u):
        return np.clip((u - q) / L, 0.0, 1.0)

    def h(u):
        u = np.asarray(u, dtype=float)
        t = _t(u)
        band = gq * (2 * t**3 - 3 * t**2 + 1) + L * dgq * (t**3 - 2 * t**2 + t)
        out = np.where(u <= q, g0 + c * u * u, band)
        return np.where(u >= S, 0.0, out)

    def dh(u):
        u = np.asarray(u, dtype=float)
        t = _t(u)
        band = (gq * (6 * t**2 - 6 * t) / L + dgq * (3 * t**2 - 4 * t + 1))
        out = np.where(u <= q, 2.0 * c * u, band)
        return np.where(u >= S, 0.0, out)

    def d2h(u):
        u = np.asarray(u, dtype=float)
        t = _t(u)
        band = (gq * (12 * t - 6) / (L * L) + dgq * (6 * t - 4) / L)
        out = np.where(u <= q, 2.0 * c, band)
        return np.where(u >= S, 0.0, out)

    return dm.RadialProfile(h=h, dh=dh, d2h=d2h,
                            name="hermite-twist",
                            quadratic_radius=q, support_radius=S)


def _twist_setup():
    # the rotation advances angles by one tenth of a turn per unit, so ten
    # symmetric disks map onto each other and core points stay in cores;
    # the profile is gentle enough that band frames stay modestly sheared
    # and the streamed sigma lift never needs a refinement pass
    q, S = 0.05, 0.16
    prof = hermite_twist_profile(0.05, q, S)
    ang = 2.0 * np.pi * (np.arange(10) + 0.5) / 10
    centers = 0.55 * np.column_stack([np.cos(ang), np.sin(ang)])
    twist = dm.TwistHamiltonian(centers, prof, S)
    ham = dm.TimeConcatHamiltonian(
        [dm.RadialHamiltonian(dm.rotation_profile(B)), twist],
        boundary_coefficient=B)
    background = dm.TimeConcatHamiltonian(
        [dm.RadialHamiltonian(dm.rotation_profile(B)),
         dm.TwistHamiltonian(np.empty((0, 2)), prof, S)],
        boundary_coefficient=B)
    dec = dm.DomainDecomposition(
        background=background, radial_profile=dm.rotation_profile(B),
        orbits=[dm.DiskOrbitSpec(center=tuple(centers[0]), inner_radius=q,
                                 outer_radius=S, count=10)])
    return ham, dec, prof, q, S


class TestTwistDecomposition:
    def _probe(self, dec, q, S):
        c0 = dec.orbits[0].center
        return np.array([
            [c0[0] + 0.3 * q, c0[1]],          # deep core
            [c0[0], c0[1] + 0.5 * (q + S)],    # transition band
            [c0[0] + 2.5 * S, c0[1]],          # outside the support
            [0.2, -0.1],                       # far field
        ])

    def test_exact_twist_legs_agree_with_stepped(self):
        ham, dec, _, q, S = _twist_setup()
        probe = self._probe(dec, q, S)
        a = dm.DiskFlow(ham).advance(
            probe[:, 0], probe[:, 1], 1.0, want_jac=True, want_action=True)
        b = dm.DiskFlow(ham, exact_legs=False).advance(
            probe[:, 0], probe[:, 1], 1.0, want_jac=True, want_action=True)
        assert not a.coarse.any()
        assert np.max(np.hypot(a.x - b.x, a.y - b.y)) < 1e-6
        assert np.max(np.abs(a.action - b.action)) < 1e-6
        assert np.max(np.abs(a.lifted - b.lifted)) < 1e-5

    def test_stiff_band_advances_in_closed_form(self):
        # a profile steep enough that stepping it demands tens of thousands
        # of steps per unit: the closed-form route must stay exact at a band
        # radius anyway.  A single disk centered at the origin makes the leg
        # radial, so position, action, tangent map, and determinant all have
        # pencil-and-paper values.
        prof = hermite_twist_profile(0.3, 0.06, 0.09)
        twist = dm.TwistHamiltonian(np.array([[0.0, 0.0]]), prof, 0.09)
        r0 = 0.075
        x0, y0 = np.array([r0]), np.array([0.0])
        units = 3.0
        res = dm.DiskFlow(twist).advance(
            x0, y0, units, want_jac=True, want_action=True)
        rr = np.array([r0])
        w = float(prof.ratio(rr)[0])
        th = -w * units
        assert abs(res.x[0] - r0 * np.cos(th)) < 1e-10
        assert abs(res.y[0] - r0 * np.sin(th)) < 1e-10
        lag = float(prof.h(rr)[0] - 0.5 * r0 * prof.dh(rr)[0])
        assert abs(res.action[0] - units * lag) < 1e-12
        # tangent map R(th) (I + kap e_th e_u^T) with starting frame
        # e_u = (1, 0) and kap = -T u rho'(u)
        rho_p = float((prof.d2h(rr)[0] * r0 - prof.dh(rr)[0]) / r0 ** 2)
        kap = -units * r0 * rho_p
        cs, sn = np.cos(th), np.sin(th)
        want = np.array([[cs - sn * kap, -sn], [sn + cs * kap, cs]])
        got = np.array([[res.a[0], res.b[0]], [res.c[0], res.d[0]]])
        scale = max(1.0, abs(kap))
        assert np.max(np.abs(got - want)) < 1e-9 * scale
        assert abs(res.det()[0] - 1.0) < 1e-9
        # a positions-only run takes one chunk; the chunked product
        # telescopes to the same map, so the positions must coincide
        solo = dm.DiskFlow(twist).advance(x0, y0, units)
        assert abs(solo.x[0] - res.x[0]) < 1e-12
        assert abs(solo.y[0] - res.y[0]) < 1e-12
        # the stepped engine is the approximate route here and must converge
        # to the closed form (one unit keeps the dense run affordable)
        exact1 = dm.DiskFlow(twist).advance(
            x0, y0, 1.0, want_jac=True, want_action=True)
        stepped = dm.DiskFlow(twist, exact_legs=False, steps_per_unit=10000
                              ).advance(x0, y0, 1.0,
                                        want_jac=True, want_action=True)
        assert np.hypot(stepped.x[0] - exact1.x[0],
                        stepped.y[0] - exact1.y[0]) < 1e-6
        assert abs(stepped.action[0] - exact1.action[0]) < 1e-7
        for mine, theirs in ((exact1.a, stepped.a), (exact1.b, stepped.b),
                             (exact1.c, stepped.c), (exact1.d, stepped.d)):
            assert abs(mine[0] - theirs[0]) < 1e-3 * max(1.0, abs(kap) / 3.0)

    def test_decomposed_calabi_against_homomorphism_oracle(self):
        # Calabi adds under composition, and the twist factor's value has the
        # one-dimensional closed form 4 pi * integral of u g(u): integrate the
        # generating action sigma = g - u g'/2 over each support by parts.
        ham, dec, prof, _, S = _twist_setup()
        u = np.linspace(0.0, S, 4001)
        per_disk = 4.0 * np.pi * np.trapezoid(u * prof.h(u), u)
        want = B * np.pi ** 2 + 10 * per_disk
        res = dm.calabi(ham, decomposition=dec)
        assert res.excluded == 0
        assert abs(res.value - want) < res.uncertainty + 3e-3

    def test_decomposed_matches_plain_quadrature(self):
        ham, dec, _, _, _ = _twist_setup()
        plain = dm.calabi(ham, n_r=96, n_theta=96)
        split = dm.calabi(ham, decomposition=dec)
        assert abs(plain.value - split.value) < split.uncertainty + 5e-3

    def test_decomposed_ruelle_against_closed_form(self):
        # with exact legs the cores rotate rigidly: every core node winds at
        # exactly B + w_t turns per unit, where w_t is the core twist rate,
        # so each split term has a closed form
        ham, dec, prof, q, S = _twist_setup()
        w_t = float(-prof.d2h(np.zeros(1))[0]) / (2.0 * np.pi)
        split = dm.ruelle_diskmap(ham, k=4, decomposition=dec)
        assert split.excluded == 0
        assert abs(split.background - B * np.pi) < 1e-6
        assert abs(split.correction - 10 * w_t * np.pi * q * q) < 1e-9
        band_cf = 10 * 0.5 * w_t * np.pi * (S * S - q * q)
        assert abs(split.band - band_cf) < 0.05 * band_cf
        assert split.diagnostic < 0.01

    def test_decomposed_ruelle_matches_plain(self):
        # the full-grid route winds every node numerically; over the wide
        # test band its integral has the closed form
        # pi*B + count * (w_t pi q^2 + g(q)), since the band's winding-rate
        # integral telescopes to the profile value at the core edge
        ham, dec, prof, q, S = _twist_setup()
        w_t = float(-prof.d2h(np.zeros(1))[0]) / (2.0 * np.pi)
        true = B * np.pi + 10 * (w_t * np.pi * q * q
                                 + float(prof.h(np.array([q]))[0]))
        plain = dm.ruelle_diskmap(ham, k=4, n_r=32, n_theta=32)
        assert plain.excluded == 0
        assert abs(plain.value - true) < 0.1
        # the split's crude half-edge band estimate must cover its own error:
        # the deliberately wide band here makes that estimate poor, and the
        # reported uncertainty has to own the difference
        split = dm.ruelle_diskmap(ham, k=4, decomposition=dec)
        assert abs(plain.value - split.value) < split.uncertainty + 0.1


# ---------------------------------------------------------------------------
# periodic points


class TestPeriodicPoints:
    def test_rotation_flow_center_and_resonant_flood(self, rot_ham):
        report = dm.find_periodic_points(rot_ham, 10)
        assert len(report.points) == 1
        p = report.points[0]
        assert p.period == 1
        assert np.hypot(*p.point) < 1e-9
        assert abs(p.action - B * np.pi) < 1e-8
        assert abs(p.rotation - B) < 1e-8
        assert not p.degenerate
        # rotation by 11 full turns after ten iterations: the whole disk
        # returns, reported as one non-isolated family
        assert len(report.non_isolated) == 1
        fr = report.non_isolated[0]
        assert fr.period == 10
        assert fr.count > 400
        assert fr.unresolved == 0
        lo, hi = fr.rotation_range
        assert abs(lo - 11.0) < 1e-9 and abs(hi - 11.0) < 1e-9
        lo, hi = fr.action_range
        assert abs(lo - 10 * B * np.pi) < 1e-8
        assert abs(hi - 10 * B * np.pi) < 1e-8

    def test_identity_map_floods_at_period_one(self):
        ham0 = dm.RadialHamiltonian(dm.rotation_profile(0.0))
        report = dm.find_periodic_points(ham0, 3)
        assert len(report.points) == 0
        assert len(report.non_isolated) == 1
        fr = report.non_isolated[0]
        assert fr.period == 1
        assert fr.count > 500
        assert abs(fr.action_range[1]) < 1e-12
        with pytest.raises(NonIsolated):
            dm.find_periodic_points(ham0, 3, on_flood="raise")

    def test_quartic_center_fixed_point(self, quartic_ham):
        report = dm.find_periodic_points(quartic_ham, 1)
        assert len(report.points) == 1
        p = report.points[0]
        assert np.hypot(*p.point) < 1e-8
        assert abs(p.action - 1.0) < 1e-8
        w0 = dm.radial_rotation(quartic_ham.profile, 0.0)
        assert abs(p.rotation - w0) < 1e-6

    def test_iterates_collapse_to_minimal_period(self, rot_ham):
        report = dm.find_periodic_points(rot_ham, 2)
        assert len(report.non_isolated) == 0
        assert len(report.points) == 1
        assert report.points[0].period == 1


# ---------------------------------------------------------------------------
# validation helper


def test_validate_hamiltonian_passes_for_library_fields(random_ham, rot_ham):
    rep = dm.validate_hamiltonian(random_ham)
    assert rep["ok"]
    rep = dm.validate_hamiltonian(rot_ham)
    assert rep["ok"]
