"""Two-stage construction: tapered twist profiles, geometric validation,
packing, closed predictions, and the lemma-verification report."""
import math

import numpy as np
import pytest

import reebru.diskmap as dm
from reebru import special
from reebru.errors import InfeasibleProfile, PackingInfeasible


def ring_family(n=10, ring=0.55, s=0.1, phase=0.5):
    """One rotation orbit of disks, centered mid-sector on a ring."""
    ang = 2.0 * np.pi * (np.arange(n) + phase) / n
    return tuple(special.Disk((ring * math.cos(a), ring * math.sin(a)), s)
                 for a in ang)


# ---------------------------------------------------------------------------
# twist profile


class TestTwistProfile:
    def test_zero_twist_vanishes_identically(self):
        prof = special.build_twist_profile(0.2, 0.02, 0.0)
        u = np.linspace(0.0, 0.25, 2001)
        assert np.max(np.abs(prof.g(u))) == 0.0
        assert np.max(np.abs(prof.dg(u))) == 0.0

    def test_core_matches_quadratic_closed_form(self):
        prof = special.build_twist_profile(0.2, 0.02, 1.0)
        assert abs(float(prof.g(0.0)) - np.pi * 0.04) < 1e-12
        u = np.linspace(0.0, 0.18, 1201)
        want = np.pi * (0.2 ** 2 - u ** 2)
        assert np.max(np.abs(prof.g(u) - want)) < 1e-12

    def test_slope_cap_binds_sharply(self):
        # the band must absorb the full core-edge value drop, which forces
        # the derivative to its cap on a plateau: the bound holds everywhere
        # and is achieved
        prof = special.build_twist_profile(0.2, 0.02, 1.0)
        cap = 2.0 * np.pi * 0.18
        u = np.linspace(0.0, 0.22, 10001)
        mx = float(np.max(np.abs(prof.dg(u))))
        assert mx <= cap * (1.0 + 1e-9)
        assert mx >= cap * (1.0 - 1e-6)

    def test_support_strictly_inside_outer_band(self):
        prof = special.build_twist_profile(0.2, 0.02, 1.0)
        assert prof.support_radius < 0.22
        u = np.linspace(prof.support_radius, 0.22, 301)
        assert np.max(np.abs(prof.g(u))) == 0.0
        assert abs(float(prof.g(0.99 * prof.support_radius))) > 0.0

    def test_monotone_for_either_sign(self):
        u = np.linspace(0.0, 0.22, 5001)
        pos = special.build_twist_profile(0.2, 0.02, 1.0)
        neg = special.build_twist_profile(0.2, 0.02, -0.7)
        assert np.max(pos.dg(u)) <= 1e-14
        assert np.min(neg.dg(u)) >= -1e-14

    def test_continuous_slope_at_core_edge(self):
        # the cap binds with equality at the seam, so the profile is C^1
        # there while the curvature jumps from -2 pi R to 0
        prof = special.build_twist_profile(0.2, 0.02, 1.0)
        eps = 1e-9
        lo = float(prof.dg(0.18 - eps))
        hi = float(prof.dg(0.18 + eps))
        assert abs(lo - hi) < 1e-7
        assert abs(float(prof.d2g(0.18 - eps)) + 2.0 * np.pi) < 1e-9
        assert abs(float(prof.d2g(0.18 + eps))) < 1e-9

    def test_infeasible_geometry_raises(self):
        with pytest.raises(InfeasibleProfile):
            special.build_twist_profile(0.08, 0.02, 1.0)   # s <= 4 delta
        with pytest.raises(InfeasibleProfile):
            special.build_twist_profile(0.2, 0.02, 1.0, mollifier_width=0.05)
        with pytest.raises(InfeasibleProfile):
            special.build_twist_profile(0.2, 0.02, 1.0, mollifier_width=0.0)
        with pytest.raises(InfeasibleProfile):
            special.build_twist_profile(0.2, -0.01, 1.0)

    def test_engine_rotates_core_rigidly(self):
        # inside the quadratic core the twist is an exact rigid rotation at
        # `twist` turns per unit: the transported frame's winding says so
        R = 0.5
        prof = special.build_twist_profile(0.2, 0.02, R)
        ham = dm.TwistHamiltonian(np.array([[0.0, 0.0]]),
                                  prof.to_radial_profile(), 0.22)
        res = dm.DiskFlow(ham).advance(
            np.array([0.09]), np.array([0.0]), 1.0,
            want_jac=True, want_action=True)
        th = 2.0 * np.pi * R
        assert abs(res.x[0] - 0.09 * np.cos(th)) < 1e-12
        assert abs(res.y[0] - 0.09 * np.sin(th)) < 1e-12
        assert abs(res.lifted[0] - R) < 1e-12
        # generating action of the rigid core: g - u g'/2 = pi R s^2
        assert abs(res.action[0] - np.pi * R * 0.04) < 1e-12


# ---------------------------------------------------------------------------
# validation


class TestValidateSetup:
    def params(self, **kw):
        defaults = dict(n=10, disks=ring_family(), delta=0.02, twist=0.5)
        defaults.update(kw)
        return special.SpecialParams(**defaults)

    def test_valid_family_passes_all_checks(self):
        rep = special.validate_setup(self.params())
        assert rep["ok"]
        assert all(c["ok"] for c in rep["checks"].values())

    def test_sector_straddling_flagged(self):
        rep = special.validate_setup(self.params(disks=ring_family(phase=0.0)))
        assert not rep["ok"]
        bad = rep["checks"]["sector_containment"]
        assert not bad["ok"] and 0 in bad["offending"]

    def test_missing_rotation_partner_flagged(self):
        fam = ring_family()
        rep = special.validate_setup(self.params(disks=fam[:3] + fam[4:]))
        assert not rep["ok"]
        assert rep["checks"]["symmetry"]["offending"]

    def test_close_pair_flagged_by_separation(self):
        # a second orbit radially 0.21 outward leaves a boundary gap of 0.01,
        # well under the required 2 * delta = 0.04
        fam = ring_family() + ring_family(ring=0.76)
        rep = special.validate_setup(self.params(disks=fam))
        assert not rep["ok"]
        off = rep["checks"]["separation"]["offending"]
        assert off and all(i != j for i, j in off)

    def test_wide_band_flagged_by_radius_ratio(self):
        rep = special.validate_setup(self.params(delta=0.03))
        assert not rep["ok"]
        assert rep["checks"]["radius_ratio"]["offending"]

    def test_small_n_flagged(self):
        rep = special.validate_setup(
            self.params(n=8, disks=ring_family(n=8)))
        assert not rep["ok"]
        assert not rep["checks"]["n_minimum"]["ok"]

    def test_boundary_crowding_flagged(self):
        rep = special.validate_setup(
            self.params(disks=ring_family(ring=0.89)))
        assert not rep["ok"]
        assert rep["checks"]["interior_clearance"]["offending"]

    def test_oversized_mollifier_flagged(self):
        rep = special.validate_setup(self.params(mollifier_width=0.05))
        assert not rep["ok"]
        assert not rep["checks"]["mollifier"]["ok"]


# ---------------------------------------------------------------------------
# construction


class TestBuildHamiltonian:
    def test_empty_family_is_pure_rotation(self):
        p = special.SpecialParams(n=10, disks=(), delta=0.02, twist=0.5)
        ham = special.build_special_hamiltonian(p)
        assert isinstance(ham, dm.RadialHamiltonian)
        rng = np.random.default_rng(3)
        r = 0.95 * np.sqrt(rng.uniform(0.0, 1.0, 64))
        t = rng.uniform(0.0, 2.0 * np.pi, 64)
        res = dm.DiskFlow(ham).advance(r * np.cos(t), r * np.sin(t), 1.0,
                                       want_action=True)
        assert np.max(np.abs(res.action - np.pi * 1.1)) < 1e-9

    def test_invalid_setup_raises_unless_unchecked(self):
        p = special.SpecialParams(n=10, disks=ring_family(phase=0.0),
                                  delta=0.02, twist=0.5)
        with pytest.raises(ValueError, match="sector_containment"):
            special.build_special_hamiltonian(p)
        assert special.build_special_hamiltonian(p, check=False) is not None

    def test_equal_radii_share_one_part(self):
        p = special.SpecialParams(
            n=10, disks=ring_family(s=0.06) + ring_family(ring=0.30, s=0.06),
            delta=0.01, twist=0.5)
        assert special.validate_setup(p)["ok"]
        ham = special.build_special_hamiltonian(p)
        assert len(ham.legs()) == 2          # rotation + one shared twist part

    def test_stage_flows_commute(self):
        # the rotation maps twist supports onto twist supports, so the two
        # stage orderings produce the same time-one map
        p = special.SpecialParams(n=10, disks=ring_family(), delta=0.02,
                                  twist=0.5)
        B = p.boundary_rate
        rot = dm.RadialHamiltonian(dm.rotation_profile(B),
                                   boundary_coefficient=B)
        prof = special.build_twist_profile(0.1, 0.02, 0.5)
        tw = dm.TwistHamiltonian(p.centers_array(), prof.to_radial_profile(),
                                 0.12)
        ab = dm.TimeConcatHamiltonian([rot, tw], boundary_coefficient=B)
        ba = dm.TimeConcatHamiltonian([tw, rot], boundary_coefficient=B)
        rng = np.random.default_rng(11)
        r = 0.95 * np.sqrt(rng.uniform(0.0, 1.0, 200))
        t = rng.uniform(0.0, 2.0 * np.pi, 200)
        x, y = r * np.cos(t), r * np.sin(t)
        fa = dm.DiskFlow(ab).advance(x, y, 1.0)
        fb = dm.DiskFlow(ba).advance(x, y, 1.0)
        assert np.max(np.hypot(fa.x - fb.x, fa.y - fb.y)) < 1e-7


# ---------------------------------------------------------------------------
# packing


class TestPacking:
    def test_reaches_target_and_validates(self):
        disks = special.pack_sector_rings(10, delta=0.02, target_area=0.28)
        p = special.SpecialParams(n=10, disks=disks, delta=0.02, twist=0.5)
        assert p.total_disk_area >= 0.28
        assert len(disks) % 10 == 0
        assert special.validate_setup(p)["ok"]

    def test_deterministic(self):
        a = special.pack_sector_rings(12, delta=0.015, target_area=0.2)
        b = special.pack_sector_rings(12, delta=0.015, target_area=0.2)
        assert [d.center for d in a] == [d.center for d in b]
        assert [d.radius for d in a] == [d.radius for d in b]

    def test_impossible_area_raises(self):
        with pytest.raises(PackingInfeasible):
            special.pack_sector_rings(10, delta=0.02, target_area=3.0)

    def test_zero_area_is_empty(self):
        assert special.pack_sector_rings(10, delta=0.02, target_area=0.0) == []

    def test_incompatible_radius_raises(self):
        with pytest.raises(PackingInfeasible):
            special.pack_sector_rings(10, delta=0.02, target_area=0.1,
                                      radius=0.07)


# ---------------------------------------------------------------------------
# closed predictions and serialization


class TestPredictions:
    def test_invariant_formulas(self):
        # a family with total area pi - 0.05 at n = 20, coefficient -1.95:
        # the background contributes pi (n+1)/n and the twists R * area
        s = math.sqrt((np.pi - 0.05) / (20.0 * np.pi))
        p = special.SpecialParams(n=20, disks=ring_family(n=20, s=s),
                                  delta=0.001, twist=-1.95)
        assert abs(p.total_disk_area - (np.pi - 0.05)) < 1e-12
        want = np.pi * 1.05 - 1.95 * (np.pi - 0.05)
        assert abs(special.predicted_ruelle(p) - want) < 1e-12
        assert abs(want + 2.7299) < 1e-4
        want_cal = (np.pi ** 2 * 1.05
                    - 1.95 * 20.0 * (np.pi * s * s) ** 2)
        assert abs(special.predicted_calabi(p) - want_cal) < 1e-12

    def test_pointwise_predictions_mask_cores(self):
        p = special.SpecialParams(n=10, disks=ring_family(), delta=0.02,
                                  twist=0.5)
        c = p.disks[0].center
        x = np.array([c[0], c[0] + 0.09, 0.0])
        y = np.array([c[1], c[1], 0.0])
        rho = special.predicted_rotation(p, x, y)
        sig = special.predicted_action(p, x, y)
        assert np.allclose(rho, [1.6, 1.1, 1.1], atol=1e-12)
        area = np.pi * 0.01
        assert np.allclose(
            sig, [np.pi * 1.1 + 0.5 * area, np.pi * 1.1, np.pi * 1.1],
            atol=1e-12)
        edge = special.near_mollified_edge(p, x, y)
        assert list(edge) == [False, True, False]

    def test_config_roundtrip(self):
        p = special.SpecialParams(n=12, disks=ring_family(n=12, s=0.08),
                                  delta=0.015, twist=-0.3,
                                  mollifier_width=0.01)
        q = special.SpecialParams.from_config(p.to_config())
        assert q == p

    def test_config_packing_key(self):
        cfg = {"n": 10, "delta": 0.02, "R": 0.5,
               "packing": {"target_area": 0.28}}
        p = special.SpecialParams.from_config(cfg)
        want = special.pack_sector_rings(10, delta=0.02, target_area=0.28)
        assert p.disks == tuple(want)
        empty = special.SpecialParams.from_config(
            {"n": 10, "delta": 0.02, "R": 0.5})
        assert empty.disks == ()


# ---------------------------------------------------------------------------
# lemma verification


@pytest.fixture(scope="module")
def packed_report():
    disks = special.pack_sector_rings(10, delta=0.02, target_area=0.28)
    p = special.SpecialParams(n=10, disks=disks, delta=0.02, twist=0.5)
    return p, special.verify_special_lemmas(p, k=8, samples=400, seed=0)


class TestLemmaVerification:
    def test_action_matches_prediction_off_bands(self, packed_report):
        p, rep = packed_report
        assert rep.sigma_max_dev <= max(1e-3, 2.0 * p.max_diameter)

    def test_rotation_matches_prediction_off_bands(self, packed_report):
        _, rep = packed_report
        assert rep.rotation_max_dev <= 5e-3

    def test_periodic_actions_exceed_pi(self, packed_report):
        _, rep = packed_report
        assert rep.period_bound == 30
        assert rep.min_action is not None
        assert rep.min_action >= np.pi - 1e-6
        assert rep.action_bound_ok

    def test_rotation_plus_period_exceeds_one(self, packed_report):
        _, rep = packed_report
        assert rep.min_rotation_plus_period > 1.0
        assert rep.rotation_period_bound_ok

    def test_flood_families_carry_predicted_invariants(self, packed_report):
        # closing up needs the rotation's n-th iterate, so flood families sit
        # at period n with rotation L*B off the cores and L*B + n*R on them
        p, rep = packed_report
        floods = rep.periodic.non_isolated
        assert floods
        for fr in floods:
            assert fr.period == p.n
            want = {p.n * p.boundary_rate,
                    p.n * p.boundary_rate + p.n * p.twist}
            for r in fr.rotations:
                assert min(abs(r - w) for w in want) < 1e-6
            assert fr.action_range[0] >= np.pi - 1e-6

    def test_origin_is_isolated_fixed_point(self, packed_report):
        p, rep = packed_report
        pts = [pt for pt in rep.periodic.points if pt.period == 1]
        assert pts
        pt = min(pts, key=lambda q: np.hypot(*q.point))
        assert np.hypot(*pt.point) < 1e-9
        assert abs(pt.rotation - p.boundary_rate) < 1e-9
        assert abs(pt.action - np.pi * p.boundary_rate) < 1e-9

    def test_error_constant_stable_under_halving(self):
        # the prediction error is O(d(U)): halving every disk radius (same
        # centers) should keep the fitted constant within twenty percent
        base = dict(n=10, twist=0.5)
        pa = special.SpecialParams(disks=ring_family(s=0.1), delta=0.02,
                                   **base)
        pb = special.SpecialParams(disks=ring_family(s=0.05), delta=0.01,
                                   **base)
        ra = special.verify_special_lemmas(pa, k=2, samples=800, seed=1,
                                           period_bound=0)
        rb = special.verify_special_lemmas(pb, k=2, samples=800, seed=1,
                                           period_bound=0)
        assert ra.fitted_constant is not None
        assert rb.fitted_constant is not None
        ratio = rb.fitted_constant / ra.fitted_constant
        assert abs(ratio - 1.0) <= 0.2


class TestNegativeTwist:
    def n20(self):
        disks = special.pack_sector_rings(20, delta=0.01, target_area=0.5)
        return special.SpecialParams(n=20, disks=disks, delta=0.01,
                                     twist=-1.95)

    def test_action_positive_on_grid(self):
        # one-step generating action stays positive for twist > -2
        p = self.n20()
        assert special.validate_setup(p)["ok"]
        ham = special.build_special_hamiltonian(p)
        g = np.linspace(-0.995, 0.995, 256)
        xx, yy = np.meshgrid(g, g)
        keep = np.hypot(xx, yy) <= 0.995
        x, y = xx[keep], yy[keep]
        res = dm.DiskFlow(ham).advance(x, y, 1.0, want_action=True)
        assert float(np.min(res.action)) > 0.0

    def test_rotation_bracketed_by_twist_range(self):
        # k-step averages live between B + min(0, R) and B + max(0, R)
        p = self.n20()
        ham = special.build_special_hamiltonian(p)
        rng = np.random.default_rng(7)
        r = 0.97 * np.sqrt(rng.uniform(0.0, 1.0, 300))
        t = rng.uniform(0.0, 2.0 * np.pi, 300)
        x, y = r * np.cos(t), r * np.sin(t)
        k = 32.0                       # endpoint wobble decays O(1/k)
        res = dm.DiskFlow(ham).advance(x, y, k, want_jac=True)
        rk = res.lifted / k
        B = p.boundary_rate
        assert float(np.min(rk)) >= B + p.twist - 5e-3
        assert float(np.max(rk)) <= B + 5e-3


class TestRotationAverages:
    def _doubling_diffs(self, ham, x, y):
        taken = {}

        def keep(m, st):
            if m in (1, 2, 4, 8, 16):
                taken[m] = st.lifted.copy()

        dm.DiskFlow(ham).advance(x, y, 16.0, want_jac=True, unit_callback=keep)
        r = {m: lift / m for m, lift in taken.items()}
        return np.stack([np.abs(r[2] - r[1]), np.abs(r[4] - r[2]),
                         np.abs(r[8] - r[4]), np.abs(r[16] - r[8])])

    def test_doubling_differences_mostly_shrink(self):
        # k-step averages converge O(1/k), so the doubling differences
        # |r_2k - r_k| shrink at almost every point; a small fraction of
        # non-monotone pairs is tolerated (the frame's endpoint angle can
        # flip branch once, which bumps a single difference)
        p = special.SpecialParams(n=10, disks=ring_family(), delta=0.02,
                                  twist=0.2)
        ham = special.build_special_hamiltonian(p)
        rng = np.random.default_rng(5)
        r = 0.97 * np.sqrt(rng.uniform(0.0, 1.0, 400))
        t = rng.uniform(0.0, 2.0 * np.pi, 400)
        diffs = self._doubling_diffs(ham, r * np.cos(t), r * np.sin(t))
        grew = diffs[1:] > diffs[:-1] + 1e-12
        assert grew.mean() <= 0.10

    def test_band_ring_obeys_decay_envelope(self):
        # on a ring crossing the taper band the endpoint wobble is at most
        # half a turn, so |r_2k - r_k| <= 0.5/k + 0.5/(2k); check the k = 8
        # pair against that envelope and the overall shrink of the maxima
        p = special.SpecialParams(n=10, disks=ring_family(), delta=0.02,
                                  twist=0.2)
        ham = special.build_special_hamiltonian(p)
        c = p.disks[0].center
        uu = 0.08 + 0.04 * np.linspace(0.1, 0.9, 16)
        ang = np.array([0.3, 2.1, 4.4])
        x = (c[0] + uu[:, None] * np.cos(ang)[None, :]).ravel()
        y = (c[1] + uu[:, None] * np.sin(ang)[None, :]).ravel()
        diffs = self._doubling_diffs(ham, x, y)
        assert float(np.max(diffs[3])) <= 0.5 / 8 + 0.5 / 16 + 1e-9
        assert float(np.max(diffs[3])) < float(np.max(diffs[1]))
