import numpy as np
import pytest

from accessprice import dynamics
from accessprice.dynamics import NORMAL, competitive_mode, final_states
from accessprice.equilibria import find_fixed_points
from accessprice.regions import (
    RegionSpec,
    build_cuboid,
    build_polygon,
    check_invariance,
    default_cuboid_params,
    eta1,
    eta1_inverse,
    eta2,
    eta3,
    halfspaces,
    phase_grid,
    q_dagger,
    r_dagger,
)


class TestEtaCurves:
    def test_eta1_hand_values(self, ref_cfg):
        assert eta1(ref_cfg, 0.0) == 0.0
        assert eta1(ref_cfg, 70.0) == pytest.approx(58.333333333333336, rel=1e-12)

    def test_eta2_hand_values(self, ref_cfg):
        assert eta2(ref_cfg, 0.0) == pytest.approx(18.91891891891892, rel=1e-12)
        assert eta2(ref_cfg, 70.0) == pytest.approx(56.0, rel=1e-9)

    def test_eta3_shift(self, ref_cfg):
        assert eta3(ref_cfg, 50.0, 10.0) == pytest.approx(
            eta1(ref_cfg, 50.0) - 10.0, rel=1e-12
        )

    def test_domain_error_beyond_qmax(self, ref_cfg):
        with pytest.raises(ValueError):
            eta1(ref_cfg, 93.0)
        with pytest.raises(ValueError):
            eta2(ref_cfg, 92.5)

    def test_eta1_strictly_increasing(self, ref_cfg):
        qs = np.linspace(1e-6, 92.4, 1000)
        vals = eta1(ref_cfg, qs)
        assert np.all(np.diff(vals) > 0)

    def test_eta2_increasing_beyond_peak(self, ref_cfg):
        qs = np.linspace(45.0, 92.4, 1000)
        vals = eta2(ref_cfg, qs)
        assert np.all(np.diff(vals) > 0)

    def test_sign_pattern_between_nullclines(self, ref_cfg):
        # eta1 < eta2 before q1*, eta2 < eta1 between the equilibria,
        # eta1 < eta2 beyond q2*
        for lo, hi, first_below in [
            (1e-3, 40.0 - 1e-6, True),
            (40.0 + 1e-6, 82.0 - 1e-6, False),
            (82.0 + 1e-6, 92.4, True),
        ]:
            qs = np.linspace(lo, hi, 400)
            e1, e2 = eta1(ref_cfg, qs), eta2(ref_cfg, qs)
            if first_below:
                assert np.all(e1 < e2)
            else:
                assert np.all(e2 < e1)


class TestDaggers:
    def test_r_dagger_value(self, ref_cfg):
        # alpha + f is decreasing on [0, q_m], so the max sits at q_m
        assert r_dagger(ref_cfg) == pytest.approx(26.046511627906977, abs=1e-6)

    def test_q_dagger_value(self, ref_cfg):
        assert q_dagger(ref_cfg) == pytest.approx(42.109375, abs=1e-6)

    def test_dagger_lower_bound(self, ref_cfg):
        # R_dagger >= max(K_R/alpha(0), R1*)
        fps = find_fixed_points(ref_cfg, "normal")
        bound = max(ref_cfg.k_r / 0.21142857142857144, fps[0].r_star)
        assert r_dagger(ref_cfg) >= bound - 1e-12

    def test_interior_maximum_found(self, competitive_cfg):
        # for this admission the max of eta2 on [0, q_m] sits at q = 0
        assert r_dagger(competitive_cfg) == pytest.approx(
            eta2(competitive_cfg, 0.0), rel=1e-9
        )

    def test_eta1_inverse_roundtrip(self, ref_cfg):
        for r in (5.0, 26.05, 58.0):
            q = eta1_inverse(ref_cfg, r)
            assert eta1(ref_cfg, q) == pytest.approx(r, rel=1e-9)


class TestBuildPolygon:
    def test_reference_vertices(self, ref_cfg):
        poly = build_polygon(ref_cfg, 70.0, 58.0)
        A, B, C, D, E = poly.vertices
        assert A == (0.0, 0.0)
        assert B == (0.0, 70.0)
        assert C[0] == pytest.approx(56.0, rel=1e-9) and C[1] == 70.0
        assert D[0] == 58.0
        assert D[1] == pytest.approx(69.87068965517241, abs=1e-6)
        assert E == (58.0, 0.0)

    def test_counterclockwise_in_q_r_plane(self, ref_cfg):
        poly = build_polygon(ref_cfg, 70.0, 58.0)
        pts = [(q, r) for r, q in poly.vertices]
        area = sum(
            pts[i][0] * pts[(i + 1) % 5][1] - pts[(i + 1) % 5][0] * pts[i][1]
            for i in range(5)
        )
        assert area > 0

    def test_q_choice_interval_open(self, ref_cfg):
        with pytest.raises(ValueError, match="q_choice"):
            build_polygon(ref_cfg, 82.0, 58.0)
        with pytest.raises(ValueError, match="q_choice"):
            build_polygon(ref_cfg, 42.0, 58.0)

    def test_r_choice_right_endpoint_closed(self, ref_cfg):
        hi = eta1(ref_cfg, 70.0)
        poly = build_polygon(ref_cfg, 70.0, hi)
        assert poly.vertices[3][0] == hi
        with pytest.raises(ValueError, match="r_choice"):
            build_polygon(ref_cfg, 70.0, hi + 1e-9)

    def test_r_choice_lower_bound_open(self, ref_cfg):
        with pytest.raises(ValueError, match="r_choice"):
            build_polygon(ref_cfg, 70.0, 55.9)
        with pytest.raises(ValueError, match="r_choice"):
            build_polygon(ref_cfg, 70.0, eta2(ref_cfg, 70.0))

    def test_default_midpoints(self, ref_cfg):
        poly = build_polygon(ref_cfg)
        assert poly.vertices[1][1] == pytest.approx((42.109375 + 82.0) / 2, abs=1e-4)


class TestCheckInvariance:
    def test_reference_polygon_passes(self, ref_cfg):
        poly = build_polygon(ref_cfg, 70.0, 58.0)
        rep = check_invariance(ref_cfg, poly, NORMAL, 200)
        assert rep.passed
        cd = next(f for f in rep.faces if f.name == "CD")
        assert cd.worst < 0

    def test_invalid_polygon_fails_on_cd(self, ref_cfg):
        # r beyond eta1(q_choice): part of CD sits where qdot > 0
        bad = RegionSpec(
            kind="polygon2d",
            vertices=(
                (0.0, 0.0),
                (0.0, 70.0),
                (56.0, 70.0),
                (59.0, 69.9),
                (59.0, 0.0),
            ),
        )
        rep = check_invariance(ref_cfg, bad, NORMAL, 500)
        assert not rep.passed
        cd = next(f for f in rep.faces if f.name == "CD")
        assert not cd.passed

    def test_zero_samples_vacuous(self, ref_cfg):
        poly = build_polygon(ref_cfg, 70.0, 58.0)
        rep = check_invariance(ref_cfg, poly, NORMAL, 0)
        assert rep.passed
        assert "vacuous" in rep.warning

    def test_trap_probe(self, ref_cfg):
        # a region that passes the boundary check really traps the flow
        poly = build_polygon(ref_cfg, 70.0, 58.0)
        assert check_invariance(ref_cfg, poly, NORMAL, 200).passed
        A, b = halfspaces(poly)
        rng = np.random.default_rng(12)
        starts = []
        while len(starts) < 50:
            cand = np.array([rng.uniform(0, 58), rng.uniform(0, 70), 0.0])
            if np.all(A @ cand - b < -1e-3):
                starts.append(cand)
        res = final_states(
            ref_cfg, NORMAL, np.array(starts), 0.0, 5000.0, 0.05, region=(A, b)
        )
        assert np.all(res.region_excess < 1e-6)
        # Theorem-1 conclusion: everything trapped lands on x1*
        assert np.max(np.abs(res.states[:, :2] - [25.0, 40.0])) < 1e-3


class TestBuildCuboid:
    def test_defaults_pass_invariance(self, competitive_cfg):
        cub = build_cuboid(competitive_cfg, k_u=1.0)
        rep = check_invariance(competitive_cfg, cub, competitive_mode(1.0), 200)
        assert rep.passed
        assert len(rep.faces) == 6

    def test_u_hat_lower_bound_open(self, competitive_cfg):
        q_hat, u_hat, r_hat = default_cuboid_params(competitive_cfg, 1.0)
        from accessprice.model import eval_admission

        lower = 1.0 / eval_admission(competitive_cfg.admission, q_hat)
        with pytest.raises(ValueError, match="u_hat"):
            build_cuboid(competitive_cfg, q_hat, lower, r_hat, k_u=1.0)

    def test_r_hat_interval(self, competitive_cfg):
        q_hat, u_hat, _ = default_cuboid_params(competitive_cfg, 1.0)
        with pytest.raises(ValueError, match="r_hat"):
            build_cuboid(
                competitive_cfg, q_hat, u_hat, eta2(competitive_cfg, q_hat), k_u=1.0
            )

    def test_zero_load_degenerates_gracefully(self, competitive_cfg):
        cub = build_cuboid(competitive_cfg, k_u=0.0)
        rep = check_invariance(competitive_cfg, cub, competitive_mode(0.0), 150)
        assert rep.passed
        u_face = next(f for f in rep.faces if f.name == "U=u_hat")
        assert u_face.worst <= 0


class TestPhaseGrid:
    def test_zero_magnitude_only_near_fixed_points(self, ref_cfg):
        grid = phase_grid(ref_cfg, NORMAL, (0.0, 150.0), (0.0, 92.0), 50)
        fps = np.array([[fp.r_star, fp.q_star] for fp in grid.fixed_points])
        cell = max(150.0 / 50, 92.0 / 50)
        small = np.argwhere(grid.magnitude < 1e-9)
        for i, j in small:
            point = np.array([grid.r[i], grid.q[j]])
            assert np.min(np.linalg.norm(fps - point, axis=1)) < cell

    def test_single_cell_at_center(self, ref_cfg):
        grid = phase_grid(ref_cfg, NORMAL, (0.0, 150.0), (0.0, 100.0), 1)
        assert grid.r[0] == 75.0 and grid.q[0] == 50.0
        assert grid.dr.shape == (1, 1)

    def test_origin_derivative(self, ref_cfg):
        d = dynamics.rhs(ref_cfg, NORMAL, 0.0, (0.0, 0.0, 0.0))
        assert d[0] == ref_cfg.k_r and d[1] == 0.0

    def test_overlays_present(self, ref_cfg):
        grid = phase_grid(ref_cfg, NORMAL, (0.0, 150.0), (0.0, 92.0), 10)
        assert len(grid.eta1_curve) > 0 and len(grid.eta2_curve) > 0
        assert len(grid.fixed_points) == 2

    def test_bad_resolution(self, ref_cfg):
        with pytest.raises(ValueError):
            phase_grid(ref_cfg, NORMAL, (0.0, 150.0), (0.0, 92.0), 0)
