from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klab.errors import DomainError, WindowError
from klab.model import ModelParams, regime_thresholds
from klab.singular import (
    DAGGER,
    DIAMOND,
    LayerFront,
    build_singular_orbit,
    c_hat,
    c_star,
    critical_manifold,
    front_profile,
    front_profile_dq,
    front_speed,
    pulse_length,
    singular_bifurcation_diagram,
    slow_flow_rhs,
    u_hat2,
    u_star,
    v_minus,
    v_pm,
    v_plus,
)
from oracles import shoot_front_speed, u_star_by_matching, v_pm_by_bracketing

GRID = [(b, m) for b in (0.2, 0.5, 0.6, 1.0, 2.0) for m in (0.3, 0.45, 1.0, 2.5)]


def params(ratio, b, m, eps=0.01):
    return ModelParams(a=ratio * m, b=b, m=m, eps=eps)


class TestClosedFormIdentities:
    @pytest.mark.parametrize("b,m", GRID)
    def test_diamond_speed_vanishes_at_loop_threshold(self, b, m):
        p = params(4.5 * b, b, m)
        assert abs(c_star(p.a, p)) < 1e-12

    @pytest.mark.parametrize("b,m", GRID)
    def test_u_star_equals_a_at_loop_threshold(self, b, m):
        p = params(4.5 * b, b, m)
        assert abs(u_star(p.a, p) - p.a) < 1e-12 * max(1.0, p.a)

    @pytest.mark.parametrize("b,m", GRID)
    def test_u_star_sits_on_fold_beyond_fold_jump(self, b, m):
        for r in (6.25 * b, 7.0 * b, 20.0 * b):
            p = params(r, b, m)
            assert u_star(p.a, p) == pytest.approx(4.0 * b * m, abs=1e-12)

    @pytest.mark.parametrize("b,m", GRID)
    def test_dagger_speed_at_fold(self, b, m):
        p = params(5.0, b, m)
        assert abs(front_speed(DAGGER, 4 * b * m, p) - math.sqrt(m / 2)) < 1e-12

    @pytest.mark.parametrize("b,m", GRID)
    def test_layer_equilibria_meet_at_fold(self, b, m):
        p = params(5.0, b, m)
        vm, vp = v_pm(4 * b * m, p)
        assert abs(vm - 1 / (2 * b)) < 1e-12 and abs(vp - 1 / (2 * b)) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(b=st.floats(0.05, 3.0), m=st.floats(0.05, 3.0))
    def test_identities_hold_for_random_parameters(self, b, m):
        p = params(4.5 * b, b, m)
        assert abs(c_star(p.a, p)) < 1e-12
        assert abs(u_star(p.a, p) - p.a) < 1e-12 * max(1.0, p.a)


class TestLayerFronts:
    @pytest.mark.parametrize("u,b,m", [(1.0, 0.5, 0.45), (2.0, 0.6, 0.5), (0.8, 1.0, 0.2)])
    def test_layer_equilibria_match_bracketing_oracle(self, u, b, m):
        p = params(5.0, b, m)
        vm, vp = v_pm(u, p)
        rm, rp = v_pm_by_bracketing(u, b, m)
        assert vm == pytest.approx(rm, rel=1e-12) and vp == pytest.approx(rp, rel=1e-12)

    def test_below_fold_there_are_no_layer_equilibria(self):
        p = params(5.0, 0.5, 0.45)
        assert v_pm(0.5 * 4 * 0.5 * 0.45, p) is None
        with pytest.raises(DomainError, match="4bm"):
            front_speed(DAGGER, 0.1, p)

    @pytest.mark.parametrize("kind,u", [(DAGGER, 1.3), (DIAMOND, 0.95)])
    def test_speed_matches_shooting_oracle(self, kind, u):
        b, m = 0.5, 0.45
        p = params(5.0, b, m)
        assert front_speed(kind, u, p) == pytest.approx(shoot_front_speed(kind, u, b, m), abs=1e-7)

    def test_dagger_and_diamond_speeds_are_opposite(self):
        p = params(5.0, 0.5, 0.45)
        assert front_speed(DAGGER, 1.4, p) == -front_speed(DIAMOND, 1.4, p)

    @pytest.mark.parametrize("kind", [DAGGER, DIAMOND])
    def test_explicit_profile_solves_layer_equation(self, kind):
        b, m, u = 0.6, 0.5, 1.3
        p = params(5.0, b, m)
        c = front_speed(kind, u, p)
        xi = np.linspace(-30, 30, 2001)
        v, q = front_profile(kind, u, p, xi)
        dq = front_profile_dq(kind, u, p, xi)
        res = dq - (m * v - (1 - b * v) * u * v * v - c * q)
        assert np.max(np.abs(res)) < 1e-12
        # q is the derivative of v
        assert np.max(np.abs(np.gradient(v, xi, edge_order=2) - q)) < 1e-3

    def test_profile_tails_keep_relative_accuracy(self):
        p = params(5.0, 0.6, 0.5)
        _, q = front_profile(DAGGER, 1.3, p, np.array([60.0, 80.0]))
        ratio = q[1] / q[0]
        k = float(v_plus(1.3, p)) * math.sqrt(1.3 * 0.6) / (2 * math.sqrt(2))
        assert ratio == pytest.approx(math.exp(-2 * k * 20.0), rel=1e-10)

    def test_layer_front_endpoints(self):
        p = params(5.0, 0.5, 0.45)
        f = LayerFront.at("†", 1.2, p)
        assert f.kind == DAGGER and f.start == (1.2, 0.0) and f.end == (1.2, f.v_plus)
        with pytest.raises(ValueError, match="unknown front kind"):
            LayerFront.at("star", 1.2, p)


class TestJumpLevels:
    @pytest.mark.parametrize("ratio", [2.3, 2.5, 2.8, 3.0])
    def test_u_star_matches_speed_matching_oracle(self, ratio):
        b, m = 0.5, 0.45
        p = params(ratio, b, m)
        assert u_star(p.a, p) == pytest.approx(u_star_by_matching(p.a, b, m), rel=1e-11)

    def test_u_star_rejects_below_loop_threshold(self):
        p = params(2.0, 0.5, 0.45)
        with pytest.raises(DomainError, match="9b/2"):
            u_star(p.a, p)

    def test_u_hat2_gives_matching_speeds(self):
        p = params(2.0 / 0.45, 0.5, 0.45)
        assert front_speed(DIAMOND, u_hat2(p.a, p), p) == pytest.approx(c_hat(p.a, p), abs=1e-12)

    def test_gap_speed_vanishes_at_gap_loop_threshold(self):
        b, m = 0.5, 0.45
        p = params(4.5 * b + 2 / b, b, m)
        assert abs(c_hat(p.a, p)) < 1e-10


class TestSlowFlow:
    def test_left_branch_relaxes_to_a(self):
        p = params(3.0, 0.5, 0.45)
        assert slow_flow_rhs("left", p.a, p) == 0.0
        assert slow_flow_rhs("left", p.a + 1, p) == 1.0

    def test_right_branch_undefined_below_fold(self):
        p = params(3.0, 0.5, 0.45)
        with pytest.raises(DomainError):
            slow_flow_rhs("right", 0.1, p)

    def test_critical_manifold_branches(self):
        p = params(3.0, 0.5, 0.45)
        left, mid, right = critical_manifold(p)
        u = np.linspace(0.9, 2.0, 5)
        assert np.all(left.v_of_u(u) == 0.0)
        assert np.all(mid.v_of_u(u) <= right.v_of_u(u))
        assert np.allclose(right.v_of_u(u), v_plus(u, p)) and np.allclose(mid.v_of_u(u), v_minus(u, p))


class TestSingularOrbits:
    def test_stripe_orbit_structure(self):
        p = ModelParams(a=1.2, b=0.5, m=0.45, eps=0.01)
        orb = build_singular_orbit("stripe", p)
        kinds = [type(s).__name__ for s in orb.segments]
        assert kinds == ["ManifoldSegment", "LayerFront", "ManifoldSegment", "LayerFront"]
        assert orb.speed == pytest.approx(c_star(1.2, p))
        assert [f.kind for f in orb.fronts()] == [DAGGER, DIAMOND]

    def test_stripe_window_rejection_names_threshold(self):
        with pytest.raises(WindowError) as exc:
            build_singular_orbit("stripe", ModelParams(a=0.9, b=0.5, m=0.45, eps=0.01))
        assert exc.value.threshold == "loop_stripe"
        with pytest.raises(WindowError) as exc:
            build_singular_orbit("stripe", ModelParams(a=1.45, b=0.5, m=0.45, eps=0.01))
        assert exc.value.threshold == "fold_jump"

    def test_gap_window(self):
        with pytest.raises(WindowError) as exc:
            build_singular_orbit("gap", ModelParams(a=3.0, b=0.5, m=0.45, eps=0.01))
        assert exc.value.threshold == "loop_gap"
        orb = build_singular_orbit("gap", ModelParams(a=2.0, b=0.5, m=0.45, eps=0.01))
        assert orb.speed > 0

    def test_fronts_need_vegetated_right_branch(self):
        with pytest.raises(WindowError, match="4b\\+1/b"):
            build_singular_orbit("front_vd", ModelParams(a=1.5, b=0.5, m=0.45, eps=0.01))

    def test_window_boundary_is_reported(self):
        b, m = 0.5, 0.45
        orb = build_singular_orbit("stripe", params(4.5 * b, b, m))
        assert orb.window_check["boundary"] == "loop_stripe"

    def test_pulse_length_shrinks_to_zero_at_loop(self):
        b, m = 0.5, 0.45
        assert abs(pulse_length("stripe", params(4.5 * b, b, m))) < 1e-12
        assert pulse_length("stripe", params(2.6, b, m)) > 0.0


class TestDiagram:
    def test_curves_start_on_thresholds(self):
        pts = singular_bifurcation_diagram(0.6, 0.5, n=60)
        th = regime_thresholds(0.6)
        stripe = [q for q in pts if q.family == "stripe"]
        assert stripe[0].a_over_m == pytest.approx(th.loop_stripe)
        assert stripe[0].window_flag == "lower_endpoint" and abs(stripe[0].c) < 1e-12
        assert stripe[-1].a_over_m < th.a_bar_hyp

    def test_every_family_present_and_speeds_finite(self):
        pts = singular_bifurcation_diagram(0.6, 0.5, n=80)
        assert {q.family for q in pts} == {"stripe", "gap", "front_dv", "front_vd"}
        assert all(math.isfinite(q.c) for q in pts)

    def test_front_curves_follow_singular_speeds(self):
        b, m = 0.6, 0.5
        for q in singular_bifurcation_diagram(b, m, n=40):
            p = params(q.a_over_m, b, m)
            ref = c_hat(p.a, p) if q.family in ("gap", "front_dv") else c_star(p.a, p)
            assert q.c == pytest.approx(ref, abs=1e-14)
