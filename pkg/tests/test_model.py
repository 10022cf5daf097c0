from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klab.model import (
    DESERT,
    VEGETATED,
    VEGETATED_UNSTABLE,
    ModelParams,
    homogeneous_stability,
    jacobian,
    reaction_terms,
    regime_thresholds,
    uniform_steady_states,
    vegetated_state,
)
from oracles import steady_states_by_roots


class TestModelParams:
    def test_rejects_nonpositive_rates(self):
        for bad in (dict(a=0.0), dict(b=-1.0), dict(m=0.0)):
            kw = dict(a=1.0, b=0.5, m=0.45, eps=0.01) | bad
            with pytest.raises(ValueError):
                ModelParams(**kw)

    def test_eps_must_be_small_and_positive(self):
        with pytest.raises(ValueError, match="eps"):
            ModelParams(a=1.0, b=0.5, m=0.45, eps=0.0)
        with pytest.raises(ValueError, match="eps"):
            ModelParams(a=1.0, b=0.5, m=0.45, eps=1.5)

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="finite"):
            ModelParams(a=float("nan"), b=0.5, m=0.45, eps=0.01)

    def test_with_returns_modified_copy(self):
        p = ModelParams(a=1.0, b=0.5, m=0.45, eps=0.01)
        q = p.with_(a=2.0)
        assert q.a == 2.0 and p.a == 1.0
        assert q.a_over_m == pytest.approx(2.0 / 0.45)


class TestSteadyStates:
    def test_three_states_at_gap_parameters(self):
        p = ModelParams(a=2.0, b=0.5, m=0.45, eps=0.01)
        states = uniform_steady_states(p)
        assert [s.kind for s in states] == [DESERT, VEGETATED_UNSTABLE, VEGETATED]
        assert states[0].u == 2.0 and states[0].v == 0.0

    def test_match_polynomial_root_oracle(self):
        for a, b, m in [(2.0, 0.5, 0.45), (1.61, 0.6, 0.5), (5.0, 0.2, 1.0), (3.0, 1.2, 0.3)]:
            p = ModelParams(a=a, b=b, m=m, eps=0.01)
            veg = [(s.u, s.v) for s in uniform_steady_states(p) if s.kind != DESERT]
            ref = steady_states_by_roots(a, b, m)
            assert len(veg) == len(ref), f"state count differs at a={a}, b={b}, m={m}"
            for (u, v), (ur, vr) in zip(veg, ref):
                assert u == pytest.approx(ur, rel=1e-11) and v == pytest.approx(vr, rel=1e-11)

    @settings(max_examples=200, deadline=None)
    @given(
        b=st.floats(0.05, 3.0),
        m=st.floats(0.05, 3.0),
        ratio=st.floats(0.1, 30.0),
    )
    def test_returned_states_are_equilibria(self, b, m, ratio):
        p = ModelParams(a=ratio * m, b=b, m=m, eps=0.01)
        for s in uniform_steady_states(p):
            du, dv = reaction_terms(s.u, s.v, p)
            scale = max(1.0, p.a, p.m)
            assert abs(du) < 1e-12 * scale and abs(dv) < 1e-12 * scale, f"residual {du}, {dv} for {s}"

    def test_no_vegetation_below_existence_onset(self):
        b, m = 0.5, 0.45
        onset = regime_thresholds(b, m).existence_onset
        p = ModelParams(a=0.99 * onset * m, b=b, m=m, eps=0.01)
        assert [s.kind for s in uniform_steady_states(p)] == [DESERT]
        with pytest.raises(ValueError, match="no vegetated"):
            vegetated_state(p)

    def test_pair_coincides_at_existence_onset(self):
        b, m = 0.5, 0.45
        onset = 2.0 * (b + math.sqrt(1.0 + b * b))
        states = uniform_steady_states(ModelParams(a=onset * m, b=b, m=m, eps=0.01))
        assert len(states) == 2 and states[1].degenerate
        assert states[1].v == pytest.approx(onset / (2.0 * (1.0 + onset * b)), rel=1e-12)


class TestHomogeneousStability:
    def test_desert_always_stable(self):
        p = ModelParams(a=2.0, b=0.5, m=0.45, eps=0.01)
        tr, det, stable = homogeneous_stability(uniform_steady_states(p)[0], p)
        assert stable and tr == pytest.approx(-1.45) and det == pytest.approx(0.45)

    def test_middle_state_is_a_saddle(self):
        p = ModelParams(a=2.0, b=0.5, m=0.45, eps=0.01)
        mid = uniform_steady_states(p)[1]
        res = homogeneous_stability(mid, p)
        assert res.det < 0 and not res.stable

    def test_closed_form_determinant_matches_jacobian(self):
        for a in (1.2, 2.0, 3.0, 6.0):
            p = ModelParams(a=a, b=0.5, m=0.45, eps=0.01)
            for s in uniform_steady_states(p)[1:]:
                res = homogeneous_stability(s, p)
                assert res.det == pytest.approx(np.linalg.det(jacobian(s.u, s.v, p)), rel=1e-9, abs=1e-12)

    def test_upper_state_stable_at_gap_parameters(self):
        p = ModelParams(a=2.0, b=0.5, m=0.45, eps=0.01)
        assert homogeneous_stability(vegetated_state(p), p).stable


class TestThresholds:
    def test_ordering_for_small_b(self):
        th = regime_thresholds(0.5)
        assert th.loop_stripe < th.fold_jump < th.canard < th.loop_gap
        assert th.a_bar == th.canard and th.a_bar_hyp == th.fold_jump

    def test_large_b_uses_the_blocking_threshold(self):
        th = regime_thresholds(1.0)
        assert th.a_bar == th.a_bar_hyp == th.a_bar_dh

    def test_thresholds_independent_of_m(self):
        assert regime_thresholds(0.6, 0.5) == regime_thresholds(0.6, 2.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            regime_thresholds(0.0)
