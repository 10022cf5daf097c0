from __future__ import annotations

import numpy as np
import pytest

from klab.errors import DomainError, WindowError
from klab.melnikov import critical_eig_prediction, melnikov_integrals, truncation_radius
from klab.model import ModelParams
from klab.singular import front_profile
from oracles import melnikov_adjoint


def p_for(b, m):
    return ModelParams(a=5.0 * m, b=b, m=m, eps=0.01)


ORACLE_CASES = [
    (kind, u_ratio, b, m)
    for kind in ("dagger", "diamond")
    for (u_ratio, b, m) in [(1.05, 0.6, 0.5), (1.8, 0.5, 0.45), (3.0, 0.2, 1.0), (1.3, 1.5, 0.3), (6.0, 0.9, 2.0)]
]


class TestAgainstAdjointOracle:
    @pytest.mark.parametrize("kind,u_ratio,b,m", ORACLE_CASES)
    def test_quadrature_matches_adjoint_integration(self, kind, u_ratio, b, m):
        p = p_for(b, m)
        u0 = u_ratio * 4 * b * m
        M = melnikov_integrals(kind, u0, p)
        Mc, Mu, mismatch = melnikov_adjoint(kind, u0, b, m, M.c0, lambda x: front_profile(kind, u0, p, x))
        assert mismatch < 1e-9, "adjoint pieces do not join"
        assert abs(M.M_c - Mc) < 1e-8, f"M_c {M.M_c} vs oracle {Mc}"
        assert abs(M.M_u - Mu) < 1e-8, f"M_u {M.M_u} vs oracle {Mu}"


class TestSignPattern:
    def test_signs_over_parameter_grid(self):
        for b in np.linspace(0.2, 2.0, 6):
            for r in np.linspace(1.05, 4.0, 6):
                p = p_for(b, 0.5)
                u0 = r * 4 * b * 0.5
                d = melnikov_integrals("dagger", u0, p)
                k = melnikov_integrals("diamond", u0, p)
                assert d.M_c > 0 and d.M_u > 0, f"dagger signs at b={b}, u0={u0}"
                assert k.M_c > 0 and k.M_u < 0, f"diamond signs at b={b}, u0={u0}"

    def test_reflection_symmetry_between_front_kinds(self):
        p = p_for(0.6, 0.5)
        d = melnikov_integrals("dagger", 1.7, p)
        k = melnikov_integrals("diamond", 1.7, p)
        assert k.M_c == pytest.approx(d.M_c, rel=1e-12)
        assert k.M_u == pytest.approx(-d.M_u, rel=1e-12)
        assert k.c0 == -d.c0


class TestTruncation:
    def test_radius_grows_as_weighted_decay_weakens(self):
        p = p_for(0.6, 0.5)
        fast = truncation_radius("dagger", 3.0, p)
        slow = truncation_radius("dagger", 1.21, p)
        assert slow > fast > 0

    def test_non_decaying_weight_is_rejected(self):
        p = p_for(0.6, 0.5)
        with pytest.raises(DomainError, match="does not decay"):
            truncation_radius("dagger", 1.3, p, c0=10.0)

    def test_requires_zero_diffusion(self):
        with pytest.raises(ValueError, match="D = 0"):
            melnikov_integrals("dagger", 1.3, p_for(0.6, 0.5).with_(D=1.0))


class TestCriticalEigenvaluePrediction:
    def test_stripe_value_at_reference_parameters(self):
        pred = critical_eig_prediction("stripe", ModelParams(a=1.61, b=0.6, m=0.5, eps=0.003))
        assert pred.lambda_c == pytest.approx(-0.0092058, abs=5e-7)
        assert pred.M_lambda > 0 and pred.M_eps > 0

    def test_prediction_is_linear_in_eps_and_shifted_by_ell_squared(self):
        p = ModelParams(a=1.61, b=0.6, m=0.5, eps=0.003)
        a = critical_eig_prediction("stripe", p)
        b = critical_eig_prediction("stripe", p.with_(eps=0.0015))
        assert b.lambda_c == pytest.approx(0.5 * a.lambda_c, rel=1e-12)
        c = critical_eig_prediction("stripe", p, ell=0.3)
        assert c.lambda_c == pytest.approx(a.lambda_c - 0.09, rel=1e-12)

    def test_gap_prediction_is_negative(self):
        pred = critical_eig_prediction("gap", ModelParams(a=2.0, b=0.5, m=0.45, eps=0.01))
        assert pred.lambda_c < 0

    def test_outside_window_raises(self):
        with pytest.raises(WindowError):
            critical_eig_prediction("stripe", ModelParams(a=0.5, b=0.6, m=0.5, eps=0.003))

    def test_fronts_have_no_prediction(self):
        with pytest.raises((ValueError, WindowError)):
            critical_eig_prediction("front_vd", ModelParams(a=3.0, b=0.5, m=0.45, eps=0.01))
