from __future__ import annotations

import numpy as np
import pytest

from klab.errors import DomainError
from klab.model import ModelParams, vegetated_state
from klab.spectrum import (
    LinearizedOperator,
    SearchRegion,
    critical_eigenvalues,
    essential_boundary,
    point_spectrum,
    transverse_scan,
    vegetated_bound,
    vegetated_dispersion,
    wave_essential_rightmost,
)
from oracles import essential_lambdas_by_det, essential_rightmost_by_sampling

FIG9 = dict(b=0.5, m=0.45, eps=0.01)


class TestDesertEssentialSpectrum:
    @pytest.mark.parametrize("ell", [0.0, 0.3, 0.7, 1.5])
    @pytest.mark.parametrize("m", [0.2, 0.45, 2.0])
    def test_rightmost_point_is_exact(self, ell, m):
        p = ModelParams(a=1.2, b=0.5, m=m, eps=0.01)
        eb = essential_boundary("desert", p, 0.25, ell)
        assert eb.rightmost == -min(m + ell * ell, 1.0)
        re = max(np.max(c.real) for c in eb.curves.values())
        assert re == pytest.approx(eb.rightmost, abs=1e-15)

    def test_curves_are_line_and_parabola(self):
        p = ModelParams(a=1.2, **FIG9)
        eb = essential_boundary("desert", p, 0.25)
        assert np.all(eb.curves["line"].real == -1.0)
        k = eb.samples
        assert np.allclose(eb.curves["parabola"].real, -0.45 - k * k)


class TestVegetatedEssentialSpectrum:
    @pytest.mark.parametrize("a,c,ell", [(2.0, 0.3, 0.0), (2.0, 0.3, 0.5), (3.0, -0.09, 0.0)])
    def test_roots_match_determinant_oracle(self, a, c, ell):
        p = ModelParams(a=a, **FIG9)
        s = vegetated_state(p)
        nu = np.linspace(-200.0, 200.0, 401)
        lib = vegetated_dispersion(nu, p, c, ell)
        for k, x in enumerate(nu):
            ref = essential_lambdas_by_det(x, s.u, s.v, p.a, p.b, p.m, p.eps, c, ell)
            for lam in lib[k]:
                assert np.min(np.abs(ref - lam)) < 1e-9 * max(1.0, abs(lam)), f"nu = {x}"

    @pytest.mark.parametrize("a,c,ell", [(2.0, 0.3, 0.0), (3.0, -0.09, 0.4)])
    def test_rightmost_matches_dense_sampling(self, a, c, ell):
        p = ModelParams(a=a, **FIG9)
        s = vegetated_state(p)
        eb = essential_boundary("vegetated", p, c, ell)
        ref = essential_rightmost_by_sampling(s.u, s.v, p.a, p.b, p.m, p.eps, c, ell, n=8001)
        assert eb.rightmost == pytest.approx(ref, abs=1e-8)
        assert eb.rightmost < 0
        assert eb.rightmost <= eb.bound + 1e-12

    def test_bound_formula(self):
        p = ModelParams(a=2.0, **FIG9)
        s = vegetated_state(p)
        mu_v = p.m - (2.0 - 3.0 * p.b * s.v) * s.u * s.v  # minus the v-diagonal kinetic entry
        for ell in (0.0, 0.5, 2.0):
            ref = -min(1.0 + 1.0 / (4.0 * p.b**2), mu_v + ell * ell)
            assert vegetated_bound(p, ell) == pytest.approx(ref, rel=1e-12)

    def test_requires_vegetated_state_on_right_branch(self):
        with pytest.raises(DomainError, match="4b"):
            essential_boundary("vegetated", ModelParams(a=1.2, **FIG9), 0.25)

    def test_wave_rightmost_takes_worst_far_field(self):
        p = ModelParams(a=3.0, **FIG9)
        val = wave_essential_rightmost("front_dv", p, -0.09)
        assert val == pytest.approx(max(-min(0.45, 1.0), essential_boundary("vegetated", p, -0.09).rightmost),
                                    abs=1e-6)


class TestOperator:
    def test_translation_mode_and_critical_pair(self, stripe_fig7):
        crit = critical_eigenvalues(stripe_fig7, radius=0.05)
        assert len(crit) == 2
        lam0 = min(crit, key=lambda e: abs(e.value))
        assert abs(lam0.value) < 1e-8 and lam0.similarity > 0.999
        other = [e for e in crit if e is not lam0][0]
        assert other.value.real < 0 and other.value.imag == 0.0

    def test_residual_is_small_for_returned_pairs(self, stripe_fig7):
        op = LinearizedOperator(stripe_fig7)
        lam, vecs = op.eigs_near(-0.2, 4)
        for l, z in zip(lam, vecs.T):
            assert op.residual(l, z) < 1e-10
        assert op.residual(lam[0] + 0.01, vecs[:, 0]) > 1e-6

    def test_point_spectrum_gap_below_critical_pair(self, stripe_fig7):
        pairs, notes = point_spectrum(stripe_fig7, search_region=SearchRegion(-0.15, 1.0, 2.0))
        vals = [e.value for e in pairs]
        assert sum(abs(v) < 0.05 for v in vals) == 2
        assert all(v.real < -0.1 for v in vals if abs(v) >= 0.05)

    def test_weight_is_guarded(self, stripe_fig7):
        with pytest.raises(ValueError, match="weight"):
            point_spectrum(stripe_fig7, eta=1.0)

    def test_mismatched_parameters_rejected(self, stripe_fig7):
        with pytest.raises(ValueError, match="parameters"):
            point_spectrum(stripe_fig7, p=stripe_fig7.params.with_(a=1.6))


class TestTransverseScan:
    def test_scan_is_even_in_ell(self, stripe_fig7):
        grid = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
        scan = transverse_scan(stripe_fig7, ell_grid=grid)
        assert np.allclose(scan.lambda0_curve, scan.lambda0_curve[::-1])
        assert scan.lambda0_d2 == pytest.approx(-2.0, abs=0.1)
        assert scan.max_deviation < 1e-3

    def test_grid_outside_range_rejected(self, stripe_fig7):
        with pytest.raises(ValueError, match="leaves"):
            transverse_scan(stripe_fig7, ell_grid=[0.0, 3.0], L_M=2.0)
