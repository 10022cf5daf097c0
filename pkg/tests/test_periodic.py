from __future__ import annotations

import math

import numpy as np
import pytest

from klab.errors import SolverError
from klab.model import ModelParams
from klab.tw.continuation import ContinuationOptions
from klab.tw.periodic import (
    continue_in_period,
    periodic_guess,
    solve_periodic,
    start_wave_train,
    wave_train_at_period,
    wavenumber_sweep,
)

P = ModelParams(a=1.2, b=0.5, m=0.45, eps=0.01)


@pytest.fixture(scope="module")
def train():
    return start_wave_train(P, "stripe")


class TestWaveTrains:
    def test_long_train_is_close_to_the_stripe(self, train, stripe_fig9):
        assert train.kind == "periodic" and train.period > 300
        assert abs(train.c - train.info["homoclinic_c"]) < 1e-4
        assert train.info["homoclinic_c"] == pytest.approx(stripe_fig9.c, abs=1e-10)

    def test_periodic_profile_closes(self, train):
        assert np.allclose(train.profile[0], train.profile[-1], atol=1e-10)
        assert train.xi_grid[-1] - train.xi_grid[0] == pytest.approx(train.period)

    def test_speed_approaches_homoclinic_as_period_grows(self, train):
        c_h = train.info["homoclinic_c"]
        errs = []
        for T in (600.0, 700.0, 800.0):
            w = solve_periodic(P, T, train)
            assert w.period == T
            errs.append(abs(w.c - c_h))
        assert errs[0] > errs[1] > errs[2]

    def test_guess_rejects_unsolved_input(self):
        with pytest.raises(TypeError):
            solve_periodic(P, 200.0, "stripe")

    def test_guess_from_pulse_has_requested_period(self, stripe_fig9):
        d, T = periodic_guess(stripe_fig9, 400.0)
        assert T == pytest.approx(400.0)
        assert d.x[0] == 0.0 and d.x[-1] == pytest.approx(1.0)


class TestPeriodContinuation:
    def test_trends_on_a_short_branch(self, train):
        br = continue_in_period(train, T_min=150.0, opts=ContinuationOptions(ds=0.02, ds_max=0.15, max_steps=40,
                                                                            stop_at_fold=True))
        T = br.column("T")
        assert T[-1] < 200.0 and np.all(np.diff(T) < 0)
        for col in ("c", "B", "v_max"):
            vals = br.column(col)
            assert np.all(np.diff(vals) <= 0), f"{col} increases as T decreases"

    def test_train_at_requested_period(self, train):
        w = wave_train_at_period(P, "stripe", 200.0)
        assert w.period == 200.0
        assert 0.15 < w.c < train.c

    def test_unreachable_period(self):
        with pytest.raises(SolverError, match="fold"):
            wave_train_at_period(P, "stripe", 5.0)

    def test_requires_wave_train(self, stripe_fig9):
        with pytest.raises(ValueError, match="wave train"):
            continue_in_period(stripe_fig9, T_min=10.0)


class TestWavenumberSweep:
    def test_fixed_speed_curve(self, train):
        res = wavenumber_sweep(train, 0.25, (1.15, 1.3), ContinuationOptions(ds=0.02, ds_max=0.15, max_steps=25))
        assert res["c"] == 0.25
        k, a = res["k"], res["a"]
        assert np.allclose(k, 2 * math.pi / res["T"])
        order = np.argsort(a)
        assert np.all(np.diff(k[order]) >= -1e-9), "wavenumber grows with rainfall at fixed speed"
        assert a.max() > 1.25

    def test_speed_out_of_reach(self, train):
        with pytest.raises(SolverError, match="not reached"):
            wavenumber_sweep(train, 0.9, (1.15, 1.3), ContinuationOptions(ds=0.02, ds_max=0.15, max_steps=30))
