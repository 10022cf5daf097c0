"""Periodic wave trains.

A wave train of period T is solved on s in [0, 1] (xi = T s) with periodic
boundary conditions, an integral phase condition and c as unknown. Starting
points come from a solved stripe or gap: for a stripe the pulse is closed up
by a stretch of the desert ramp u' ~ (u - a) on which v is negligible.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from ..errors import SolverError
from ..model import ModelParams
from .collocation import Discrete, gauss_tableau
from .continuation import ContinuationBranch, ContinuationOptions, continue_wave
from .problem import TWProblem
from .waves import SolveOptions, TravelingWaveSolution, _wrap, solve_collocation, solve_wave


def _ramp_length(wave: TravelingWaveSolution, closeness: float) -> float:
    p = wave.params
    alpha = p.eps / (1.0 + p.eps * wave.c)
    u_left = wave.u[0]
    return math.log(max(abs(p.a - u_left), 1e-300) / closeness) / alpha


def periodic_guess(wave: TravelingWaveSolution, T: float | None = None, closeness: float = 1e-4) -> tuple:
    """Wave-train guess on s in [0, 1] built from a pulse; returns (Discrete, period).

    For a stripe a desert ramp of length ln(|a - u_left| / closeness) / alpha
    (or whatever is left up to the requested period) is appended so that the
    profile closes up; a gap closes up by itself up to the truncation error
    of its slow tail.
    """
    if wave.kind not in ("stripe", "gap"):
        raise ValueError(f"wave trains are built from stripes or gaps, got {wave.kind}")
    p = wave.params
    x = wave.xi_grid
    L = x[-1] - x[0]
    s_ord = wave.disc.s
    if wave.kind == "stripe":
        ramp = _ramp_length(wave, closeness) if T is None else T - L
        if ramp <= 0:
            raise ValueError(f"period {T} is shorter than the pulse domain {L:.6g}")
        alpha = p.eps / (1.0 + p.eps * wave.c)
        u_left = wave.u[0]
        n_ramp = max(int(ramp / 5.0), 20)
        x_ramp = np.linspace(x[-1], x[-1] + ramp, n_ramp + 1)[1:]
        xs = np.r_[x, x_ramp]
        Ttot = xs[-1] - xs[0]

        def f(xq):
            xq = np.asarray(xq, dtype=float)
            inside = xq <= x[-1]
            out = np.zeros((xq.size, 3))
            out[inside] = wave.evaluate(np.clip(xq[inside], x[0], x[-1]))
            t_left = x[-1] + ramp - xq[~inside]  # distance to the end of the ramp
            out[~inside, 0] = p.a - (p.a - u_left) * np.exp(-alpha * t_left)
            return out
    else:
        xs = x
        Ttot = L if T is None else T
        if T is not None and abs(T - L) > 1e-9 * L:
            raise ValueError("a gap wave train guess uses the pulse domain length as period")
        f = lambda xq: wave.evaluate(np.clip(xq, x[0], x[-1]))
    s_mesh = (xs - xs[0]) / Ttot
    tab = gauss_tableau(s_ord)
    h = np.diff(s_mesh)
    pts = s_mesh[:-1, None] + h[:, None] * tab.c[None, :]
    y = f(xs[0] + Ttot * s_mesh)
    Y = f(xs[0] + Ttot * pts.ravel()).reshape(len(h), s_ord, 3)
    return Discrete(s_mesh, y, Y, np.array([wave.c]), s_ord), Ttot


def solve_periodic(p: ModelParams, T: float, guess, opts: SolveOptions | None = None) -> TravelingWaveSolution:
    """Wave train of period T with unknown speed.

    ``guess`` is a stripe or gap (T is then matched by a desert ramp, or must
    be ``None``-compatible for gaps) or a previous wave train.
    """
    opts = opts or SolveOptions()
    if isinstance(guess, TravelingWaveSolution) and guess.kind == "periodic":
        d0 = guess.disc.copy()
        c0 = guess.c
    elif isinstance(guess, TravelingWaveSolution):
        d0, T_built = periodic_guess(guess, T if guess.kind == "stripe" else None)
        if T is None:
            T = T_built
        c0 = guess.c
    else:
        raise TypeError("solve_periodic needs a solved stripe, gap or wave train as guess")
    problem = TWProblem(p, "periodic", {"c": c0, "T": T}, free=("c",))
    d0.P = problem.P_from_values()
    d, system, info = solve_collocation(problem, d0, opts)
    return _wrap("periodic", p, d, system, info, problem)


def start_wave_train(p: ModelParams, family: str, opts: SolveOptions | None = None) -> TravelingWaveSolution:
    """Long-period wave train next to the stripe or gap homoclinic."""
    pulse = solve_wave(family, p, opts=opts)
    d0, T = periodic_guess(pulse)
    train = solve_periodic(p, T, pulse, opts)
    train.info["homoclinic_c"] = pulse.c
    train.info["family"] = family
    return train


def continue_in_period(start: TravelingWaveSolution, T_min: float, T_max: float | None = None,
                       opts: ContinuationOptions | None = None, direction: float = -1.0) -> ContinuationBranch:
    """Continue a wave train in its period T (c free), by default towards smaller T.

    The default options stop at the first fold in T, so the branch is the one
    attached to the long-wave (homoclinic) limit.
    """
    if start.kind != "periodic":
        raise ValueError("continue_in_period needs a wave train")
    opts = opts or ContinuationOptions(ds=0.02, ds_max=0.15, stop_at_fold=True)
    T_max = T_max if T_max is not None else 10.0 * start.period
    return continue_wave(start, "T", (T_min, T_max), opts, direction, free=("c",))


def _seed_at_speed(start: TravelingWaveSolution, c_fixed: float, opts: ContinuationOptions) -> TravelingWaveSolution:
    """Wave train of speed c_fixed on the T-branch through ``start``."""
    if abs(start.c - c_fixed) < 1e-12:
        return start
    branch = continue_in_period(start, T_min=1e-3, opts=ContinuationOptions(
        ds=opts.ds, ds_max=opts.ds_max, max_steps=opts.max_steps, stop_at_fold=True, keep_solutions=True))
    cs = branch.column("c")
    above = cs >= c_fixed
    idx = np.nonzero(above[:-1] != above[1:])[0]
    if idx.size == 0:
        raise SolverError(
            f"speed {c_fixed} is not reached along the period branch (c in [{cs.min():.4g}, {cs.max():.4g}])",
            float(np.min(np.abs(cs - c_fixed))), len(cs))
    i = int(idx[0])
    j = i if abs(cs[i] - c_fixed) <= abs(cs[i + 1] - c_fixed) else i + 1
    return branch.solutions[j]


def wavenumber_sweep(start: TravelingWaveSolution, c_fixed: float, a_range, opts: ContinuationOptions | None = None,
                     solve_opts: SolveOptions | None = None) -> dict:
    """Curve k(a) = 2 pi / T(a) of wave trains with fixed speed c_fixed.

    ``start`` is a wave train at the starting rainfall whose speed is at
    least c_fixed. It is continued towards shorter periods until its speed
    crosses c_fixed; there the period is adjusted (T free, c fixed) and the
    resulting train is continued in a in both directions. Towards the
    long-wave end T grows without bound; the branch stops at
    ``opts.period_max`` (default twice the starting period).
    """
    if start.kind != "periodic":
        raise ValueError("wavenumber_sweep needs a wave train as start")
    opts = opts or ContinuationOptions(ds=0.02, ds_max=0.15)
    near = _seed_at_speed(start, c_fixed, opts)
    p = near.params
    problem = TWProblem(p, "periodic", {"c": c_fixed, "T": near.period}, free=("T",))
    d0 = near.disc.copy()
    d0.P = problem.P_from_values()
    d, system, info = solve_collocation(problem, d0, solve_opts or SolveOptions())
    seed = _wrap("periodic", p, d, system, info, problem)
    seed.c = c_fixed
    if opts.period_max is None:
        opts = dataclasses.replace(opts, period_max=2.0 * start.period)
    curves = []
    for direction in (1.0, -1.0):
        br = continue_wave(seed, "a", tuple(a_range), opts, direction, free=("T",))
        curves.append(br)
    a_vals = np.r_[curves[1].column("parameter")[::-1][:-1], curves[0].column("parameter")]
    T_vals = np.r_[curves[1].column("T")[::-1][:-1], curves[0].column("T")]
    return {
        "c": c_fixed,
        "a": a_vals,
        "T": T_vals,
        "k": 2.0 * math.pi / T_vals,
        "branches": curves,
    }


def wave_train_at_period(p: ModelParams, family: str, T: float, opts: ContinuationOptions | None = None,
                         solve_opts: SolveOptions | None = None) -> TravelingWaveSolution:
    """Wave train of period T on the branch attached to the stripe or gap homoclinic."""
    start = start_wave_train(p, family, solve_opts)
    if T >= start.period:
        return solve_periodic(p, T, start, solve_opts)
    opts = opts or ContinuationOptions(ds=0.02, ds_max=0.05 if family == "gap" else 0.15)
    opts = dataclasses.replace(opts, keep_solutions=True, stop_at_fold=True)
    branch = continue_in_period(start, T_min=0.9 * T, opts=opts)
    Ts = branch.column("parameter")
    if Ts.min() > T:
        raise SolverError(f"period {T} not reached before the fold at T = {Ts.min():.4g}", None, len(Ts))
    near = branch.solutions[int(np.argmin(np.abs(Ts - T)))]
    return solve_periodic(p, T, near, solve_opts)
