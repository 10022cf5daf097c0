"""Traveling pulses and fronts of the eps > 0 problem.

Homoclinic and heteroclinic orbits are truncated to a finite interval with
projection boundary conditions at both ends, and solved together with the
speed c by collocation and Newton's method. Initial guesses are assembled
from the singular skeleton: explicit tanh fronts glued to plateaus that
follow the reduced slow flow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ..model import ModelParams, require_no_diffusion
from ..singular import (
    FRONT_DV,
    FRONT_VD,
    GAP,
    RIGHT,
    STRIPE,
    SingularOrbit,
    build_singular_orbit,
    decay_rate,
    slow_flow_rhs,
    u_hat2,
    u_star,
    v_plus,
    vegetated_level,
)
from .collocation import CollocationSystem, Discrete, adapted_mesh, equidistribute, gauss_tableau, newton
from .problem import TWProblem, desert_rates, vegetated_projections

TAIL = 32.0  # boundary error ~ e^-32 from the linear decay estimate
WAVE_KINDS = (STRIPE, GAP, FRONT_DV, FRONT_VD, "periodic")


@dataclass
class TravelingWaveSolution:
    """A solved traveling wave.

    ``disc`` holds the collocation data in the solver coordinate, which is
    xi itself for pulses and fronts and s = xi / T for periodic waves.
    """

    kind: str
    params: ModelParams
    disc: Discrete
    c: float
    period: float | None
    residual_norm: float
    defect_norm: float
    iterations: int = 0
    free: tuple = ("c",)
    info: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return self.period if self.kind == "periodic" else 1.0

    @property
    def xi_grid(self) -> np.ndarray:
        return self.disc.x * self.scale

    @property
    def profile(self) -> np.ndarray:
        return self.disc.y

    @property
    def u(self) -> np.ndarray:
        return self.disc.y[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.disc.y[:, 1]

    @property
    def q(self) -> np.ndarray:
        return self.disc.y[:, 2]

    @property
    def n_nodes(self) -> int:
        return len(self.disc.x)

    def evaluate(self, xi, derivative: bool = False) -> np.ndarray:
        """(u, v, q) (or their xi-derivatives) at arbitrary points of the domain."""
        s = np.asarray(xi, dtype=float) / self.scale
        out = self.disc.evaluate(s, derivative)
        return out / self.scale if derivative else out

    def biomass(self) -> float:
        """B = integral of v over the computational domain (one period for wave trains)."""
        return self.scale * self.disc.integrate(self.disc.Y[:, :, 1])

    def v_max(self) -> float:
        fine = np.linspace(self.disc.x[0], self.disc.x[-1], 20 * len(self.disc.x))
        return float(max(self.disc.y[:, 1].max(), self.disc.evaluate(fine)[:, 1].max()))

    def front_positions(self, level: float | None = None) -> np.ndarray:
        """xi-positions where v crosses ``level`` (default: half of max v)."""
        level = 0.5 * self.v_max() if level is None else level
        xi = self.xi_grid
        v = self.v - level
        idx = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]
        return xi[idx] - v[idx] * (xi[idx + 1] - xi[idx]) / (v[idx + 1] - v[idx])


# ---------------------------------------------------------------------------
# singular initial guesses


def _slow_time(u_from: float, u_to: float, p: ModelParams, n: int = 4001):
    """Tabulate xi(u) - xi(u_from) along the right branch: d xi = du / g(u) (alpha omitted)."""
    us = np.linspace(u_from, u_to, n)
    g = slow_flow_rhs(RIGHT, us, p)
    t = integrate.cumulative_trapezoid(1.0 / g, us, initial=0.0)
    return us, t


def _right_branch_profile(u_from: float, u_to: float, p: ModelParams, alpha: float):
    """xi-table of u following the reduced flow on the right branch, starting at xi = 0."""
    us, t = _slow_time(u_from, u_to, p)
    return t / alpha, us


@dataclass
class _Guess:
    xi: np.ndarray
    y: np.ndarray
    c: float
    fronts: list  # (position, decay rate)


def _tanh_step(xi, x0, k, up: bool):
    t = np.tanh(k * (xi - x0))
    return 0.5 * (1.0 + t) if up else 0.5 * (1.0 - t)


def _finish(xi, u, v, c, fronts) -> _Guess:
    q = np.gradient(v, xi)
    return _Guess(xi, np.stack([u, v, q], axis=1), c, fronts)


def singular_guess(orbit: SingularOrbit, delta: float = 1e-5) -> _Guess:
    """Sample a composite profile built from a singular orbit.

    ``delta`` is the relative distance from the vegetated equilibrium at which
    slowly decaying tails are truncated.
    """
    p = orbit.params
    a, c = p.a, orbit.speed
    alpha = p.eps / (1.0 + p.eps * c)
    mu_m, mu_p = desert_rates(c, p.m)
    kind = orbit.kind
    if kind == STRIPE:
        us = u_star(a, p)
        k1, k2 = decay_rate(us, p), decay_rate(a, p)
        xs_tab, u_tab = _right_branch_profile(us, a, p, alpha)
        Lp = xs_tab[-1]
        tail_l = max(TAIL / mu_p, 0.25 * Lp)
        tail_r = max(TAIL / abs(mu_m), 0.25 * Lp)
        xi = np.linspace(-tail_l, Lp + tail_r, 40001)
        u = np.where(xi < 0, a - (a - us) * np.exp(alpha * np.minimum(xi, 0.0)), np.interp(xi, xs_tab, u_tab))
        u = np.where(xi > Lp, a, u)
        v = v_plus(np.maximum(u, us), p) * _tanh_step(xi, 0.0, k1, True) * _tanh_step(xi, Lp, k2, False)
        return _finish(xi, u, v, c, [(0.0, k1), (Lp, k2)])

    u2, v2 = vegetated_level(a, p)
    point, _, _, w = vegetated_projections(p, a, c)
    fast_stable = abs(w.real.min())
    if kind == GAP:
        uh = u_hat2(a, p)
        k1, k2 = decay_rate(uh, p), decay_rate(u2, p)
        u_left = u2 + delta * (uh - u2)
        xs_tab, u_tab = _right_branch_profile(uh, u_left, p, alpha)  # backwards from uh
        Lleft = -xs_tab[-1]
        Lg = math.log((u2 - a) / (uh - a)) / alpha
        tail_r = max(TAIL / fast_stable, 0.25 * Lg)
        xi = np.linspace(-Lleft, Lg + tail_r, 40001)
        u_r = np.interp(-xi, -xs_tab, u_tab)
        u_mid = a + (uh - a) * np.exp(alpha * np.clip(xi, 0.0, Lg))
        u = np.where(xi < 0, u_r, np.where(xi <= Lg, u_mid, u2))
        v = v_plus(np.maximum(np.where(xi < 0, u, uh), 4 * p.b * p.m), p) * _tanh_step(xi, 0.0, k1, False)
        v = v + v2 * _tanh_step(xi, Lg, k2, True)
        return _finish(xi, u, v, c, [(0.0, k1), (Lg, k2)])
    if kind == FRONT_DV:
        k1 = decay_rate(u2, p)
        tail_l = TAIL / mu_p
        tail_r = TAIL / fast_stable
        xi = np.linspace(-tail_l, tail_r, 20001)
        u = np.where(xi < 0, a - (a - u2) * np.exp(alpha * np.minimum(xi, 0.0)), u2)
        v = v2 * _tanh_step(xi, 0.0, k1, True)
        return _finish(xi, u, v, c, [(0.0, k1)])
    if kind == FRONT_VD:
        k1 = decay_rate(a, p)
        u_left = u2 + delta * (a - u2)
        xs_tab, u_tab = _right_branch_profile(a, u_left, p, alpha)
        Lleft = -xs_tab[-1]
        tail_r = TAIL / abs(mu_m)
        xi = np.linspace(-Lleft, tail_r, 40001)
        u = np.where(xi < 0, np.interp(-xi, -xs_tab, u_tab), a)
        v = v_plus(np.where(xi < 0, u, a), p) * _tanh_step(xi, 0.0, k1, False)
        return _finish(xi, u, v, c, [(0.0, k1)])
    raise ValueError(f"no singular guess for kind {kind!r}")


def _initial_mesh(g: _Guess, h_fine: float, h_coarse: float) -> np.ndarray:
    xi = g.xi
    dens = np.full(xi.size - 1, 1.0 / h_coarse)
    mid = 0.5 * (xi[1:] + xi[:-1])
    for x0, k in g.fronts:
        dens += (1.0 / h_fine) / np.cosh(np.clip(k * (mid - x0) / 4.0, -300, 300)) ** 2
    n = int(np.ceil(np.sum(dens * np.diff(xi))))
    return equidistribute(xi, dens, max(n, 40))


def _discrete_from_samples(xi_s, y_s, x_mesh, s: int, P) -> Discrete:
    tab = gauss_tableau(s)
    h = np.diff(x_mesh)
    pts = (x_mesh[:-1, None] + h[:, None] * tab.c[None, :]).ravel()
    interp = lambda xx: np.stack([np.interp(xx, xi_s, y_s[:, k]) for k in range(y_s.shape[1])], axis=1)
    return Discrete(x_mesh, interp(x_mesh), interp(pts).reshape(len(h), s, -1), np.asarray(P, float), s)


# ---------------------------------------------------------------------------
# solving


@dataclass
class SolveOptions:
    s: int = 4
    newton_tol: float = 1e-10
    max_iter: int = 25
    defect_tol: float = 1e-8
    max_adapt: int = 6
    h_fine: float = 0.25
    h_coarse: float = 2.0
    h_max: float = 50.0
    n_max: int = 20000
    verbose: bool = False


def solve_collocation(problem: TWProblem, d0: Discrete, opts: SolveOptions, phase: bool = True,
                      adapt: bool = True) -> tuple:
    """Newton solve with defect-driven mesh adaptation; returns (Discrete, system, info)."""
    d = d0
    info = {"adapt_rounds": 0, "iterations": []}
    for rnd in range(opts.max_adapt + 1):
        system = CollocationSystem(problem, d.x, opts.s, phase_ref=d if phase else None)
        res = newton(system, d.pack(), tol=opts.newton_tol, max_iter=opts.max_iter, verbose=opts.verbose)
        d = system.unpack(res.Z)
        info["iterations"].append(res.iterations)
        defect = system.defect(d)
        info.update(residual=res.residual, defect=float(defect.max()), n_intervals=system.N)
        if opts.verbose:
            print(f" round {rnd}: N={system.N} defect={defect.max():.2e} P={d.P}")
        if not adapt or defect.max() <= opts.defect_tol:
            return d, system, info
        if rnd == opts.max_adapt:
            break
        # the mesh lives on s = xi / T, so spacing limits are rescaled by T
        h_max = opts.h_max / problem.theta(d.P)[2]
        x_new = adapted_mesh(d, defect, 0.5 * opts.defect_tol, opts.s, h_max, n_max=opts.n_max)
        d = d.resample(x_new)
        info["adapt_rounds"] = rnd + 1
    return d, system, info


def _wrap(kind, p, d, system, info, problem, period=None) -> TravelingWaveSolution:
    a, c, T = problem.theta(d.P)
    params = p.with_(a=a) if a != p.a else p
    return TravelingWaveSolution(
        kind=kind,
        params=params,
        disc=d,
        c=c,
        period=T if kind == "periodic" else period,
        residual_norm=float(info["residual"]),
        defect_norm=float(info["defect"]),
        iterations=int(sum(info["iterations"])),
        free=problem.free,
        info=info,
    )


def solve_wave(kind: str, p: ModelParams, guess=None, opts: SolveOptions | None = None) -> TravelingWaveSolution:
    """Solve for a stripe, gap or front together with its speed.

    ``guess`` may be ``None`` (the singular orbit is built here), a
    :class:`SingularOrbit`, or a previous :class:`TravelingWaveSolution` of the
    same kind (for instance at nearby parameters).
    """
    require_no_diffusion(p)
    if kind == "periodic":
        raise ValueError("use solve_periodic for wave trains")
    opts = opts or SolveOptions()
    if guess is None or isinstance(guess, SingularOrbit):
        orbit = guess if guess is not None else build_singular_orbit(kind, p)
        if orbit.kind != kind:
            raise ValueError(f"guess is a {orbit.kind} orbit, requested {kind}")
        if orbit.params != p:
            orbit = build_singular_orbit(kind, p)
        g = singular_guess(orbit)
        mesh = _initial_mesh(g, opts.h_fine, opts.h_coarse)
        d0 = _discrete_from_samples(g.xi, g.y, mesh, opts.s, [g.c])
        c0 = g.c
    elif isinstance(guess, TravelingWaveSolution):
        if guess.kind != kind:
            raise ValueError(f"guess is a {guess.kind} wave, requested {kind}")
        d0 = guess.disc.copy()
        d0.P = np.array([guess.c])
        c0 = guess.c
        if guess.params.a != p.a:
            build_singular_orbit(kind, p)  # window check
    else:
        raise TypeError(f"unsupported guess type {type(guess).__name__}")
    problem = TWProblem(p, kind, {"c": c0}, free=("c",))
    d, system, info = solve_collocation(problem, d0, opts)
    return _wrap(kind, p, d, system, info, problem)
