"""Pseudo-arclength continuation.

The engine works on any square system extended by one unknown (the
continuation parameter, stored last in the unknown vector) and is used for
traveling waves, wave trains and, in its dense form, for uniform
equilibria. Folds are detected as sign changes of the parameter component
of the tangent and refined by a secant iteration on the arclength.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import SolverError
from ..model import ModelParams
from .collocation import CollocationSystem, adapted_mesh, factorize, newton
from .problem import TWProblem


class _Augmented:
    """Square system [R(X); w.t (X - X_pred)] for the corrector."""

    def __init__(self, base, row: np.ndarray, rhs: float):
        self.base = base
        self.row = row
        self.rhs = rhs

    def residual(self, X):
        return np.r_[self.base.residual(X), self.row @ X - self.rhs]

    def residual_and_jacobian(self, X):
        R, J = self.base.residual_and_jacobian(X)
        nz = np.nonzero(self.row)[0]
        extra = sp.csr_matrix((self.row[nz], (np.zeros(nz.size, int), nz)), shape=(1, J.shape[1]))
        return np.r_[R, self.row @ X - self.rhs], sp.vstack([J, extra], format="csc")


def tangent(base, X, z: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Unit tangent t with J t = 0 and z.t > 0 (weighted norm)."""
    _, J = base.residual_and_jacobian(X)
    nz = np.nonzero(z)[0]
    extra = sp.csr_matrix((z[nz], (np.zeros(nz.size, int), nz)), shape=(1, J.shape[1]))
    A = sp.vstack([J, extra], format="csc")
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    t = factorize(A).solve(rhs)
    t /= math.sqrt(np.sum(weights * t * t))
    if z @ t < 0:
        t = -t
    return t


@dataclass
class BranchPoint:
    parameter: float
    c: float
    T: float
    B: float
    v_max: float
    fold_flag: bool = False


@dataclass
class ContinuationBranch:
    parameter: str
    points: list = field(default_factory=list)
    fold_flags: list = field(default_factory=list)
    status: str = "ok"
    message: str = ""
    solutions: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(pt, name) for pt in self.points])


@dataclass
class ContinuationOptions:
    ds: float = 0.05
    ds_min: float = 1e-6
    ds_max: float = 1.0
    max_steps: int = 200
    newton_tol: float = 1e-10
    max_iter: int = 12
    fast_iter: int = 4  # grow the step after corrections this quick
    fold_tol: float = 1e-8
    remesh_defect: float = 1e-7
    keep_solutions: bool = False
    stop_at_fold: bool = False
    period_max: float | None = None  # wave trains: stop once T exceeds this
    verbose: bool = False


class ArclengthStepper:
    """State of a pseudo-arclength run on a fixed discretisation."""

    def __init__(self, make_system, X0, weights, direction: float, opts: ContinuationOptions, t0=None):
        self.make_system = make_system
        self.X = np.asarray(X0, dtype=float)
        self.w = weights
        self.opts = opts
        base = make_system(self.X)
        if t0 is None:
            z = np.zeros_like(self.X)
            z[-1] = direction
        else:
            z = t0 * weights
        self.t = tangent(base, self.X, z, weights)
        self.ds = opts.ds

    def correct(self, ds: float, t=None):
        t = self.t if t is None else t
        X_pred = self.X + ds * t
        base = self.make_system(self.X)
        row = self.w * t
        aug = _Augmented(base, row, row @ X_pred)
        res = newton(aug, X_pred, tol=self.opts.newton_tol, max_iter=self.opts.max_iter)
        return res, base

    def step(self):
        """Take one accepted step; returns (X_new, t_new, iterations) or raises SolverError."""
        while True:
            try:
                res, base = self.correct(self.ds)
                X_new = res.Z
                t_new = tangent(self.make_system(X_new), X_new, self.w * self.t, self.w)
                break
            except SolverError:
                self.ds *= 0.5
                if abs(self.ds) < self.opts.ds_min:
                    raise SolverError("continuation step underflow below ds_min")
        its = res.iterations
        return X_new, t_new, its

    def accept(self, X_new, t_new, its):
        self.X, self.t = X_new, t_new
        if its <= self.opts.fast_iter:
            self.ds = min(1.5 * self.ds, self.opts.ds_max)

    def reweight(self, weights):
        self.w = weights
        self.t = self.t / math.sqrt(np.sum(weights * self.t * self.t))

    def refine_fold(self, X_prev, t_prev, X_new, t_new):
        """Secant iteration on the arclength for the zero of the tangent's parameter component."""
        s0, f0 = 0.0, t_prev[-1]
        s1 = float(np.sum(self.w * t_prev * (X_new - X_prev)))
        f1 = t_new[-1]
        X_best = X_new
        saved = (self.X, self.t)
        self.X, self.t = X_prev, t_prev
        try:
            for _ in range(30):
                if f1 == f0:
                    break
                s2 = s1 - f1 * (s1 - s0) / (f1 - f0)
                res, _ = self.correct(s2, t_prev)
                X2 = res.Z
                t2 = tangent(self.make_system(X2), X2, self.w * t_prev, self.w)
                if abs(X2[-1] - X_best[-1]) < self.opts.fold_tol:
                    X_best = X2
                    break
                s0, f0, s1, f1 = s1, f1, s2, t2[-1]
                X_best = X2
        except SolverError:
            pass
        finally:
            self.X, self.t = saved
        return X_best


def _weights(X: np.ndarray, n_scalars: int) -> np.ndarray:
    """Arclength weights: the profile counts as one unit in mean square, and each
    scalar is measured relative to its size (so a step in a period of several
    hundred is a relative step)."""
    size = len(X)
    w = np.full(size, 1.0 / max(size - n_scalars, 1))
    w[-n_scalars:] = 1.0 / np.maximum(np.abs(X[-n_scalars:]), 1.0) ** 2
    return w


def run_continuation(make_system, X0, summarize, parameter: str, bounds, direction: float,
                     opts: ContinuationOptions, n_scalars: int = 1, remesh=None) -> ContinuationBranch:
    """Generic driver. ``summarize(X, system) -> BranchPoint``; ``remesh(X)`` may return a
    new (make_system, X) pair when the discretisation should be rebuilt."""
    branch = ContinuationBranch(parameter)
    w = _weights(np.asarray(X0, dtype=float), n_scalars)
    stepper = ArclengthStepper(make_system, X0, w, direction, opts)
    branch.points.append(summarize(stepper.X))
    lo, hi = bounds
    for _ in range(opts.max_steps):
        X_prev, t_prev = stepper.X, stepper.t
        try:
            X_new, t_new, its = stepper.step()
        except SolverError as exc:
            branch.status, branch.message = "truncated", str(exc)
            break
        fold = np.sign(t_new[-1]) != np.sign(t_prev[-1]) and t_prev[-1] != 0
        if fold:
            X_fold = stepper.refine_fold(X_prev, t_prev, X_new, t_new)
            pt = summarize(X_fold)
            pt.fold_flag = True
            branch.fold_flags.append(len(branch.points))
            branch.points.append(pt)
            if opts.stop_at_fold:
                branch.message = "stopped at fold"
                break
        stepper.accept(X_new, t_new, its)
        stepper.reweight(_weights(stepper.X, n_scalars))
        pt = summarize(stepper.X)
        branch.points.append(pt)
        if opts.verbose:
            print(f"  {parameter}={pt.parameter:.6g} c={pt.c:.6g} ds={stepper.ds:.3g} its={its}")
        if not lo <= pt.parameter <= hi:
            branch.message = f"left the parameter range [{lo}, {hi}]"
            break
        if opts.period_max is not None and pt.T > opts.period_max:
            branch.message = f"period exceeded {opts.period_max:g}"
            break
        if remesh is not None:
            new = remesh(stepper.X)
            if new is not None:
                make_system, X_re = new
                ds = stepper.ds
                z = np.zeros(len(X_re))
                z[-1] = np.sign(stepper.t[-1]) or direction
                w = _weights(X_re, n_scalars)
                stepper = ArclengthStepper(make_system, X_re, w, z[-1], opts)
                stepper.ds = ds
    else:
        branch.message = "max_steps reached"
    return branch


# ---------------------------------------------------------------------------
# traveling waves


def _tw_summary(problem: TWProblem, system_x, s, kind, parameter, keep, store, params):
    from .waves import TravelingWaveSolution

    def summarize(X, system=None):
        from .collocation import Discrete

        d = Discrete.unpack(X, system_x(), problem.n, s, problem.n_free)
        a, c, T = problem.theta(d.P)
        wave = TravelingWaveSolution(kind, params.with_(a=a), d, c, T if kind == "periodic" else None, 0.0, 0.0,
                                     free=problem.free)
        val = {"a": a, "c": c, "T": T}[parameter]
        if keep:
            store.append(wave)
        return BranchPoint(val, c, T if kind == "periodic" else math.nan, wave.biomass(), wave.v_max())

    return summarize


def continue_wave(start, parameter: str, bounds, opts: ContinuationOptions | None = None, direction: float = 1.0,
                  free: tuple | None = None, s: int | None = None) -> ContinuationBranch:
    """Continue a solved wave (pulse, front or wave train) in ``parameter``.

    ``free`` lists the other free scalars (default: c, or c for wave trains
    continued in T, T for wave trains continued in a at fixed c).
    """
    from .waves import SolveOptions

    opts = opts or ContinuationOptions()
    kind = start.kind
    if free is None:
        if parameter == "c":
            free = ("T",) if kind == "periodic" else ()
        else:
            free = ("c",)
    free = tuple(f for f in free if f != parameter) + (parameter,)
    values = {"a": start.params.a, "c": start.c, "T": start.period if kind == "periodic" else 1.0}
    problem = TWProblem(start.params, kind, values, free=free)
    d = start.disc.copy()
    d.P = problem.P_from_values()
    s = d.s
    mesh = {"x": d.x}
    store: list = []

    def make_system(X):
        from .collocation import Discrete

        ref = Discrete.unpack(X, mesh["x"], problem.n, s, problem.n_free)
        return CollocationSystem(problem, mesh["x"], s, phase_ref=ref)

    summarize = _tw_summary(problem, lambda: mesh["x"], s, kind, parameter, opts.keep_solutions, store,
                            start.params)

    def remesh(X):
        system = make_system(X)
        dd = system.unpack(X)
        defect = system.defect(dd)
        if defect.max() <= opts.remesh_defect:
            return None
        sopts = SolveOptions()
        T = problem.theta(dd.P)[2]
        x_new = adapted_mesh(dd, defect, 0.05 * opts.remesh_defect, s, sopts.h_max / T)
        dn = dd.resample(x_new)
        mesh["x"] = x_new
        return make_system, dn.pack()

    branch = run_continuation(make_system, d.pack(), summarize, parameter, bounds, direction, opts,
                              n_scalars=len(free), remesh=remesh)
    branch.solutions = store
    return branch


def continue_branch(start, parameter: str, bounds, step: float = 0.02, opts: ContinuationOptions | None = None,
                    direction: float = 1.0) -> ContinuationBranch:
    """Continue a pulse or front in a (speed free) or in c (rainfall free)."""
    if parameter not in ("a", "c"):
        raise ValueError("continue_branch supports parameter 'a' or 'c'")
    opts = opts or ContinuationOptions(ds=step)
    free = ("a",) if parameter == "c" else ("c",)
    return continue_wave(start, parameter, bounds, opts, direction, free=free)


# ---------------------------------------------------------------------------
# uniform equilibria


class _EquilibriumSystem:
    """Dense system f(u, v, q; a) = 0 of the traveling-wave vector field."""

    def __init__(self, p: ModelParams, c: float):
        self.p, self.c = p, c

    def residual(self, X):
        from .problem import tw_rhs

        u, v, q, a = X
        p = self.p
        return np.array(tw_rhs(u, v, q, a, p.b, p.m, p.eps, self.c))

    def residual_and_jacobian(self, X):
        from .problem import tw_jacobian

        u, v, q, a = X
        p = self.p
        J = np.zeros((3, 4))
        J[:, :3] = tw_jacobian(u, v, q, a, p.b, p.m, p.eps, self.c)
        J[0, 3] = -p.eps / (1.0 + p.eps * self.c)
        return self.residual(X), sp.csc_matrix(J)


def continue_equilibrium(p: ModelParams, state, bounds, c: float = 0.0,
                         opts: ContinuationOptions | None = None, direction: float = 1.0) -> ContinuationBranch:
    """Continue a uniform state (u, v) of the model in the rainfall a."""
    opts = opts or ContinuationOptions(ds=0.05, ds_max=0.2)
    X0 = np.array([state.u, state.v, 0.0, p.a])

    def summarize(X, system=None):
        return BranchPoint(float(X[3]), c, math.nan, float(X[1]), float(X[1]))

    make_system = lambda X: _EquilibriumSystem(p, c)
    return run_continuation(make_system, X0, summarize, "a", bounds, direction, opts, n_scalars=4)
