"""Closed-form objects of the eps = 0 limit.

Critical manifolds, explicit layer fronts with their speeds, the matched
jump-off levels u*(a) and u_hat2(a), the reduced slow flows, singular
orbits for the four solution families, pulse lengths and singular
bifurcation diagrams.

Conventions: xi = x - c t, the slope rises towards +xi, and c > 0 means
uphill motion. The dagger front connects the desert branch (v = 0) at
xi -> -inf to the vegetated branch v = v+(u) at xi -> +inf; the diamond
front is the reverse connection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate

from .errors import DomainError, WindowError
from .model import ModelParams, regime_thresholds, uniform_steady_states, VEGETATED

DAGGER = "dagger"
DIAMOND = "diamond"
_KIND_ALIASES = {"dagger": DAGGER, "†": DAGGER, "diamond": DIAMOND, "⋄": DIAMOND}

STRIPE = "stripe"
GAP = "gap"
FRONT_DV = "front_dv"
FRONT_VD = "front_vd"
FAMILIES = (STRIPE, GAP, FRONT_DV, FRONT_VD)

_FOLD_RTOL = 1e-13


def _front_kind(kind: str) -> str:
    try:
        return _KIND_ALIASES[kind]
    except KeyError:
        raise ValueError(f"unknown front kind {kind!r}; expected 'dagger' or 'diamond'") from None


def fold_level(p: ModelParams) -> float:
    """Water level 4bm of the fold where the middle and right branches meet."""
    return 4.0 * p.b * p.m


def _at_fold(u: float, p: ModelParams) -> bool:
    return abs(u - fold_level(p)) <= _FOLD_RTOL * fold_level(p)


def v_pm(u: float, p: ModelParams):
    """Nonzero layer equilibria (v-, v+) at water level u.

    Returns a pair for u > 4bm, the repeated value 1/(2b) at the fold and
    ``None`` below the fold.
    """
    u4 = fold_level(p)
    if _at_fold(u, p):
        v = 1.0 / (2.0 * p.b)
        return v, v
    if u < u4:
        return None
    s = math.sqrt(1.0 - u4 / u)
    vp = (1.0 + s) / (2.0 * p.b)
    # v- v+ = m/(b u); the product form avoids cancellation for large u
    vm = p.m / (p.b * u * vp)
    return vm, vp


def v_plus(u, p: ModelParams):
    """v+(u) for scalar or array u >= 4bm (values slightly below the fold are clamped)."""
    s = np.sqrt(np.maximum(1.0 - fold_level(p) / np.asarray(u, dtype=float), 0.0))
    return (1.0 + s) / (2.0 * p.b)


def v_minus(u, p: ModelParams):
    s = np.sqrt(np.maximum(1.0 - fold_level(p) / np.asarray(u, dtype=float), 0.0))
    return (1.0 - s) / (2.0 * p.b)


def _require_above_fold(u: float, p: ModelParams, what: str) -> None:
    if u < fold_level(p) and not _at_fold(u, p):
        raise DomainError(f"{what} requires u >= 4bm = {fold_level(p):.6g}, got u = {u:.6g}")


def front_speed(kind: str, u: float, p: ModelParams) -> float:
    """Speed of the explicit layer front at water level u."""
    kind = _front_kind(kind)
    _require_above_fold(u, p, "front_speed")
    if _at_fold(u, p):
        c = -math.sqrt(p.m / 2.0)
    else:
        c = (-math.sqrt(u) + 3.0 * math.sqrt(u - fold_level(p))) / (2.0 * math.sqrt(2.0 * p.b))
    return c if kind == DIAMOND else -c


def decay_rate(u: float, p: ModelParams) -> float:
    """kappa = v+ sqrt(u b) / (2 sqrt 2), the tanh rate of the fronts."""
    return float(v_plus(u, p)) * math.sqrt(u * p.b) / (2.0 * math.sqrt(2.0))


def _sech2(z):
    """sech(z)^2 without the cancellation of 1 - tanh(z)^2 in the tails."""
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / (1.0 + e) ** 2


def front_profile(kind: str, u: float, p: ModelParams, xi):
    """(v, q) of the layer front at level u, evaluated at xi (scalar or array)."""
    kind = _front_kind(kind)
    _require_above_fold(u, p, "front_profile")
    vp = float(v_plus(u, p))
    k = decay_rate(u, p)
    xi = np.asarray(xi, dtype=float)
    t = np.tanh(k * xi)
    sech2 = _sech2(k * xi)
    sign = -1.0 if kind == DIAMOND else 1.0
    v = 0.5 * vp * (1.0 + sign * t)
    q = sign * 0.5 * vp * k * sech2
    return v, q


def front_profile_dq(kind: str, u: float, p: ModelParams, xi):
    """Second derivative v'' of the layer front (used by the Melnikov weights)."""
    kind = _front_kind(kind)
    vp = float(v_plus(u, p))
    k = decay_rate(u, p)
    z = k * np.asarray(xi, dtype=float)
    sign = -1.0 if kind == DIAMOND else 1.0
    return -sign * vp * k * k * np.tanh(z) * _sech2(z)


@dataclass(frozen=True)
class LayerFront:
    kind: str
    u: float
    v_plus: float
    speed: float

    @classmethod
    def at(cls, kind: str, u: float, p: ModelParams) -> "LayerFront":
        kind = _front_kind(kind)
        return cls(kind, float(u), float(v_plus(u, p)), front_speed(kind, u, p))

    def profile(self, xi, p: ModelParams):
        return front_profile(self.kind, self.u, p, xi)

    @property
    def start(self) -> tuple:
        return (self.u, 0.0) if self.kind == DAGGER else (self.u, self.v_plus)

    @property
    def end(self) -> tuple:
        return (self.u, self.v_plus) if self.kind == DAGGER else (self.u, 0.0)


def _matching_level(x: float, p: ModelParams) -> float:
    """Level u at which a dagger front has the speed of a diamond front at x."""
    bm = p.b * p.m
    return (17.0 * x - 18.0 * bm - 15.0 * math.sqrt(x * x - 4.0 * x * bm)) / 8.0


def u_star(a: float, p: ModelParams) -> float:
    """Jump-off level u*(a) of the dagger front in the stripe construction."""
    r = a / p.m
    th = regime_thresholds(p.b, p.m)
    if r < th.loop_stripe * (1.0 - 1e-14):
        raise DomainError(f"u_star requires a/m >= 9b/2 = {th.loop_stripe:.6g}, got {r:.6g}")
    if r >= th.fold_jump:
        return fold_level(p)
    return _matching_level(a, p)


def vegetated_level(a: float, p: ModelParams) -> tuple:
    """(u2, v2) of the stable vegetated steady state at rainfall a."""
    for s in uniform_steady_states(p.with_(a=a)):
        if s.kind == VEGETATED:
            return s.u, s.v
    raise DomainError(f"no vegetated steady state at a/m = {a / p.m:.6g}")


def u_hat2(a: float, p: ModelParams) -> float:
    """Level u_hat2(a) of the diamond front matching the dagger front at u2."""
    th = regime_thresholds(p.b, p.m)
    r = a / p.m
    if r < th.canard * (1.0 - 1e-14):
        raise DomainError(f"u_hat2 requires a/m > 4b+1/b = {th.canard:.6g}, got {r:.6g}")
    u2, _ = vegetated_level(a, p)
    u2 = max(u2, fold_level(p))
    return _matching_level(u2, p)


def c_star(a: float, p: ModelParams) -> float:
    """Singular speed c*(a) = speed of the diamond front at u = a."""
    return front_speed(DIAMOND, a, p)


def c_hat(a: float, p: ModelParams) -> float:
    """Singular speed c_hat(a) = speed of the dagger front at u = u2(a)."""
    u2, _ = vegetated_level(a, p)
    return front_speed(DAGGER, max(u2, fold_level(p)), p)


LEFT, MIDDLE, RIGHT = "left", "middle", "right"


def slow_flow_rhs(branch: str, u, p: ModelParams):
    """Reduced flow du/dtau on a branch of the critical manifold."""
    u_arr = np.asarray(u, dtype=float)
    if branch == LEFT:
        return u_arr - p.a
    if branch not in (MIDDLE, RIGHT):
        raise ValueError(f"unknown branch {branch!r}")
    if np.any(u_arr < fold_level(p) * (1.0 - _FOLD_RTOL)):
        raise DomainError(f"{branch} branch only exists for u >= 4bm = {fold_level(p):.6g}")
    v = v_plus(u_arr, p) if branch == RIGHT else v_minus(u_arr, p)
    return u_arr - p.a + u_arr * v * v


@dataclass(frozen=True)
class CriticalManifoldBranch:
    branch: str
    u_range: tuple
    v_of_u: Callable = field(compare=False, repr=False)


def critical_manifold(p: ModelParams, u_max: float | None = None) -> list[CriticalManifoldBranch]:
    """The three branches of the critical manifold up to water level u_max."""
    u_max = max(u_max if u_max is not None else 2.0 * p.a, fold_level(p))
    return [
        CriticalManifoldBranch(LEFT, (0.0, u_max), lambda u: np.zeros_like(np.asarray(u, dtype=float))),
        CriticalManifoldBranch(MIDDLE, (fold_level(p), u_max), lambda u: v_minus(u, p)),
        CriticalManifoldBranch(RIGHT, (fold_level(p), u_max), lambda u: v_plus(u, p)),
    ]


@dataclass(frozen=True)
class ManifoldSegment:
    """Piece of a critical-manifold branch, traversed from u_start to u_end."""

    branch: str
    u_start: float
    u_end: float
    v_start: float
    v_end: float

    @property
    def start(self) -> tuple:
        return (self.u_start, self.v_start)

    @property
    def end(self) -> tuple:
        return (self.u_end, self.v_end)


Segment = Union[ManifoldSegment, LayerFront]


def _segment(branch: str, u0: float, u1: float, p: ModelParams) -> ManifoldSegment:
    if branch == LEFT:
        return ManifoldSegment(branch, u0, u1, 0.0, 0.0)
    return ManifoldSegment(branch, u0, u1, float(v_plus(u0, p)), float(v_plus(u1, p)))


@dataclass(frozen=True)
class SingularOrbit:
    kind: str
    segments: tuple
    speed: float
    window_check: dict
    params: ModelParams

    def fronts(self) -> list[LayerFront]:
        return [s for s in self.segments if isinstance(s, LayerFront)]


def _window(kind: str, p: ModelParams) -> dict:
    """Check the existence window of a family; returns the admitting record or raises."""
    th = regime_thresholds(p.b, p.m)
    r = p.a_over_m
    if kind == STRIPE:
        if r < th.loop_stripe:
            if r >= 4.0 * p.b:
                why = "the dagger level u*(a) exceeds a, so the reduced flow on the right branch prevents return"
            else:
                why = "no matching dagger level exists"
            raise WindowError(
                f"stripe rejected at a/m = {r:.6g} < 9b/2 = {th.loop_stripe:.6g}: {why}", "loop_stripe"
            )
        if r >= th.a_bar_hyp:
            if p.b <= 2.0 / 3.0:
                raise WindowError(
                    f"stripe rejected at a/m = {r:.6g} >= 25b/4 = {th.fold_jump:.6g}: "
                    "the dagger front jumps onto the fold (not normally hyperbolic)",
                    "fold_jump",
                )
            raise WindowError(
                f"stripe rejected at a/m = {r:.6g} >= a_bar_dh = {th.a_bar_dh:.6g}: "
                "blocked by the vegetated equilibrium p+(u2)",
                "a_bar_dh",
            )
        lower, upper = ("loop_stripe", th.loop_stripe), ("a_bar_hyp", th.a_bar_hyp)
    elif kind == GAP:
        if r < th.a_bar * (1.0 - 1e-14):
            name = "canard" if p.b <= 2.0 / 3.0 else "a_bar_dh"
            raise WindowError(f"gap rejected at a/m = {r:.6g} < a_bar = {th.a_bar:.6g}", name)
        if r > th.loop_gap * (1.0 + 1e-14):
            raise WindowError(
                f"gap rejected at a/m = {r:.6g} > 9b/2+2/b = {th.loop_gap:.6g}: "
                "the gap speed has turned negative and the loop is broken",
                "loop_gap",
            )
        lower, upper = ("a_bar", th.a_bar), ("loop_gap", th.loop_gap)
    elif kind in (FRONT_DV, FRONT_VD):
        if r <= th.canard:
            raise WindowError(
                f"{kind} rejected at a/m = {r:.6g} <= 4b+1/b = {th.canard:.6g}: "
                "the vegetated equilibrium is not on the right branch",
                "canard",
            )
        lower, upper = ("canard", th.canard), ("none", math.inf)
    else:
        raise ValueError(f"unknown family {kind!r}; expected one of {FAMILIES}")
    tol = 1e-12 * max(1.0, r)
    boundary = None
    if abs(r - lower[1]) <= tol:
        boundary = lower[0]
    elif abs(r - upper[1]) <= tol:
        boundary = upper[0]
    return {"family": kind, "a_over_m": r, "lower": lower, "upper": upper, "boundary": boundary}


def build_singular_orbit(kind: str, p: ModelParams) -> SingularOrbit:
    """Singular skeleton of a stripe, gap or front, ordered along increasing xi."""
    check = _window(kind, p)
    a = p.a
    if kind == STRIPE:
        us = u_star(a, p)
        segs = (
            _segment(LEFT, a, us, p),
            LayerFront.at(DAGGER, us, p),
            _segment(RIGHT, us, a, p),
            LayerFront.at(DIAMOND, a, p),
        )
        speed = c_star(a, p)
    elif kind == GAP:
        u2, _ = vegetated_level(a, p)
        uh = u_hat2(a, p)
        segs = (
            _segment(RIGHT, u2, uh, p),
            LayerFront.at(DIAMOND, uh, p),
            _segment(LEFT, uh, u2, p),
            LayerFront.at(DAGGER, u2, p),
        )
        speed = c_hat(a, p)
    elif kind == FRONT_DV:
        u2, _ = vegetated_level(a, p)
        segs = (_segment(LEFT, a, u2, p), LayerFront.at(DAGGER, u2, p))
        speed = c_hat(a, p)
    else:
        u2, _ = vegetated_level(a, p)
        segs = (_segment(RIGHT, u2, a, p), LayerFront.at(DIAMOND, a, p))
        speed = c_star(a, p)
    return SingularOrbit(kind, segs, speed, check, p)


def pulse_length(kind: str, p: ModelParams) -> float:
    """Plateau length of a stripe or gap in the slow variable (eps * L)."""
    if kind == STRIPE:
        _window(STRIPE, p)
        us, a = u_star(p.a, p), p.a
        if us == a:
            return 0.0
        grid = np.linspace(us, a, 257)
        if np.any(slow_flow_rhs(RIGHT, grid, p) <= 0):
            raise DomainError("reduced flow on the right branch vanishes inside [u*, a]")
        val, err = integrate.quad(
            lambda u: 1.0 / slow_flow_rhs(RIGHT, u, p), us, a, epsabs=1e-13, epsrel=1e-13, limit=200
        )
        return float(val)
    if kind == GAP:
        _window(GAP, p)
        u2, _ = vegetated_level(p.a, p)
        uh = u_hat2(p.a, p)
        return math.log((u2 - p.a) / (uh - p.a))
    raise ValueError(f"pulse_length is defined for stripe and gap, got {kind!r}")


@dataclass(frozen=True)
class DiagramPoint:
    family: str
    a_over_m: float
    c: float
    window_flag: str


def _family_range(family: str, th) -> tuple:
    if family == STRIPE:
        return th.loop_stripe, th.a_bar_hyp, True, False
    if family == GAP:
        return th.a_bar, th.loop_gap, True, True
    return th.canard, math.inf, False, True


def singular_bifurcation_diagram(b: float, m: float, a_grid=None, n: int = 400) -> list[DiagramPoint]:
    """Singular speed curves c(a/m) of every family over an a/m grid.

    ``a_grid`` holds values of a/m. Window endpoints that fall inside the
    grid range are inserted exactly, so the curves start and end on the
    thresholds.
    """
    th = regime_thresholds(b, m)
    if a_grid is None:
        lo = min(th.loop_stripe, th.existence_onset)
        a_grid = np.linspace(lo, 1.25 * th.loop_gap, n)
    a_grid = np.asarray(a_grid, dtype=float)
    lo, hi = float(a_grid.min()), float(a_grid.max())
    p0 = ModelParams(a=1.0, b=b, m=m, eps=0.01)
    points: list[DiagramPoint] = []
    for family in FAMILIES:
        f_lo, f_hi, lo_closed, hi_closed = _family_range(family, th)
        extra = [x for x, ok in ((f_lo, lo_closed), (f_hi, hi_closed)) if ok and lo <= x <= hi]
        grid = np.union1d(a_grid, extra)
        for r in grid:
            inside = (r > f_lo or (lo_closed and r == f_lo)) and (r < f_hi or (hi_closed and r == f_hi))
            if not inside:
                continue
            p = p0.with_(a=r * m)
            if family == STRIPE:
                c = c_star(p.a, p)
            elif family == FRONT_VD:
                c = c_star(p.a, p)
            else:
                c = c_hat(p.a, p)
            flag = "interior"
            if r == f_lo:
                flag = "lower_endpoint"
            elif r == f_hi:
                flag = "upper_endpoint"
            points.append(DiagramPoint(family, float(r), float(c), flag))
    return points
