"""Model definition, uniform steady states and parameter regimes.

The model is the advection-dominated Klausmeier system

    U_t = (1/eps) U_x + a - U - U V^2 (+ D Delta U)
    V_t = Delta V - m V + (1 - b V) U V^2

on a slope rising in the +x direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

DESERT = "desert"
VEGETATED_UNSTABLE = "vegetated-unstable"
VEGETATED = "vegetated"


@dataclass(frozen=True)
class ModelParams:
    """Parameter tuple (a, b, m, eps, D)."""

    a: float
    b: float
    m: float
    eps: float
    D: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "m", "eps", "D"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise ValueError(f"parameter {name} must be finite, got {val}")
        for name in ("a", "b", "m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"parameter {name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.D < 0:
            raise ValueError(f"D must be non-negative, got {self.D}")

    @property
    def a_over_m(self) -> float:
        return self.a / self.m

    def with_(self, **changes) -> "ModelParams":
        """Return a copy with some fields replaced."""
        return replace(self, **changes)

    def thresholds(self) -> "RegimeThresholds":
        return regime_thresholds(self.b, self.m)


def require_no_diffusion(p: ModelParams) -> None:
    """The traveling-wave analysis is for D = 0 only."""
    if p.D != 0.0:
        raise ValueError("this analysis assumes D = 0; water diffusion is only used by the simulator")


@dataclass(frozen=True)
class SteadyState:
    u: float
    v: float
    kind: str
    degenerate: bool = False


@dataclass(frozen=True)
class RegimeThresholds:
    """Parameter thresholds, all expressed as values of a/m."""

    existence_onset: float
    canard: float
    loop_stripe: float
    fold_jump: float
    a_bar_dh: float
    a_bar: float
    a_bar_hyp: float
    loop_gap: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def reaction_terms(u, v, p: ModelParams):
    """Local kinetics (du, dv) of the model; works elementwise on arrays."""
    uv2 = u * v * v
    du = p.a - u - uv2
    dv = -p.m * v + (1.0 - p.b * v) * uv2
    return du, dv


def _v_roots(A: float, b: float, rel_tol: float = 1e-10):
    """Roots of (1 + A b) V^2 - A V + 1 = 0, smaller root first.

    Returns (v1, v2, degenerate) or None when there are no real roots.
    """
    k = 1.0 + A * b
    disc = A * A - 4.0 * k
    if abs(disc) <= rel_tol * A * A:
        v = A / (2.0 * k)
        return v, v, True
    if disc < 0:
        return None
    v2 = (A + math.sqrt(disc)) / (2.0 * k)
    # product of the roots is 1/k; avoids cancellation in A - sqrt(disc)
    v1 = 1.0 / (k * v2)
    return v1, v2, False


def uniform_steady_states(p: ModelParams) -> list[SteadyState]:
    """Desert state plus the vegetated pair when it exists.

    The pair exists iff a/m > 2(b + sqrt(1 + b^2)). At the threshold the two
    coincide and a single state flagged ``degenerate`` is returned.
    """
    states = [SteadyState(p.a, 0.0, DESERT)]
    roots = _v_roots(p.a_over_m, p.b)
    if roots is None:
        return states
    v1, v2, degenerate = roots

    def water(v):
        return p.m * (p.a_over_m - v / (1.0 - p.b * v))

    if degenerate:
        states.append(SteadyState(water(v1), v1, VEGETATED, degenerate=True))
    else:
        states.append(SteadyState(water(v1), v1, VEGETATED_UNSTABLE))
        states.append(SteadyState(water(v2), v2, VEGETATED))
    return states


def vegetated_state(p: ModelParams) -> SteadyState:
    """The (U2, V2) state; raises if it does not exist."""
    for s in uniform_steady_states(p):
        if s.kind == VEGETATED:
            return s
    raise ValueError(f"no vegetated steady state at a/m = {p.a_over_m:.6g}")


def jacobian(u: float, v: float, p: ModelParams) -> np.ndarray:
    """Jacobian of the reaction terms with respect to (u, v)."""
    return np.array(
        [
            [-1.0 - v * v, -2.0 * u * v],
            [(1.0 - p.b * v) * v * v, -p.m + (2.0 - 3.0 * p.b * v) * u * v],
        ]
    )


@dataclass(frozen=True)
class HomogeneousStability:
    trace: float
    det: float
    stable: bool
    eigenvalues: tuple

    def __iter__(self):
        # allows ``trace, det, stable = homogeneous_stability(...)``
        return iter((self.trace, self.det, self.stable))


def homogeneous_stability(s: SteadyState, p: ModelParams) -> HomogeneousStability:
    """Stability of a uniform state against spatially homogeneous perturbations."""
    if s.kind == DESERT:
        eig = (-1.0, -p.m)
        return HomogeneousStability(-1.0 - p.m, p.m, True, eig)
    J = jacobian(s.u, s.v, p)
    tr = float(np.trace(J))
    # closed form avoids the cancellation in J00*J11 - J01*J10
    det = p.m * (-1.0 + 2.0 * p.b * s.v + s.v * s.v) / (1.0 - p.b * s.v)
    eig = tuple(np.sort_complex(np.linalg.eigvals(J)))
    return HomogeneousStability(tr, det, bool(tr < 0 and det > 0), eig)


def a_bar_dh(b: float) -> float:
    """a/m at which the dagger jump-off level u*(a) meets the vegetated state."""
    return (
        2.0 * b
        + 5.0 * math.sqrt(3.0) * b * b / (2.0 * math.sqrt(4.0 + 3.0 * b * b))
        + 8.0 / math.sqrt(12.0 + 9.0 * b * b)
    )


def regime_thresholds(b: float, m: float = 1.0) -> RegimeThresholds:
    """All a/m thresholds for a given b (they do not depend on m)."""
    if b <= 0 or m <= 0:
        raise ValueError("b and m must be positive")
    dh = a_bar_dh(b)
    canard = 4.0 * b + 1.0 / b
    fold_jump = 25.0 * b / 4.0
    if b <= 2.0 / 3.0:
        a_bar, a_bar_hyp = canard, fold_jump
    else:
        a_bar = a_bar_hyp = dh
    return RegimeThresholds(
        existence_onset=2.0 * (b + math.sqrt(1.0 + b * b)),
        canard=canard,
        loop_stripe=4.5 * b,
        fold_jump=fold_jump,
        a_bar_dh=dh,
        a_bar=a_bar,
        a_bar_hyp=a_bar_hyp,
        loop_gap=4.5 * b + 2.0 / b,
    )
