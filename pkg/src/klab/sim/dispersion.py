"""Nonlinear and directional dispersion of oblique planar waves.

A wave travelling at angle phi to the slope, xi = x cos(phi) + y sin(phi) - c t,
solves the straight-wave problem with eps replaced by eps / cos(phi). The
speed c(phi) of that problem is the nonlinear dispersion relation and
d(phi) = c(phi) / cos(phi) the directional dispersion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import KlabError
from ..model import ModelParams
from ..tw.waves import solve_wave


@dataclass
class DispersionResult:
    kind: str
    phi: np.ndarray
    c: np.ndarray  # nan where the solve failed
    d: np.ndarray
    c_s: float
    d2_estimate: float  # d''(0) from a least-squares fit d0 + d2/2 phi^2 + d4 phi^4
    c_linear_coef: float  # linear coefficient of a quadratic fit of c(phi) - c_s
    c_quadratic_coef: float
    failures: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failures


def directional_dispersion(p: ModelParams, kind: str, phi_grid, guess=None) -> DispersionResult:
    """c(phi), d(phi) and the curvature d''(0) for a pulse or front family.

    The water diffusion D of ``p`` does not enter the one-dimensional
    problem solved here (it is solved with D = 0). Angles are processed
    outward from phi = 0 so that each solve starts from its neighbour.
    """
    phi = np.asarray(phi_grid, dtype=float)
    if phi.ndim != 1 or phi.size < 3:
        raise ValueError("phi_grid needs at least three angles")
    if np.any(np.abs(phi) >= 0.5 * math.pi):
        raise ValueError("angles must lie in (-pi/2, pi/2)")
    base = p.with_(D=0.0)
    straight = solve_wave(kind, base, guess=guess)
    c_s = straight.c
    c = np.full(phi.size, np.nan)
    failures = []
    order = np.argsort(np.abs(phi), kind="stable")
    prev = {1: straight, -1: straight}
    for i in order:
        ph = phi[i]
        if ph == 0.0:
            c[i] = c_s
            continue
        side = 1 if ph > 0 else -1
        try:
            w = solve_wave(kind, base.with_(eps=p.eps / math.cos(ph)), guess=prev[side])
        except KlabError as exc:
            failures.append((float(ph), str(exc)))
            continue
        c[i] = w.c
        prev[side] = w
    d = c / np.cos(phi)
    ok = np.isfinite(d)
    A = np.vstack([np.ones(ok.sum()), 0.5 * phi[ok] ** 2, phi[ok] ** 4]).T
    coef = np.linalg.lstsq(A, d[ok], rcond=None)[0]
    B = np.vstack([np.ones(ok.sum()), phi[ok], phi[ok] ** 2]).T
    qc = np.linalg.lstsq(B, c[ok] - c_s, rcond=None)[0]
    return DispersionResult(kind, phi, c, d, c_s, float(coef[1]), float(qc[1]), float(qc[2]), failures)
