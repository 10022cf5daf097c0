"""Melnikov integrals of the layer fronts and critical-eigenvalue predictions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError
from .model import ModelParams, require_no_diffusion
from .singular import (
    DAGGER,
    DIAMOND,
    GAP,
    STRIPE,
    _front_kind,
    _window,
    c_hat,
    c_star,
    decay_rate,
    front_profile,
    front_speed,
    u_hat2,
    u_star,
    v_plus,
)

_TAIL = 36.0  # e^-36 ~ 2e-16


@dataclass(frozen=True)
class MelnikovPair:
    M_c: float
    M_u: float
    kind: str
    u0: float
    c0: float


@dataclass(frozen=True)
class CriticalEigPrediction:
    M_lambda: float
    M_eps: float
    lambda_c: float
    family: str
    ell: float = 0.0


def truncation_radius(kind: str, u0: float, p: ModelParams, c0: float | None = None) -> float:
    """Half-width of the xi interval beyond which the weighted integrands are negligible.

    Uses (40 + 20|c0|)/kappa, widened if the weighted decay rate 2 kappa - |c0|
    is small.
    """
    kappa = decay_rate(u0, p)
    if c0 is None:
        c0 = front_speed(kind, u0, p)
    rate = 2.0 * kappa - abs(c0)
    if rate <= 0:
        raise DomainError(
            f"exponential weight e^(c0 xi) with |c0| = {abs(c0):.6g} does not decay against "
            f"the front tails (2 kappa = {2 * kappa:.6g})"
        )
    return max((40.0 + 20.0 * abs(c0)) / kappa, _TAIL / rate)


def _weighted_integral(f, X: float) -> float:
    opts = dict(epsabs=1e-13, epsrel=1e-13, limit=400)
    left, _ = integrate.quad(f, -X, 0.0, **opts)
    right, _ = integrate.quad(f, 0.0, X, **opts)
    return left + right


def melnikov_integrals(kind: str, u0: float, p: ModelParams) -> MelnikovPair:
    """M^c = int e^{c0 xi} q^2 and M^u = int e^{c0 xi} (1 - b v) v^2 q for a layer front."""
    require_no_diffusion(p)
    kind = _front_kind(kind)
    c0 = front_speed(kind, u0, p)
    X = truncation_radius(kind, u0, p, c0)

    def fc(xi):
        _, q = front_profile(kind, u0, p, xi)
        return math.exp(c0 * xi) * q * q

    def fu(xi):
        v, q = front_profile(kind, u0, p, xi)
        return math.exp(c0 * xi) * (1.0 - p.b * v) * v * v * q

    return MelnikovPair(_weighted_integral(fc, X), _weighted_integral(fu, X), kind, float(u0), c0)


def critical_eig_prediction(family: str, p: ModelParams, ell: float = 0.0) -> CriticalEigPrediction:
    """Leading-order critical eigenvalue lambda_c = -ell^2 - eps M_eps / M_lambda.

    For a stripe the relevant front is the dagger front at u*(a) with weight
    e^{c*(a) xi}; for a gap it is the diamond front at u_hat2(a) with weight
    e^{c_hat(a) xi}.
    """
    require_no_diffusion(p)
    _window(family, p)
    a = p.a
    if family == STRIPE:
        u0 = u_star(a, p)
        pair = melnikov_integrals(DAGGER, u0, p)
        jump = u0 - a + u0 * float(v_plus(u0, p)) ** 2
        c_ref = c_star(a, p)
    elif family == GAP:
        u0 = u_hat2(a, p)
        pair = melnikov_integrals(DIAMOND, u0, p)
        jump = u0 - a
        c_ref = c_hat(a, p)
    else:
        raise ValueError(f"critical eigenvalue prediction is defined for stripe and gap, got {family!r}")
    if not np.isclose(pair.c0, c_ref, rtol=0, atol=1e-10):
        raise DomainError(f"front speed {pair.c0} does not match the family speed {c_ref}")
    M_lambda = pair.M_c
    M_eps = jump * pair.M_u
    lam = -ell * ell - p.eps * M_eps / M_lambda
    return CriticalEigPrediction(M_lambda, M_eps, lam, family, ell)
