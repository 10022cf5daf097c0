"""Independent reference computations used by the test-suite.

Each oracle reaches its value by a route that does not share code with the
library function it checks: root finding instead of closed forms, ODE
shooting instead of explicit profiles, and adjoint integration instead of
quadrature of closed-form integrands.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, optimize


def steady_states_by_roots(a, b, m):
    """Vegetated states from numpy's polynomial roots and U = m / ((1 - bV) V)."""
    A = a / m
    roots = np.roots([1.0 + A * b, -A, 1.0])
    out = []
    for V in sorted(r.real for r in roots if abs(r.imag) < 1e-14 and r.real > 0):
        out.append((m / ((1.0 - b * V) * V), V))
    return out


def v_pm_by_bracketing(u, b, m):
    """Solve (1 - b v) u v = m on either side of the maximum at v = 1/(2b)."""
    f = lambda v: (1.0 - b * v) * u * v - m
    vc = 1.0 / (2.0 * b)
    lo = optimize.brentq(f, 0.0, vc, xtol=1e-15, rtol=1e-15)
    hi = optimize.brentq(f, vc, 1.0 / b, xtol=1e-15, rtol=1e-15)
    return lo, hi


def _speed_diamond(u, b, m):
    return (-math.sqrt(u) + 3.0 * math.sqrt(u - 4 * b * m)) / (2.0 * math.sqrt(2.0 * b))


def u_star_by_matching(a, b, m):
    """Root of c_dagger(u) = c_diamond(a) with u in (4bm, a)."""
    target = _speed_diamond(a, b, m)
    return optimize.brentq(lambda u: -_speed_diamond(u, b, m) - target, 4 * b * m, a, xtol=1e-15, rtol=1e-15)


def shoot_front_speed(kind, u, b, m, c_bracket=(-2.0, 2.0)):
    """Speed of the layer front found by shooting along the unstable manifold.

    For the dagger front we leave (0, 0) and aim at (v+, 0); for the diamond
    front we leave (v+, 0) and aim at (0, 0). The miss is bracketed in c and
    bisected.
    """
    vm, vp = v_pm_by_bracketing(u, b, m)

    def rhs(_, y, c):
        v, q = y
        return [q, m * v - (1.0 - b * v) * u * v * v - c * q]

    def miss(c):
        v0 = 0.0 if kind == "dagger" else vp
        target = vp if kind == "dagger" else -vp
        beta = m - u * v0 * (2.0 - 3.0 * b * v0)
        lam = (-c + math.sqrt(c * c + 4.0 * beta)) / 2.0
        sgn = 1.0 if kind == "dagger" else -1.0
        y0 = [v0 + sgn * 1e-9, sgn * 1e-9 * lam]

        def turn(_, y, c):
            return y[1]

        def escape(_, y, c):
            return sgn * (y[0] - (v0 + target)) - 0.5

        turn.terminal = escape.terminal = True
        sol = integrate.solve_ivp(
            rhs, (0.0, 2000.0), y0, args=(c,), events=[turn, escape], rtol=1e-12, atol=1e-14
        )
        # a trajectory that turns back before the target undershoots, one
        # that runs past it overshoots; the signed miss changes sign at c*
        if sol.t_events[1].size:
            return 1.0
        return sgn * (sol.y[0, -1] - (v0 + target))

    return optimize.brentq(miss, *c_bracket, xtol=1e-10)


def melnikov_adjoint(kind, u0, b, m, c0, profile):
    """Melnikov integrals from the bounded solution of the adjoint layer equation.

    ``profile(xi) -> (v, q)`` supplies the front. The adjoint solution decaying
    at -inf is integrated forward to 0 and the one decaying at +inf backward
    to 0; both are normalised so that psi_2(0) = -q(0), which is the
    normalisation psi = e^{c0 xi} (q', -q).
    """

    def B(xi):
        v, _ = profile(xi)
        return np.array([[0.0, -m + u0 * v * (2.0 - 3.0 * b * v)], [-1.0, c0]])

    vp = v_pm_by_bracketing(u0, b, m)[1]
    kappa = vp * math.sqrt(u0 * b) / (2.0 * math.sqrt(2.0))
    X = 45.0 / (2.0 * kappa - abs(c0))

    def piece(x0, growing):
        # psi = e^{lam xi} phi with lam the far-field rate keeps phi = O(1)
        w, V = np.linalg.eig(B(x0))
        i = np.argmax(w.real) if growing else np.argmin(w.real)
        lam, vec = float(w[i].real), np.real(V[:, i])

        def rhs(xi, y):
            v, q = profile(xi)
            d = (B(xi) - lam * np.eye(2)) @ y[:2]
            w2 = math.exp(lam * xi) * y[1]
            return [d[0], d[1], -q * w2, -(1.0 - b * v) * v * v * w2]

        sol = integrate.solve_ivp(rhs, (x0, 0.0), np.r_[vec, 0.0, 0.0], method="DOP853", rtol=1e-13, atol=1e-16)
        return sol.y[:, -1]

    left = piece(-X, True)
    right = piece(X, False)
    q0 = profile(0.0)[1]
    sL = -q0 / left[1]
    sR = -q0 / right[1]
    mismatch = abs(sL * left[0] - sR * right[0])
    Mc = sL * left[2] - sR * right[2]
    Mu = sL * left[3] - sR * right[3]
    return Mc, Mu, mismatch


def far_field_matrix(U, V, lam, a, b, m, eps, c, ell=0.0):
    """First-order matrix of the linearised comoving PDE about a uniform state.

    Derived directly from u_t = u_x / eps + a - u - u v^2 and
    v_t = v_xx - ell^2 v - m v + (1 - b v) u v^2 with x -> xi = x - c t and
    perturbations ~ e^{lam t}.
    """
    alpha = eps / (1.0 + eps * c)
    return np.array(
        [
            [alpha * (lam + 1.0 + V * V), alpha * 2.0 * U * V, 0.0],
            [0.0, 0.0, 1.0],
            [-(1.0 - b * V) * V * V, lam + m + ell * ell - (2.0 - 3.0 * b * V) * U * V, -c],
        ],
        dtype=complex,
    )


def essential_lambdas_by_det(nu, U, V, a, b, m, eps, c, ell=0.0):
    """Roots lam of det(A(lam) - i nu I) = 0, a quadratic in lam fitted through three samples."""
    alpha = eps / (1.0 + eps * c)
    scale = max(1.0, abs(nu) / alpha, nu * nu)  # roots grow like nu / alpha and nu^2
    pts = np.array([-1.0, 0.0, 1.0])
    vals = [np.linalg.det(far_field_matrix(U, V, scale * l, a, b, m, eps, c, ell) - 1j * nu * np.eye(3))
            for l in pts]
    # quadratic through three samples in the scaled variable
    c0 = vals[1]
    c1 = 0.5 * (vals[2] - vals[0])
    c2 = 0.5 * (vals[2] + vals[0]) - vals[1]
    return scale * np.roots([c2, c1, c0])


def essential_rightmost_by_sampling(U, V, a, b, m, eps, c, ell=0.0, nu_max=None, n=40001):
    """sup Re lam over a dense nu grid, polished with a bounded scalar search."""
    alpha = eps / (1.0 + eps * c)
    nu_max = nu_max if nu_max is not None else 50.0 / alpha
    nu = np.r_[np.linspace(0.0, 20.0, n), np.geomspace(20.0, nu_max, n // 4)]
    f = lambda x: max(r.real for r in essential_lambdas_by_det(x, U, V, a, b, m, eps, c, ell))
    vals = np.array([f(x) for x in nu])
    i = int(np.argmax(vals))
    lo, hi = nu[max(i - 1, 0)], nu[min(i + 1, len(nu) - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        return max(vals[i], -res.fun)
    return vals[i]
