"""The traveling-wave ODE as a collocation problem.

In the comoving coordinate xi = x - c t the profile (u, v, q = v') solves

    u' = eps/(1 + eps c) (u - a + u v^2)
    v' = q
    q' = m v - (1 - b v) u v^2 - c q.

Periodic problems are posed on s in [0, 1] with xi = T s, so the right-hand
side is multiplied by T. Any of (a, c, T) can be a free unknown.
"""
from __future__ import annotations

import math

import numpy as np

from ..model import ModelParams, require_no_diffusion
from ..singular import vegetated_level
from .collocation import Problem

PARAM_NAMES = ("a", "c", "T")

DESERT_LEFT = "desert_left"
DESERT_RIGHT = "desert_right"
VEG_LEFT = "veg_left"
VEG_RIGHT = "veg_right"
PERIODIC = "periodic"

BOUNDARY_KINDS = {
    "stripe": (DESERT_LEFT, DESERT_RIGHT),
    "gap": (VEG_LEFT, VEG_RIGHT),
    "front_dv": (DESERT_LEFT, VEG_RIGHT),
    "front_vd": (VEG_LEFT, DESERT_RIGHT),
    "periodic": (PERIODIC, PERIODIC),
}
_N_ROWS = {DESERT_LEFT: 1, DESERT_RIGHT: 2, VEG_LEFT: 1, VEG_RIGHT: 2}


def tw_rhs(u, v, q, a, b, m, eps, c):
    alpha = eps / (1.0 + eps * c)
    uv2 = u * v * v
    return alpha * (u - a + uv2), q, m * v - (1.0 - b * v) * uv2 - c * q


def tw_jacobian(u, v, q, a, b, m, eps, c):
    """3x3 Jacobian of the traveling-wave vector field (broadcast over leading axes)."""
    alpha = eps / (1.0 + eps * c)
    shape = np.shape(u) + (3, 3)
    J = np.zeros(shape)
    J[..., 0, 0] = alpha * (1.0 + v * v)
    J[..., 0, 1] = alpha * 2.0 * u * v
    J[..., 1, 2] = 1.0
    J[..., 2, 0] = -(1.0 - b * v) * v * v
    J[..., 2, 1] = m - u * v * (2.0 - 3.0 * b * v)
    J[..., 2, 2] = -c
    return J


def desert_rates(c: float, m: float) -> tuple:
    """Fast rates (mu_minus, mu_plus) of v at a desert state: mu^2 + c mu - m = 0."""
    r = math.sqrt(c * c + 4.0 * m)
    return (-c - r) / 2.0, (-c + r) / 2.0


def vegetated_projections(p: ModelParams, a: float, c: float):
    """Equilibrium p+(u2) and left-eigenvector projections of its linearisation.

    Returns (point, W_stable, W_unstable, eigenvalues) where the rows of
    W_stable annihilate the unstable eigenspace (so W_stable (y - p) = 0
    describes E^u) and the rows of W_unstable annihilate E^s.
    """
    u2, v2 = vegetated_level(a, p)
    point = np.array([u2, v2, 0.0])
    J = tw_jacobian(u2, v2, 0.0, a, p.b, p.m, p.eps, c)
    w, VL = np.linalg.eig(J.T)  # columns: left eigenvectors
    order = np.argsort(w.real)
    w, VL = w[order], VL[:, order]
    stable = w.real < 0

    def rows(mask):
        out = []
        cols = VL[:, mask]
        for k in range(cols.shape[1]):
            vec = cols[:, k]
            if abs(vec.imag).max() > 1e-12:
                out.extend([vec.real, vec.imag])
            else:
                out.append(vec.real)
        # deduplicate complex-conjugate pairs
        M = np.array(out)
        if M.shape[0] > mask.sum():
            M = M[: mask.sum()]
        for i in range(M.shape[0]):
            M[i] /= np.linalg.norm(M[i])
            k = np.argmax(np.abs(M[i]))
            if M[i, k] < 0:
                M[i] = -M[i]
        return M

    return point, rows(stable), rows(~stable), w


class TWProblem(Problem):
    """Traveling-wave BVP with a selectable set of free scalars among (a, c, T)."""

    n = 3

    def __init__(self, p: ModelParams, kind: str, values: dict, free=("c",)):
        require_no_diffusion(p)
        if kind not in BOUNDARY_KINDS:
            raise ValueError(f"unknown wave kind {kind!r}")
        for name in free:
            if name not in PARAM_NAMES:
                raise ValueError(f"unknown free parameter {name!r}")
        self.p = p
        self.kind = kind
        self.values = {"a": p.a, "c": 0.0, "T": 1.0}
        self.values.update(values)
        self.free = tuple(free)
        self.n_free = len(self.free)
        left, right = BOUNDARY_KINDS[kind]
        self.left, self.right = left, right
        self.n_bc = 3 if kind == "periodic" else _N_ROWS[left] + _N_ROWS[right]

    def theta(self, P) -> tuple:
        vals = dict(self.values)
        for name, val in zip(self.free, P):
            vals[name] = float(val)
        return vals["a"], vals["c"], vals["T"]

    def P_from_values(self, values: dict | None = None) -> np.ndarray:
        vals = dict(self.values)
        if values:
            vals.update(values)
        return np.array([vals[name] for name in self.free], dtype=float)

    def rhs(self, x, Y, P):
        a, c, T = self.theta(P)
        p = self.p
        du, dv, dq = tw_rhs(Y[:, 0], Y[:, 1], Y[:, 2], a, p.b, p.m, p.eps, c)
        return T * np.stack([du, dv, dq], axis=1)

    def rhs_jac(self, x, Y, P):
        a, c, T = self.theta(P)
        p = self.p
        u, v, q = Y[:, 0], Y[:, 1], Y[:, 2]
        Fy = T * tw_jacobian(u, v, q, a, p.b, p.m, p.eps, c)
        Fp = np.zeros((len(u), 3, self.n_free))
        for k, name in enumerate(self.free):
            if name == "c":
                Fp[:, 0, k] = -T * p.eps**2 / (1.0 + p.eps * c) ** 2 * (u - a + u * v * v)
                Fp[:, 2, k] = -T * q
            elif name == "a":
                Fp[:, 0, k] = -T * p.eps / (1.0 + p.eps * c)
            else:
                du, dv, dq = tw_rhs(u, v, q, a, p.b, p.m, p.eps, c)
                Fp[:, 0, k], Fp[:, 1, k], Fp[:, 2, k] = du, dv, dq
        return Fy, Fp

    # -- boundary conditions ------------------------------------------
    def _side(self, which: str, y, a: float, c: float):
        """Residual rows and their y-derivative for one end."""
        p = self.p
        if which == DESERT_LEFT:
            mu = desert_rates(c, p.m)[1]
            return np.array([y[2] - mu * y[1]]), np.array([[0.0, -mu, 1.0]])
        if which == DESERT_RIGHT:
            mu = desert_rates(c, p.m)[0]
            G = np.array([[1.0, 0.0, 0.0], [0.0, -mu, 1.0]])
            return np.array([y[0] - a, y[2] - mu * y[1]]), G
        point, Ws, Wu, _ = vegetated_projections(p, a, c)
        W = Ws if which == VEG_LEFT else Wu
        return W @ (y - point), W

    def _bc_values(self, ya, yb, P):
        if self.kind == "periodic":
            return ya - yb
        a, c, _ = self.theta(P)
        return np.r_[self._side(self.left, ya, a, c)[0], self._side(self.right, yb, a, c)[0]]

    def bc(self, ya, yb, P):
        if self.kind == "periodic":
            g = ya - yb
            return g, np.eye(3), -np.eye(3), np.zeros((3, self.n_free))
        a, c, _ = self.theta(P)
        gl, Gl = self._side(self.left, ya, a, c)
        gr, Gr = self._side(self.right, yb, a, c)
        g = np.r_[gl, gr]
        ga = np.vstack([Gl, np.zeros((len(gr), 3))])
        gb = np.vstack([np.zeros((len(gl), 3)), Gr])
        gp = np.zeros((len(g), self.n_free))
        for k in range(self.n_free):
            step = 1e-7 * max(1.0, abs(P[k]))
            Pp, Pm = np.array(P, dtype=float), np.array(P, dtype=float)
            Pp[k] += step
            Pm[k] -= step
            gp[:, k] = (self._bc_values(ya, yb, Pp) - self._bc_values(ya, yb, Pm)) / (2.0 * step)
        return g, ga, gb, gp
