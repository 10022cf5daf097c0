"""Gauss-Legendre collocation for first-order boundary-value problems.

A problem supplies y' = F(x, y; P) on a mesh x_0 < ... < x_N, boundary
conditions g(y(x_0), y(x_N); P) = 0 and a vector P of free scalars. On each
interval the solution is a polynomial of degree s through the node value
y_i and the s stage values Y_ij at the Gauss points; the discrete equations
are those of the s-stage Gauss implicit Runge-Kutta method

    Y_ij = y_i + h_i sum_k A_jk F(Y_ik)
    y_{i+1} = y_i + h_i sum_k b_k F(Y_ik)

which is collocation at the Gauss points (superconvergent of order 2s at the
nodes). Unknowns are ordered interval by interval, [y_i, Y_i1, ..., Y_is],
followed by y_N and P, so the Jacobian is block banded apart from the
boundary rows, the integral rows and the P columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import SolverError


@dataclass(frozen=True)
class Tableau:
    s: int
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    t: np.ndarray  # interpolation nodes [0, c_1, ..., c_s] of the local polynomial
    _coef: np.ndarray = field(repr=False)  # monomial coefficients of the Lagrange basis on t

    def basis(self, tau) -> np.ndarray:
        """Lagrange basis on ``t`` evaluated at tau, shape (len(tau), s+1)."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        powers = tau[:, None] ** np.arange(self.s + 1)[None, :]
        return powers @ self._coef

    def basis_derivative(self, tau) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        k = np.arange(self.s + 1)
        powers = np.where(k[None, :] > 0, k[None, :] * tau[:, None] ** np.maximum(k - 1, 0)[None, :], 0.0)
        return powers @ self._coef


@lru_cache(maxsize=None)
def gauss_tableau(s: int) -> Tableau:
    x, w = np.polynomial.legendre.leggauss(s)
    c = 0.5 * (x + 1.0)
    b = 0.5 * w
    # A_jk = int_0^{c_j} l_k, with l_k the Lagrange polynomials on c
    V = np.vander(c, s, increasing=True)
    coef = np.linalg.inv(V)  # column k holds monomial coefficients of l_k
    powers = np.arange(1, s + 1)
    A = (c[:, None] ** powers[None, :] / powers[None, :]) @ coef
    t = np.r_[0.0, c]
    coef_t = np.linalg.inv(np.vander(t, s + 1, increasing=True))
    return Tableau(s, c, A, b, t, coef_t)


class Problem:
    """Interface of a first-order BVP handled by :class:`CollocationSystem`.

    Subclasses set ``n`` (state dimension), ``n_free`` (length of P) and
    ``n_bc`` and implement ``rhs``, ``rhs_jac`` and ``bc``.
    """

    n: int
    n_free: int
    n_bc: int

    def rhs(self, x, Y, P):  # pragma: no cover - interface
        raise NotImplementedError

    def rhs_jac(self, x, Y, P):  # pragma: no cover - interface
        """Return (F_y of shape (M, n, n), F_P of shape (M, n, n_free))."""
        raise NotImplementedError

    def bc(self, ya, yb, P):  # pragma: no cover - interface
        """Return (g, g_ya, g_yb, g_P)."""
        raise NotImplementedError


@dataclass
class Discrete:
    """Node values, stage values and free scalars on a mesh."""

    x: np.ndarray
    y: np.ndarray  # (N+1, n)
    Y: np.ndarray  # (N, s, n)
    P: np.ndarray
    s: int

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.x)

    @property
    def n(self) -> int:
        return self.y.shape[1]

    def stage_points(self) -> np.ndarray:
        tab = gauss_tableau(self.s)
        return self.x[:-1, None] + self.h[:, None] * tab.c[None, :]

    def local_values(self) -> np.ndarray:
        """(N, s+1, n) array of [y_i, Y_i1..Y_is] per interval."""
        return np.concatenate([self.y[:-1, None, :], self.Y], axis=1)

    def evaluate(self, xq, derivative: bool = False) -> np.ndarray:
        """Evaluate the piecewise collocation polynomial (or its derivative) at xq."""
        xq = np.atleast_1d(np.asarray(xq, dtype=float))
        tab = gauss_tableau(self.s)
        i = np.clip(np.searchsorted(self.x, xq, side="right") - 1, 0, len(self.x) - 2)
        h = self.h[i]
        tau = (xq - self.x[i]) / h
        W = tab.basis_derivative(tau) / h[:, None] if derivative else tab.basis(tau)
        loc = self.local_values()[i]  # (M, s+1, n)
        return np.einsum("mk,mkn->mn", W, loc)

    def pack(self) -> np.ndarray:
        N = self.Y.shape[0]
        body = self.local_values().reshape(N, -1).ravel()
        return np.r_[body, self.y[-1], self.P]

    @classmethod
    def unpack(cls, Z, x, n, s, n_free) -> "Discrete":
        N = len(x) - 1
        m = n * (s + 1)
        body = Z[: N * m].reshape(N, s + 1, n)
        y = np.vstack([body[:, 0, :], Z[N * m : N * m + n][None, :]])
        Y = body[:, 1:, :].copy()
        P = Z[N * m + n : N * m + n + n_free].copy()
        return cls(np.asarray(x, dtype=float), y, Y, P, s)

    def copy(self) -> "Discrete":
        return Discrete(self.x.copy(), self.y.copy(), self.Y.copy(), self.P.copy(), self.s)

    def resample(self, x_new, s: int | None = None) -> "Discrete":
        """Interpolate onto a new mesh (and optionally a new number of stages)."""
        s = self.s if s is None else s
        tab = gauss_tableau(s)
        x_new = np.asarray(x_new, dtype=float)
        h = np.diff(x_new)
        pts = x_new[:-1, None] + h[:, None] * tab.c[None, :]
        Y = self.evaluate(pts.ravel()).reshape(len(h), s, self.n)
        y = self.evaluate(x_new)
        return Discrete(x_new, y, Y, self.P.copy(), s)

    def integrate(self, values_at_stages: np.ndarray) -> float:
        """Gauss quadrature of a quantity given at the stage points (N, s)."""
        tab = gauss_tableau(self.s)
        return float(np.sum(self.h[:, None] * tab.b[None, :] * values_at_stages))


class CollocationSystem:
    """Assembles residual and sparse Jacobian of the collocation equations.

    ``phase_ref`` is an optional reference :class:`Discrete` on the same mesh;
    it adds the integral phase condition int <y - y_ref, y_ref'> = 0.
    ``extra_rows`` holds linear equations ``row @ Z = rhs`` (used by the
    arclength condition of the continuation).
    """

    def __init__(self, problem: Problem, x, s: int = 4, phase_ref: Discrete | None = None):
        self.problem = problem
        self.x = np.asarray(x, dtype=float)
        self.s = s
        self.tab = gauss_tableau(s)
        self.N = len(self.x) - 1
        self.n = problem.n
        self.n_free = problem.n_free
        self.m = self.n * (s + 1)
        self.n_y = self.N * self.m + self.n
        self.size = self.n_y + self.n_free
        self.phase_ref = phase_ref
        self._phase_weights = None
        if phase_ref is not None:
            self._set_phase(phase_ref)
        self.extra_rows: list = []
        n_rows = self.N * self.m + problem.n_bc + (phase_ref is not None)
        self._n_base_rows = n_rows
        self._build_pattern()

    # -- layout -------------------------------------------------------
    def _node_cols(self, i):
        return i * self.m + np.arange(self.n)

    def _stage_cols(self, i, k):
        return i * self.m + self.n + k * self.n + np.arange(self.n)

    def _set_phase(self, ref: Discrete):
        if ref.s != self.s or len(ref.x) != len(self.x) or np.any(ref.x != self.x):
            ref = ref.resample(self.x, self.s)
        tab = self.tab
        h = np.diff(self.x)
        D = tab.basis_derivative(tab.c)  # (s, s+1)
        dref = np.einsum("jk,ikn->ijn", D, ref.local_values()) / h[:, None, None]
        w = h[:, None, None] * tab.b[None, :, None] * dref  # (N, s, n)
        self.phase_ref = ref
        self._phase_weights = w
        self._phase_const = float(np.sum(w * ref.Y))

    def _build_pattern(self):
        N, n, s, m = self.N, self.n, self.s, self.m
        ii = np.arange(N)
        r_n = np.arange(n)
        # stage rows: row(i, j, r) = i*m + j*n + r
        stage_row = ii[:, None, None] * m + np.arange(s)[None, :, None] * n + r_n[None, None, :]
        cont_row = ii[:, None] * m + s * n + r_n[None, :]
        node_col = ii[:, None] * m + r_n[None, :]
        stage_col = ii[:, None, None] * m + n + np.arange(s)[None, :, None] * n + r_n[None, None, :]
        next_col = (ii[:, None] + 1) * m + r_n[None, :]
        rows, cols = [], []
        # dR_stage(i,j,r)/dy_i(r) = -1
        rows.append(stage_row.ravel())
        cols.append(np.broadcast_to(node_col[:, None, :], (N, s, n)).ravel())
        # dR_stage(i,j,r)/dY_ik(q): full (s*n) x (s*n) block per interval
        R = np.broadcast_to(stage_row[:, :, :, None, None], (N, s, n, s, n))
        C = np.broadcast_to(stage_col[:, None, None, :, :], (N, s, n, s, n))
        rows.append(R.ravel())
        cols.append(C.ravel())
        # continuity
        rows.append(cont_row.ravel())
        cols.append(node_col.ravel())
        rows.append(cont_row.ravel())
        cols.append(next_col.ravel())
        R = np.broadcast_to(cont_row[:, :, None, None], (N, n, s, n))
        C = np.broadcast_to(stage_col[:, None, :, :], (N, n, s, n))
        rows.append(R.ravel())
        cols.append(C.ravel())
        # free-parameter columns of the interval rows
        if self.n_free:
            pc = self.n_y + np.arange(self.n_free)
            body_rows = np.arange(N * m)
            rows.append(np.repeat(body_rows, self.n_free))
            cols.append(np.tile(pc, N * m))
        self._body_rows = np.concatenate(rows)
        self._body_cols = np.concatenate(cols)

    # -- assembly -------------------------------------------------------
    def unpack(self, Z) -> Discrete:
        return Discrete.unpack(Z, self.x, self.n, self.s, self.n_free)

    def _eval(self, d: Discrete, with_jac: bool):
        pts = d.stage_points().ravel()
        Yf = d.Y.reshape(-1, self.n)
        F = self.problem.rhs(pts, Yf, d.P).reshape(self.N, self.s, self.n)
        if not with_jac:
            return F, None, None
        Fy, Fp = self.problem.rhs_jac(pts, Yf, d.P)
        return F, Fy.reshape(self.N, self.s, self.n, self.n), Fp.reshape(self.N, self.s, self.n, self.n_free)

    def residual(self, Z) -> np.ndarray:
        d = self.unpack(Z)
        return self._residual_from(Z, d, self._eval(d, False)[0])

    def _residual_from(self, Z, d: Discrete, F) -> np.ndarray:
        tab, h = self.tab, d.h
        Rs = d.Y - d.y[:-1, None, :] - h[:, None, None] * np.einsum("jk,ikn->ijn", tab.A, F)
        Rc = d.y[1:] - d.y[:-1] - h[:, None] * np.einsum("k,ikn->in", tab.b, F)
        body = np.concatenate([Rs.reshape(self.N, -1), Rc], axis=1).ravel()
        g = self.problem.bc(d.y[0], d.y[-1], d.P)[0]
        parts = [body, np.atleast_1d(g)]
        if self._phase_weights is not None:
            parts.append([np.sum(self._phase_weights * d.Y) - self._phase_const])
        for row, rhs in self.extra_rows:
            parts.append([row @ Z - rhs])
        return np.concatenate(parts)

    def jacobian(self, Z) -> sp.csc_matrix:
        d = self.unpack(Z)
        F, Fy, Fp = self._eval(d, True)
        return self._jacobian_from(d, Fy, Fp)

    def residual_and_jacobian(self, Z):
        d = self.unpack(Z)
        F, Fy, Fp = self._eval(d, True)
        return self._residual_from(Z, d, F), self._jacobian_from(d, Fy, Fp)

    def _jacobian_from(self, d: Discrete, Fy, Fp) -> sp.csc_matrix:
        N, n, s = self.N, self.n, self.s
        tab, h = self.tab, d.h
        I = np.eye(n)
        vals = []
        vals.append(np.full(N * s * n, -1.0))
        # d stage(i,j,r) / d Y(i,k,q) = delta_jk delta_rq - h_i A_jk Fy(i,k,r,q)
        blk = -h[:, None, None, None, None] * np.einsum("jk,ikrq->ijrkq", tab.A, Fy)
        for j in range(s):
            blk[:, j, :, j, :] += I
        vals.append(blk.ravel())
        vals.append(np.full(N * n, -1.0))
        vals.append(np.full(N * n, 1.0))
        cblk = -h[:, None, None, None] * np.einsum("k,ikrq->irkq", tab.b, Fy)
        vals.append(cblk.ravel())
        if self.n_free:
            ps = -h[:, None, None, None] * np.einsum("jk,iknp->ijnp", tab.A, Fp)
            pc = -h[:, None, None] * np.einsum("k,iknp->inp", tab.b, Fp)
            body_p = np.concatenate([ps.reshape(N, s * n, self.n_free), pc], axis=1)
            vals.append(body_p.ravel())
        rows = [self._body_rows]
        cols = [self._body_cols]
        data = [np.concatenate(vals)]
        r0 = N * self.m
        g, ga, gb, gp = self.problem.bc(d.y[0], d.y[-1], d.P)
        nb = len(np.atleast_1d(g))
        ga, gb = np.atleast_2d(ga), np.atleast_2d(gb)
        br = r0 + np.arange(nb)
        for blockm, col0 in ((ga, 0), (gb, N * self.m)):
            rr, cc = np.meshgrid(br, col0 + np.arange(n), indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            data.append(blockm.ravel())
        if self.n_free:
            gp = np.atleast_2d(gp).reshape(nb, self.n_free)
            rr, cc = np.meshgrid(br, self.n_y + np.arange(self.n_free), indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            data.append(gp.ravel())
        r = r0 + nb
        if self._phase_weights is not None:
            sc = (np.arange(N)[:, None, None] * self.m + n + np.arange(s)[None, :, None] * n + np.arange(n)[None, None, :])
            rows.append(np.full(sc.size, r))
            cols.append(sc.ravel())
            data.append(self._phase_weights.ravel())
            r += 1
        for row, _ in self.extra_rows:
            nz = np.nonzero(row)[0]
            rows.append(np.full(nz.size, r))
            cols.append(nz)
            data.append(row[nz])
            r += 1
        J = sp.csc_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(r, self.size)
        )
        return J

    # -- diagnostics ----------------------------------------------------
    def defect(self, d: Discrete) -> np.ndarray:
        """Max-norm ODE defect p' - F(p) of the collocation polynomial per interval."""
        tab = self.tab
        tau = np.unique(np.r_[0.0, 0.5 * (tab.c[:-1] + tab.c[1:]), 1.0])
        h = d.h
        L = tab.basis(tau)
        Dm = tab.basis_derivative(tau)
        loc = d.local_values()
        p = np.einsum("tk,ikn->itn", L, loc)
        dp = np.einsum("tk,ikn->itn", Dm, loc) / h[:, None, None]
        pts = d.x[:-1, None] + h[:, None] * tau[None, :]
        F = self.problem.rhs(pts.ravel(), p.reshape(-1, self.n), d.P).reshape(p.shape)
        return np.max(np.abs(dp - F), axis=(1, 2))


def factorize(J):
    """Sparse LU of a collocation Jacobian.

    The unknowns are already ordered interval by interval, so the natural
    column order with threshold pivoting keeps the fill close to banded;
    COLAMD is the fallback when that factorisation is singular.
    """
    J = sp.csc_matrix(J)
    try:
        return spla.splu(J, permc_spec="NATURAL", diag_pivot_thresh=0.1)
    except RuntimeError:
        return spla.splu(J, permc_spec="COLAMD")


@dataclass
class NewtonResult:
    Z: np.ndarray
    iterations: int
    residual: float
    update: float
    converged: bool


def newton(system: CollocationSystem, Z0, tol: float = 1e-10, max_iter: int = 25, verbose: bool = False) -> NewtonResult:
    """Damped Newton iteration with a natural-monotonicity step control.

    Convergence is declared when the max-norm of the full Newton update is
    below ``tol``. A step of length lam is accepted when the simplified
    Newton correction at the trial point (computed with the old factorisation)
    has shrunk by the factor (1 - lam/2).
    """
    Z = np.array(Z0, dtype=float)
    lam = 1.0
    upd = np.inf
    for it in range(1, max_iter + 1):
        R, J = system.residual_and_jacobian(Z)
        try:
            lu = factorize(J)
        except RuntimeError as exc:  # singular factor
            raise SolverError(f"singular Jacobian at Newton iteration {it}: {exc}", float(np.max(np.abs(R))), it)
        dZ = -lu.solve(R)
        upd = float(np.max(np.abs(dZ)))
        if not np.isfinite(upd):
            raise SolverError("non-finite Newton update", float(np.max(np.abs(R))), it)
        if verbose:
            print(f"  newton {it}: |R|={np.max(np.abs(R)):.3e} |dZ|={upd:.3e}")
        if upd < tol:
            Z = Z + dZ
            res = float(np.max(np.abs(system.residual(Z))))
            return NewtonResult(Z, it, res, upd, True)
        lam = min(1.0, 2.0 * lam)
        norm0 = np.linalg.norm(dZ)
        while True:
            Zt = Z + lam * dZ
            Rt = system.residual(Zt)
            if np.all(np.isfinite(Rt)):
                bar = -lu.solve(Rt)
                if np.linalg.norm(bar) <= (1.0 - 0.25 * lam) * norm0 or lam == 1.0 and np.linalg.norm(bar) < norm0:
                    break
            lam *= 0.5
            if lam < 1e-4:
                raise SolverError(
                    "Newton damping failed (step length underflow)", float(np.max(np.abs(R))), it
                )
        Z = Zt
    R = system.residual(Z)
    raise SolverError(
        f"Newton did not converge in {max_iter} iterations (last update {upd:.3e})",
        float(np.max(np.abs(R))),
        max_iter,
    )


def equidistribute(x, density, n_intervals: int) -> np.ndarray:
    """Mesh with n_intervals cells carrying equal integral of a piecewise-constant density."""
    x = np.asarray(x, dtype=float)
    density = np.asarray(density, dtype=float)
    cum = np.r_[0.0, np.cumsum(density * np.diff(x))]
    targets = np.linspace(0.0, cum[-1], n_intervals + 1)
    xn = np.interp(targets, cum, x)
    xn[0], xn[-1] = x[0], x[-1]
    return xn


def adapted_mesh(d: Discrete, defect: np.ndarray, tol: float, s: int, h_max: float, n_min: int = 50,
                 n_max: int = 20000) -> np.ndarray:
    """New mesh on which the predicted defect is about ``tol`` everywhere.

    On interval i the defect behaves like C_i h^s, so a local spacing
    (tol / C_i)^(1/s) is requested; the density is smoothed so that adjacent
    cells differ by at most a factor of about two.
    """
    h = d.h
    C = np.maximum(defect, 1e-300) / h**s
    dens = np.maximum((C / tol) ** (1.0 / s), 1.0 / h_max)
    # limit the growth ratio of the density between neighbours
    for _ in range(3):
        dens = np.maximum(dens, 0.5 * np.r_[dens[1:], dens[-1]])
        dens = np.maximum(dens, 0.5 * np.r_[dens[0], dens[:-1]])
    n_new = int(np.clip(np.ceil(1.2 * np.sum(dens * h)), n_min, n_max))
    return equidistribute(d.x, dens, n_new)
