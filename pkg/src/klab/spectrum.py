"""Spectral stability of uniform states and traveling waves.

Perturbations e^{lambda t + i ell y} (ubar, vbar)(xi) of a wave (u_s, v_s)
with speed c_s solve, with qbar = vbar',

    ubar' = alpha [(1 + lambda + v_s^2) ubar + 2 u_s v_s vbar],  alpha = eps / (1 + eps c_s)
    vbar' = qbar
    qbar' = -(1 - b v_s) v_s^2 ubar + (m + ell^2 + lambda - (2 - 3 b v_s) u_s v_s) vbar - c_s qbar.

The essential spectrum follows from the constant-coefficient limits of this
system. Point eigenvalues are computed from its collocation discretisation
on the wave's mesh, which is a linear pencil J0 z = lambda M1 z, with
shift-invert Arnoldi iterations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla
from scipy import optimize

from .errors import DomainError, SolverError
from .model import ModelParams, vegetated_state
from .tw.collocation import CollocationSystem, Problem, gauss_tableau

DESERT = "desert"
VEGETATED = "vegetated"

# far-field states seen by each wave kind
FAR_FIELD = {
    "stripe": (DESERT,),
    "gap": (VEGETATED,),
    "front_dv": (DESERT, VEGETATED),
    "front_vd": (DESERT, VEGETATED),
}


# ---------------------------------------------------------------------------
# essential spectrum


@dataclass
class EssentialBoundary:
    """Curves in the complex plane where a far-field matrix has a purely imaginary spatial rate.

    ``curves`` maps a curve name to a complex array of sampled points.
    ``rightmost`` is the supremum of Re lambda over all curves and ``bound``
    the closed-form upper bound it has to respect. ``samples`` is the
    real curve parameter (k for the desert, nu for the vegetated state).
    """

    state: str
    ell: float
    c_s: float
    curves: dict
    rightmost: float
    bound: float
    rightmost_nu: float | None = None
    samples: np.ndarray | None = None


def vegetated_bound(p: ModelParams, ell: float = 0.0) -> float:
    """Closed-form bound: Re lambda <= -min(1 + 1/(4b^2), mu_v + ell^2) on the vegetated boundary."""
    a, b, m = p.a, p.b, p.m
    r = math.sqrt(a * a - 4.0 * m * (m + a * b))
    mu_v = 2.0 * m * (b * r - m) / (2.0 * m + a * b - b * r)
    return -min(1.0 + 1.0 / (4.0 * b * b), mu_v + ell * ell)


def vegetated_dispersion(nu, p: ModelParams, c_s: float, ell: float = 0.0) -> np.ndarray:
    """Both roots lambda(nu) of the vegetated-state dispersion relation, shape (len(nu), 2).

    With spatial rate i nu the far-field determinant reduces to the quadratic
    (alpha (1 + lambda + V^2) - i nu)(i nu c - nu^2 - m - ell^2 - lambda + g)
    - alpha 2 U V (1 - b V) V^2 = 0, g = (2 - 3 b V) U V.
    """
    st = vegetated_state(p)
    U, V = st.u, st.v
    alpha = p.eps / (1.0 + p.eps * c_s)
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    g = (2.0 - 3.0 * p.b * V) * U * V
    K = alpha * 2.0 * U * V * (1.0 - p.b * V) * V * V
    P0 = alpha * (1.0 + V * V) - 1j * nu
    Q0 = 1j * nu * c_s - nu * nu - p.m - ell * ell + g
    # (alpha lam + P0)(Q0 - lam) - K = 0  ->  -alpha lam^2 + (alpha Q0 - P0) lam + P0 Q0 - K = 0
    A2 = -alpha
    A1 = alpha * Q0 - P0
    A0 = P0 * Q0 - K
    disc = np.sqrt(A1 * A1 - 4.0 * A2 * A0 + 0j)
    # numerically stable pair
    sgn = np.where((np.conj(A1) * disc).real >= 0, 1.0, -1.0)
    qq = -0.5 * (A1 + sgn * disc)
    r1 = qq / A2
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(qq != 0, A0 / qq, -A1 / A2 - r1)
    return np.stack([r1, r2], axis=1)


def _vegetated_rightmost(p: ModelParams, c_s: float, ell: float, nu_grid: np.ndarray):
    def neg_re(nu):
        return -float(np.max(vegetated_dispersion([nu], p, c_s, ell).real))

    vals = -np.array([neg_re(nu) for nu in nu_grid]) if nu_grid.size < 50 else np.max(
        vegetated_dispersion(nu_grid, p, c_s, ell).real, axis=1
    )
    best, best_nu = -np.inf, None
    # refine around every local maximum of the sampled curve
    idx = np.nonzero((vals >= np.r_[-np.inf, vals[:-1]]) & (vals >= np.r_[vals[1:], -np.inf]))[0]
    for i in idx:
        lo = nu_grid[max(i - 1, 0)]
        hi = nu_grid[min(i + 1, nu_grid.size - 1)]
        if hi > lo:
            res = optimize.minimize_scalar(neg_re, bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-12 * max(1.0, abs(hi))})
            cand, cand_nu = -res.fun, res.x
            if vals[i] > cand:
                cand, cand_nu = vals[i], nu_grid[i]
        else:
            cand, cand_nu = vals[i], nu_grid[i]
        if cand > best:
            best, best_nu = cand, float(cand_nu)
    return float(best), best_nu


def _nu_grid(alpha: float, n: int) -> np.ndarray:
    # the u-branch winds with Im lambda ~ nu / alpha, the v-branch with nu^2: resolve both scales
    fine = np.linspace(0.0, 40.0 * alpha, n)
    wide = np.geomspace(1e-3, 1e4, n)
    return np.unique(np.r_[fine, wide, np.linspace(0.0, 20.0, n)])


def essential_boundary(state: str, p: ModelParams, c_s: float, ell: float = 0.0,
                       n_samples: int = 4001, k_max: float = 10.0) -> EssentialBoundary:
    """Essential-spectrum boundary of the desert or the vegetated state."""
    alpha = p.eps / (1.0 + p.eps * c_s)
    if state == DESERT:
        k = np.linspace(-k_max, k_max, n_samples)
        line = -1.0 + 1j * k / alpha
        parabola = -p.m - ell * ell - k * k + 1j * c_s * k
        rightmost = -min(p.m + ell * ell, 1.0)
        return EssentialBoundary(DESERT, ell, c_s, {"line": line, "parabola": parabola}, rightmost, rightmost,
                                 samples=k)
    if state != VEGETATED:
        raise ValueError(f"unknown state {state!r}")
    if p.a_over_m <= 4.0 * p.b + 1.0 / p.b:
        raise DomainError(
            f"vegetated essential spectrum needs a/m > 4b + 1/b = {4 * p.b + 1 / p.b:.6g}, got {p.a_over_m:.6g}"
        )
    nu_half = _nu_grid(alpha, n_samples)
    rightmost, nu_star = _vegetated_rightmost(p, c_s, ell, nu_half)
    nu = np.r_[-nu_half[::-1], nu_half[1:]]
    roots = vegetated_dispersion(nu, p, c_s, ell)
    curves = {"branch_u": roots[:, 0], "branch_v": roots[:, 1]}
    return EssentialBoundary(VEGETATED, ell, c_s, curves, rightmost, vegetated_bound(p, ell), nu_star,
                             samples=nu)


def wave_essential_rightmost(kind: str, p: ModelParams, c_s: float, ell: float = 0.0) -> float:
    """Rightmost point of the essential spectrum of a wave (max over its far-field states)."""
    if kind == "periodic":
        raise ValueError("wave trains have no far-field states")
    out = -np.inf
    for state in FAR_FIELD[kind]:
        out = max(out, essential_boundary(state, p, c_s, ell, n_samples=1501).rightmost)
    return out


# ---------------------------------------------------------------------------
# discretised linearisation


class _Linearized(Problem):
    """y' = scale (A(xi) + shift I) y with A the lambda = 0 part (or B, the lambda coefficient)."""

    n = 3
    n_free = 0

    def __init__(self, blocks_at, n_bc: int, bc_rows):
        self.blocks_at = blocks_at
        self.n_bc = n_bc
        self.bc_rows = bc_rows

    def rhs(self, x, Y, P):
        return np.einsum("mij,mj->mi", self.blocks_at(x), Y)

    def rhs_jac(self, x, Y, P):
        return self.blocks_at(x), np.zeros((len(x), 3, 0))

    def bc(self, ya, yb, P):
        ga, gb = self.bc_rows
        return ga @ ya + gb @ yb, ga, gb, np.zeros((self.n_bc, 0))


class LinearizedOperator:
    """Collocation pencil J0 z = lambda M1 z for the perturbation problem about a wave.

    Boundary conditions on the truncated line are ubar(right) = 0 and
    vbar = 0 at both ends; wave trains use periodic conditions (zero Floquet
    exponent). ``eta`` works in the weighted frame e^{eta xi} (y' -> y' + eta y),
    which moves the essential spectrum but not isolated eigenvalues.
    ``refine`` splits each mesh interval into that many equal parts.
    """

    def __init__(self, wave, ell: float = 0.0, eta: float = 0.0, refine: int = 1):
        if wave.params.D != 0:
            raise DomainError("the spectral problem is implemented for D = 0")
        self.wave = wave
        self.p = wave.params
        self.ell = float(ell)
        self.eta = float(eta)
        self.c = float(wave.c)
        self.scale = float(wave.scale)
        d = wave.disc
        x = d.x
        if refine > 1:
            t = np.linspace(0.0, 1.0, refine + 1)[:-1]
            x = np.r_[(x[:-1, None] + np.diff(x)[:, None] * t[None, :]).ravel(), x[-1]]
        self.x = x
        self.s = d.s
        self.alpha = self.p.eps / (1.0 + self.p.eps * self.c)
        if wave.kind == "periodic":
            ga, gb = np.eye(3), -np.eye(3)
        else:
            ga = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
            gb = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        self.bc_rows = (ga, gb)
        sys0 = CollocationSystem(_Linearized(self._blocks, 3, self.bc_rows), x, self.s)
        sysB = CollocationSystem(_Linearized(self._blocks_with_lambda, 3, self.bc_rows), x, self.s)
        z0 = np.zeros(sys0.size)
        self.J0 = sys0.jacobian(z0).tocsc()
        self.M1 = (self.J0 - sysB.jacobian(z0)).tocsc()
        self.M1.eliminate_zeros()
        self.system = sys0
        self.size = sys0.size
        self._lu_cache: dict = {}

    # coefficient matrices in the solver coordinate
    def _wave_values(self, x):
        return self.wave.disc.evaluate(x)

    def _blocks(self, x):
        p, c, al = self.p, self.c, self.alpha
        Y = self._wave_values(x)
        u, v = Y[:, 0], Y[:, 1]
        A = np.zeros((len(x), 3, 3))
        A[:, 0, 0] = al * (1.0 + v * v)
        A[:, 0, 1] = al * 2.0 * u * v
        A[:, 1, 2] = 1.0
        A[:, 2, 0] = -(1.0 - p.b * v) * v * v
        A[:, 2, 1] = p.m + self.ell**2 - (2.0 - 3.0 * p.b * v) * u * v
        A[:, 2, 2] = -c
        if self.eta:
            A += self.eta * np.eye(3)[None]
        return self.scale * A

    def _blocks_with_lambda(self, x):
        A = self._blocks(x)
        A[:, 0, 0] += self.scale * self.alpha
        A[:, 2, 1] += self.scale
        return A

    # -- linear algebra -------------------------------------------------
    def _lu(self, sigma: complex):
        key = complex(sigma)
        if key not in self._lu_cache:
            if key.imag == 0.0:
                A = (self.J0 - key.real * self.M1).tocsc()
            else:
                A = (self.J0.astype(complex) - key * self.M1).tocsc()
            try:
                self._lu_cache[key] = spla.splu(A, permc_spec="NATURAL", diag_pivot_thresh=0.1)
            except RuntimeError:
                self._lu_cache[key] = spla.splu(A, permc_spec="COLAMD")
            if len(self._lu_cache) > 8:
                self._lu_cache.pop(next(iter(self._lu_cache)))
        return self._lu_cache[key]

    def eigs_near(self, sigma: complex, k: int = 10, tol: float = 1e-13):
        """The k eigenvalues nearest to sigma (finite ones only) with eigenvectors."""
        sigma = complex(sigma)
        lu = self._lu(sigma)
        dtype = float if sigma.imag == 0.0 else complex
        M1 = self.M1

        def matvec(x):
            return lu.solve(np.asarray(M1 @ x, dtype=dtype if dtype is complex else np.result_type(x, float)))

        op = spla.LinearOperator((self.size, self.size), matvec=matvec, dtype=dtype)
        k = min(k, self.size - 2)
        rng = np.random.default_rng(12345)
        v0 = rng.standard_normal(self.size).astype(dtype)
        try:
            mu, vecs = spla.eigs(op, k=k, which="LM", tol=tol, v0=v0, maxiter=20 * self.size)
        except spla.ArpackNoConvergence as exc:
            mu, vecs = exc.eigenvalues, exc.eigenvectors
        keep = np.abs(mu) > 1e-300
        lam = sigma + 1.0 / mu[keep]
        return lam, vecs[:, keep]

    def residual(self, lam: complex, z: np.ndarray) -> float:
        """Backward error |J0 z - lam M1 z| / ((|J0| + |lam| |M1|) |z|) in the 1-norm."""
        if not hasattr(self, "_norms"):
            self._norms = (spla.norm(self.J0, 1), spla.norm(self.M1, 1))
        r = self.J0 @ z - lam * (self.M1 @ z)
        denom = (self._norms[0] + abs(lam) * self._norms[1]) * np.linalg.norm(z, 1)
        return float(np.linalg.norm(r, 1) / denom) if denom > 0 else math.inf

    def refine_pair(self, lam: complex, z: np.ndarray, steps: int = 2):
        """Rayleigh-quotient style polishing by inverse iteration at the current estimate."""
        lam = complex(lam)
        z = np.asarray(z, dtype=complex)
        best = (lam, z, self.residual(lam, z))
        for _ in range(steps):
            if best[2] < 1e-13:
                break
            A = (self.J0.astype(complex) - lam * self.M1).tocsc()
            try:
                lu = spla.splu(A, permc_spec="NATURAL", diag_pivot_thresh=0.1)
            except RuntimeError:
                break
            w = lu.solve(self.M1 @ z)
            nrm = np.linalg.norm(w)
            if not np.isfinite(nrm) or nrm == 0:
                break
            z = w / nrm
            Mz = self.M1 @ z
            lam = complex(np.vdot(Mz, self.J0 @ z) / np.vdot(Mz, Mz))
            r = self.residual(lam, z)
            if r < best[2]:
                best = (lam, z, r)
        return best

    # -- eigenvector diagnostics ------------------------------------------
    def stage_values(self, z: np.ndarray) -> np.ndarray:
        d = self.system.unpack(np.asarray(z))
        return d.Y

    def derivative_similarity(self, z: np.ndarray) -> float:
        """|<e, w'>| / (|e| |w'|) in the quadrature inner product, w' the wave's xi-derivative."""
        d = self.system.unpack(np.real_if_close(z) if np.isrealobj(z) else z)
        tab = gauss_tableau(self.s)
        pts = d.stage_points()
        Yw = self._wave_values(pts.ravel())
        p = self.p
        from .tw.problem import tw_rhs

        du, dv, dq = tw_rhs(Yw[:, 0], Yw[:, 1], Yw[:, 2], p.a, p.b, p.m, p.eps, self.c)
        dw = np.stack([du, dv, dq], axis=1).reshape(d.Y.shape)
        if self.eta:
            dw = dw * np.exp(self.eta * self.scale * pts)[:, :, None]
        wts = (d.h[:, None] * tab.b[None, :])[:, :, None]
        e = d.Y
        num = abs(np.sum(wts * np.conj(e) * dw))
        den = math.sqrt(float(np.sum(wts * np.abs(e) ** 2)) * float(np.sum(wts * dw * dw)))
        return float(num / den) if den > 0 else 0.0


# ---------------------------------------------------------------------------
# point spectrum


@dataclass
class Eigenpair:
    value: complex
    residual: float
    similarity: float  # cosine similarity of the eigenfunction with the wave derivative
    in_essential: bool = False  # Re value is not to the right of the essential spectrum
    vector: np.ndarray | None = field(default=None, repr=False)


@dataclass
class SearchRegion:
    """Rectangle re_min <= Re lambda <= re_max, |Im lambda| <= im_max."""

    re_min: float = -0.1
    re_max: float = 1.0
    im_max: float = 2.0


def _dedupe(lams, tol):
    out = []
    for lam in lams:
        if all(abs(lam - o) > tol * max(1.0, abs(lam)) for o in out):
            out.append(lam)
    return out


def _cover(op: LinearizedOperator, box, k: int, depth: int, found: list, notes: list):
    """Collect eigenvalues in box = (re0, re1, im0, im1) with nested shift-invert discs."""
    re0, re1, im0, im1 = box
    center = complex(0.5 * (re0 + re1), 0.5 * (im0 + im1))
    need = 0.5 * math.hypot(re1 - re0, im1 - im0)
    lam, vecs = op.eigs_near(center, k)
    found.extend(zip(lam, vecs.T))
    reach = float(np.max(np.abs(lam - center))) if len(lam) >= k else math.inf
    if reach >= need:
        return
    if depth <= 0:
        notes.append(f"region {box} not fully covered (reach {reach:.3g} < {need:.3g})")
        return
    rm, imm = 0.5 * (re0 + re1), 0.5 * (im0 + im1)
    for sub in ((re0, rm, im0, imm), (rm, re1, im0, imm), (re0, rm, imm, im1), (rm, re1, imm, im1)):
        _cover(op, sub, k, depth - 1, found, notes)


def point_spectrum(wave, p: ModelParams | None = None, ell: float = 0.0,
                   search_region: SearchRegion | None = None, eta: float = 0.0, refine: int = 1,
                   k: int = 12, keep_vectors: bool = False, operator: LinearizedOperator | None = None):
    """Eigenvalues of the linearisation about ``wave`` inside ``search_region``.

    Returns (eigenpairs sorted by decreasing real part, notes). Eigenvalues
    whose real part does not exceed the rightmost essential spectrum are
    flagged ``in_essential``.
    """
    if p is not None and p != wave.params:
        raise ValueError("parameters do not match the wave")
    region = search_region or SearchRegion()
    if eta:
        _check_weight(wave, eta)
    op = operator or LinearizedOperator(wave, ell, eta, refine)
    found: list = []
    notes: list = []
    _cover(op, (region.re_min, region.re_max, 0.0, region.im_max), k, 4, found, notes)
    if wave.kind != "periodic":
        ess = wave_essential_rightmost(wave.kind, wave.params, wave.c, ell)
    else:
        ess = -np.inf
    pairs = []
    seen: list = []
    for lam, z in sorted(found, key=lambda t: -t[0].real):
        if not (region.re_min <= lam.real <= region.re_max and abs(lam.imag) <= region.im_max):
            continue
        if any(abs(lam - o) <= 1e-8 * max(1.0, abs(lam)) for o in seen):
            continue
        lam, z, res = op.refine_pair(lam, z)
        if abs(lam.imag) <= 1e-10 * max(1.0, abs(lam)):
            lam = complex(lam.real, 0.0)
        seen.append(lam)
        sim = op.derivative_similarity(z)
        pair = Eigenpair(lam, res, sim, lam.real <= ess + 1e-6, z if keep_vectors else None)
        pairs.append(pair)
        if abs(lam.imag) > 1e-10 * max(1.0, abs(lam)):
            pairs.append(Eigenpair(lam.conjugate(), res, sim, pair.in_essential,
                                   z.conj() if keep_vectors else None))
    pairs.sort(key=lambda e: (-e.value.real, -e.value.imag))
    if any(e.in_essential for e in pairs):
        notes.append("some eigenvalues lie on or left of the essential spectrum")
    return pairs, notes


def _check_weight(wave, eta: float):
    """Guard: the weight may be at most half the slowest far-field decay rate."""
    if wave.kind == "periodic":
        raise ValueError("exponential weights are not used for wave trains")
    p = wave.params
    alpha = p.eps / (1.0 + p.eps * wave.c)
    r = math.sqrt(wave.c**2 + 4.0 * p.m)
    slowest = min(alpha, (r - abs(wave.c)) / 2.0)
    if abs(eta) > 0.5 * slowest:
        raise ValueError(f"weight {eta} exceeds half the slowest far-field rate {slowest:.3g}")


def critical_eigenvalues(wave, radius: float = 0.05, ell: float = 0.0, refine: int = 1, k: int = 12,
                         operator: LinearizedOperator | None = None):
    """All eigenvalues with |lambda| < radius (the critical ones near the origin)."""
    op = operator or LinearizedOperator(wave, ell, 0.0, refine)
    lam, vecs = op.eigs_near(0.0, k)
    reach = float(np.max(np.abs(lam))) if len(lam) >= k else math.inf
    if reach < radius:
        raise SolverError(f"only {k} eigenvalues within {reach:.3g}; increase k", reach, k)
    out = []
    for l, z in zip(lam, vecs.T):
        if abs(l) < radius:
            l, z, res = op.refine_pair(l, z)
            if abs(l.imag) <= 1e-10 * max(1.0, abs(l)):
                l = complex(l.real, 0.0)
            out.append(Eigenpair(l, res, op.derivative_similarity(z)))
    out.sort(key=lambda e: -e.value.real)
    return out


# ---------------------------------------------------------------------------
# transverse wavenumber scan


@dataclass
class PointSpectrumScan:
    ell_grid: np.ndarray
    eigenvalues: list  # per ell: list of Eigenpair near the origin-shifted window
    lambda0_curve: np.ndarray
    lambdac_curve: np.ndarray
    lambda0_d1: float
    lambda0_d2: float
    max_deviation: float  # max |lambda0(ell) + ell^2 - lambda0(0)| over the grid
    max_real_nonzero_ell: float
    flags: list = field(default_factory=list)

    def as_rows(self):
        for i, ell in enumerate(self.ell_grid):
            yield ell, self.lambda0_curve[i], self.lambdac_curve[i]


def _track(op: LinearizedOperator, targets, k: int):
    """Nearest eigenvalues to each target (shift-invert at the mean of the targets)."""
    center = complex(np.mean(targets))
    lam, vecs = op.eigs_near(center, k)
    picks = []
    for t in targets:
        j = int(np.argmin(np.abs(lam - t)))
        l, z, res = op.refine_pair(lam[j], vecs[:, j])
        picks.append((l, res, lam))
    return picks


def transverse_scan(wave, p: ModelParams | None = None, ell_grid=None, L_M: float = 2.0, k: int = 10,
                    refine: int = 1, fd_step: float = 0.05) -> PointSpectrumScan:
    """Track the translation eigenvalue lambda0(ell) and the second critical eigenvalue lambda_c(ell).

    Branches are followed from ell = 0 by nearest-eigenvalue continuation
    with the predictor lambda(ell) ~ lambda(ell_prev) - (ell^2 - ell_prev^2).
    The spectrum depends on ell^2 only, so the scan runs over |ell| and
    mirrors. lambda0''(0) is estimated by Richardson-extrapolated central
    differences with steps fd_step and 2 fd_step.
    """
    if p is not None and p != wave.params:
        raise ValueError("parameters do not match the wave")
    if ell_grid is None:
        ell_grid = np.linspace(-L_M, L_M, 41)
    ell_grid = np.asarray(ell_grid, dtype=float)
    if np.any(np.abs(ell_grid) > L_M + 1e-12):
        raise ValueError(f"ell grid leaves [-{L_M}, {L_M}]")
    mags = np.unique(np.r_[0.0, fd_step, 2.0 * fd_step, np.abs(ell_grid)])
    crit = critical_eigenvalues(wave, radius=0.05, refine=refine, k=k)
    if len(crit) < 2:
        raise SolverError(f"expected two critical eigenvalues at ell = 0, found {len(crit)}", 0.0, 0)
    lam0 = min(crit, key=lambda e: abs(e.value)).value
    lamc = [e.value for e in crit if e.value != lam0][0]
    cur = {0.0: (lam0, lamc)}
    flags: list = []
    per_ell: dict = {0.0: crit}
    prev_ell, prev = 0.0, (lam0, lamc)
    for ell in mags[1:]:
        shift = ell * ell - prev_ell * prev_ell
        targets = [prev[0] - shift, prev[1] - shift]
        op = LinearizedOperator(wave, ell, 0.0, refine)
        picks = _track(op, targets, k)
        (l0, r0, pool), (lc, rc, _) = picks
        gap = abs(targets[0] - targets[1])
        close = [l for l in pool if abs(l - targets[0]) < 0.5 * gap or abs(l - targets[1]) < 0.5 * gap]
        if abs(l0 - lc) < 1e-12 or len(close) > 2:
            flags.append({"ell": float(ell), "candidates": [complex(c) for c in close]})
        cur[float(ell)] = (l0, lc)
        per_ell[float(ell)] = [Eigenpair(l, float("nan"), float("nan")) for l in pool]
        prev_ell, prev = ell, (l0, lc)
    lambda0 = np.array([cur[float(abs(e))][0] for e in ell_grid])
    lambdac = np.array([cur[float(abs(e))][1] for e in ell_grid])
    f0 = cur[0.0][0].real
    d1 = cur[float(fd_step)][0].real - f0
    d2 = cur[float(2.0 * fd_step)][0].real - f0
    second = 2.0 * (16.0 * d1 - d2) / (12.0 * fd_step**2)
    dev = float(np.max(np.abs(lambda0.real + ell_grid**2 - f0)))
    nonzero = [float(max(e.value.real for e in per_ell[float(abs(l))])) for l in ell_grid if l != 0.0]
    return PointSpectrumScan(
        ell_grid=ell_grid,
        eigenvalues=[per_ell[float(abs(e))] for e in ell_grid],
        lambda0_curve=lambda0,
        lambdac_curve=lambdac,
        lambda0_d1=0.0,  # even in ell by symmetry
        lambda0_d2=float(second),
        max_deviation=dev,
        max_real_nonzero_ell=max(nonzero) if nonzero else math.nan,
        flags=flags,
    )
