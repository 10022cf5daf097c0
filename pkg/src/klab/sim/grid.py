"""Method-of-lines integration of the two-dimensional model.

    u_t = D Lap u + (1/eps) u_x + a - u - u v^2
    v_t = Lap v - m v + (1 - b v) u v^2

on [0, Lx] x [0, Ly] with a cell-centred grid. The advection term carries
water towards -x, so u_x is the one-sided difference (u[i+1] - u[i]) / dx;
Laplacians are the five-point stencil. Boundary conditions are ghost-cell
relations: periodic or Neumann in x, Neumann or the oblique corner condition
v_y +/- alpha v_x = 0 in y (+ at y = Ly, - at y = 0). The oblique ghost value
is v(x - alpha dy) at the boundary row, interpolated from the neighbour on
the side the shifted point falls on.

Time stepping is classical RK4 with a fixed step under the advective bound.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from numba import njit, prange

from ..errors import SimulationError
from ..model import ModelParams

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is often too old; the portable layer avoids a warning per process
    numba.config.THREADING_LAYER = "workqueue"

NEG_ABORT = -1e-10
BC_X = ("periodic", "neumann")
BC_Y = ("neumann", "corner")


def configure_threads() -> int:
    """Apply KLAB_THREADS (if set) to the numba thread pool and return the count in use."""
    want = os.environ.get("KLAB_THREADS")
    if want:
        n = max(1, min(int(want), numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(n)
    return numba.get_num_threads()


@dataclass
class SimConfig:
    Lx: float = 200.0
    Ly: float = 100.0
    nx: int = 800
    ny: int = 400
    dt: float | None = None  # None: largest step allowed by the bound times ``safety``
    bc_x: str = "periodic"
    bc_y: str = "neumann"
    alpha: float = 0.0  # corner condition coefficient (bc_y == "corner")
    t_end: float = 200.0
    snapshot_every: float = 10.0
    safety: float = 0.9

    def __post_init__(self):
        if self.bc_x not in BC_X:
            raise ValueError(f"bc_x must be one of {BC_X}, got {self.bc_x!r}")
        if self.bc_y not in BC_Y:
            raise ValueError(f"bc_y must be one of {BC_Y}, got {self.bc_y!r}")
        if not (self.Lx > 0 and self.Ly > 0 and self.nx >= 3 and self.ny >= 1):
            raise ValueError("domain lengths must be positive, nx >= 3 and ny >= 1")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if not (0.0 < self.safety <= 1.0):
            raise ValueError("safety must lie in (0, 1]")
        if self.t_end < 0 or self.snapshot_every <= 0:
            raise ValueError("t_end must be >= 0 and snapshot_every > 0")

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    def dt_bound(self, p: ModelParams) -> float:
        """safety * min(h eps, h^2 / (2 max(1, D) dim)), h the smaller grid spacing."""
        h = min(self.dx, self.dy) if self.ny > 1 else self.dx
        dim = 2 if self.ny > 1 else 1
        return self.safety * min(h * p.eps, h * h / (2.0 * max(1.0, p.D) * dim))

    def time_step(self, p: ModelParams) -> float:
        bound = self.dt_bound(p)
        if self.dt is None:
            return bound
        if self.dt > bound * (1.0 + 1e-12):
            raise ValueError(f"dt = {self.dt:.4g} exceeds the stability bound {bound:.4g}")
        return self.dt

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass
class FieldSnapshot:
    t: float
    u: np.ndarray  # (ny, nx)
    v: np.ndarray
    Lx: float
    Ly: float

    @property
    def nx(self) -> int:
        return self.u.shape[1]

    @property
    def ny(self) -> int:
        return self.u.shape[0]

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.Lx / self.nx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.Ly / self.ny

    def copy(self) -> "FieldSnapshot":
        return FieldSnapshot(self.t, self.u.copy(), self.v.copy(), self.Lx, self.Ly)

    def v_profile(self) -> np.ndarray:
        """y-averaged v."""
        return self.v.mean(axis=0)


@dataclass
class SimulationResult:
    history: list
    steps: int
    dt: float
    zeroed: int = 0  # tiny negative values set to zero
    status: str = "ok"
    info: dict = field(default_factory=dict)

    @property
    def final(self) -> FieldSnapshot:
        return self.history[-1]


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True, inline="always")
def _ghost_y(f, j, i, im, ip, corner, s):
    if not corner:
        return f[j, i]
    if s > 0.0:
        return f[j, i] - s * (f[j, i] - f[j, im])
    return f[j, i] - s * (f[j, ip] - f[j, i])


@njit(parallel=True, cache=True)
def _rhs(u, v, du, dv, a, b, m, inv_eps, D, dx, dy, periodic_x, corner, alpha):
    ny, nx = v.shape
    s = alpha * dy / dx
    idx2 = 1.0 / (dx * dx)
    idy2 = 1.0 / (dy * dy)
    for j in prange(ny):
        for i in range(nx):
            if i + 1 < nx:
                ip = i + 1
            elif periodic_x:
                ip = 0
            else:
                ip = i
            if i > 0:
                im = i - 1
            elif periodic_x:
                im = nx - 1
            else:
                im = i
            vc = v[j, i]
            uc = u[j, i]
            if ny > 1:
                vn = v[j + 1, i] if j + 1 < ny else _ghost_y(v, j, i, im, ip, corner, s)
                vs = v[j - 1, i] if j > 0 else _ghost_y(v, j, i, im, ip, corner, s)
                lap_v = (v[j, ip] - 2.0 * vc + v[j, im]) * idx2 + (vn - 2.0 * vc + vs) * idy2
            else:
                lap_v = (v[j, ip] - 2.0 * vc + v[j, im]) * idx2
            uv2 = uc * vc * vc
            f_u = inv_eps * (u[j, ip] - uc) / dx + a - uc - uv2
            if D > 0.0:
                if ny > 1:
                    un = u[j + 1, i] if j + 1 < ny else _ghost_y(u, j, i, im, ip, corner, s)
                    us = u[j - 1, i] if j > 0 else _ghost_y(u, j, i, im, ip, corner, s)
                    lap_u = (u[j, ip] - 2.0 * uc + u[j, im]) * idx2 + (un - 2.0 * uc + us) * idy2
                else:
                    lap_u = (u[j, ip] - 2.0 * uc + u[j, im]) * idx2
                f_u += D * lap_u
            du[j, i] = f_u
            dv[j, i] = lap_v - m * vc + (1.0 - b * vc) * uv2


@njit(parallel=True, cache=True)
def _axpy(out_u, out_v, u, v, ku, kv, h):
    ny, nx = u.shape
    for j in prange(ny):
        for i in range(nx):
            out_u[j, i] = u[j, i] + h * ku[j, i]
            out_v[j, i] = v[j, i] + h * kv[j, i]


@njit(cache=True)
def _integrate(u, v, dt, nsteps, a, b, m, inv_eps, D, dx, dy, periodic_x, corner, alpha, work):
    """Advance (u, v) in place by nsteps RK4 steps.

    Returns (status, steps_done, zeroed): status 0 ok, 1 non-finite value,
    2 value below the negativity threshold.
    """
    k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v, tu, tv = work
    ny, nx = u.shape
    zeroed = 0
    for n in range(nsteps):
        _rhs(u, v, k1u, k1v, a, b, m, inv_eps, D, dx, dy, periodic_x, corner, alpha)
        _axpy(tu, tv, u, v, k1u, k1v, 0.5 * dt)
        _rhs(tu, tv, k2u, k2v, a, b, m, inv_eps, D, dx, dy, periodic_x, corner, alpha)
        _axpy(tu, tv, u, v, k2u, k2v, 0.5 * dt)
        _rhs(tu, tv, k3u, k3v, a, b, m, inv_eps, D, dx, dy, periodic_x, corner, alpha)
        _axpy(tu, tv, u, v, k3u, k3v, dt)
        _rhs(tu, tv, k4u, k4v, a, b, m, inv_eps, D, dx, dy, periodic_x, corner, alpha)
        c = dt / 6.0
        bad = 0
        for j in range(ny):
            for i in range(nx):
                un = u[j, i] + c * (k1u[j, i] + 2.0 * k2u[j, i] + 2.0 * k3u[j, i] + k4u[j, i])
                vn = v[j, i] + c * (k1v[j, i] + 2.0 * k2v[j, i] + 2.0 * k3v[j, i] + k4v[j, i])
                if not (math.isfinite(un) and math.isfinite(vn)):
                    bad = 1
                elif un < NEG_ABORT or vn < NEG_ABORT:
                    if bad == 0:
                        bad = 2
                tu[j, i] = un
                tv[j, i] = vn
        if bad:
            return bad, n, zeroed
        for j in range(ny):
            for i in range(nx):
                un = tu[j, i]
                vn = tv[j, i]
                if un < 0.0:
                    un = 0.0
                    zeroed += 1
                if vn < 0.0:
                    vn = 0.0
                    zeroed += 1
                u[j, i] = un
                v[j, i] = vn
    return 0, nsteps, zeroed


def _work(shape) -> tuple:
    return tuple(np.empty(shape) for _ in range(10))


def _advance(state: FieldSnapshot, p: ModelParams, cfg: SimConfig, dt: float, nsteps: int, work):
    u, v = state.u, state.v
    status, done, zeroed = _integrate(
        u, v, dt, nsteps, p.a, p.b, p.m, 1.0 / p.eps, p.D, cfg.dx, cfg.dy,
        cfg.bc_x == "periodic", cfg.bc_y == "corner", cfg.alpha, work,
    )
    state.t += done * dt
    return status, done, zeroed


def _check_state(state: FieldSnapshot, cfg: SimConfig):
    if state.u.shape != (cfg.ny, cfg.nx) or state.v.shape != (cfg.ny, cfg.nx):
        raise ValueError(f"field shape {state.u.shape} does not match the grid ({cfg.ny}, {cfg.nx})")


def rhs(state: FieldSnapshot, p: ModelParams, cfg: SimConfig) -> tuple:
    """Right-hand side (u_t, v_t) of the semi-discretisation."""
    _check_state(state, cfg)
    du = np.empty_like(state.u)
    dv = np.empty_like(state.v)
    _rhs(np.ascontiguousarray(state.u, dtype=float), np.ascontiguousarray(state.v, dtype=float), du, dv,
         p.a, p.b, p.m, 1.0 / p.eps, p.D, cfg.dx, cfg.dy, cfg.bc_x == "periodic", cfg.bc_y == "corner", cfg.alpha)
    return du, dv


def step(state: FieldSnapshot, p: ModelParams, cfg: SimConfig) -> FieldSnapshot:
    """One RK4 step; returns a new snapshot."""
    _check_state(state, cfg)
    dt = cfg.time_step(p)
    new = FieldSnapshot(state.t, np.array(state.u, dtype=float), np.array(state.v, dtype=float), cfg.Lx, cfg.Ly)
    status, _, _ = _advance(new, p, cfg, dt, 1, _work(new.u.shape))
    if status:
        raise SimulationError(_STATUS[status], state.copy())
    return new


_STATUS = {1: "non-finite value in the solution", 2: f"value below {NEG_ABORT:g} in the solution"}


def run(state: FieldSnapshot, p: ModelParams, cfg: SimConfig, progress=None) -> SimulationResult:
    """Integrate to cfg.t_end, storing a snapshot every cfg.snapshot_every time units.

    ``progress(snapshot)`` is called at each stored snapshot. On a non-finite
    or negative value a :class:`SimulationError` carrying the last good
    snapshot is raised.
    """
    _check_state(state, cfg)
    dt = cfg.time_step(p)
    cur = FieldSnapshot(state.t, np.array(state.u, dtype=float), np.array(state.v, dtype=float), cfg.Lx, cfg.Ly)
    t0 = cur.t
    history = [cur.copy()]
    work = _work(cur.u.shape)
    total_steps = int(math.ceil(cfg.t_end / dt - 1e-9))
    per_snap = max(1, int(round(cfg.snapshot_every / dt)))
    steps = 0
    zeroed = 0
    while steps < total_steps:
        n = min(per_snap, total_steps - steps)
        last_good = cur.copy()
        status, done, z = _advance(cur, p, cfg, dt, n, work)
        steps += done
        zeroed += z
        if status:
            # replay up to the failing step so the reported state is the last finite one
            good = last_good
            if done:
                _advance(good, p, cfg, dt, done, work)
            raise SimulationError(f"{_STATUS[status]} at t = {good.t + dt:.6g}", good)
        cur.t = t0 + steps * dt  # avoid round-off drift in the clock
        history.append(cur.copy())
        if progress is not None:
            progress(history[-1])
    return SimulationResult(history, steps, dt, zeroed)


def uniform_state(cfg: SimConfig, u: float, v: float, t: float = 0.0) -> FieldSnapshot:
    return FieldSnapshot(t, np.full((cfg.ny, cfg.nx), float(u)), np.full((cfg.ny, cfg.nx), float(v)), cfg.Lx, cfg.Ly)
