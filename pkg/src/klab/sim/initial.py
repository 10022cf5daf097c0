"""Initial fields built from solved one-dimensional waves."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import FieldSnapshot, SimConfig


@dataclass(frozen=True)
class Bend:
    """Tent-shaped offset h0(y) with slope +eta below mid-channel and -eta above it.

    Give either ``alpha`` (the slope eta itself, matching the corner boundary
    condition coefficient) or ``angle`` (eta = tan(angle)).
    """

    alpha: float | None = None
    angle: float | None = None

    def __post_init__(self):
        if (self.alpha is None) == (self.angle is None):
            raise ValueError("give exactly one of alpha or angle")

    @property
    def slope(self) -> float:
        return float(self.alpha) if self.alpha is not None else math.tan(self.angle)

    def offset(self, y: np.ndarray, Ly: float) -> np.ndarray:
        h = self.slope * (0.5 * Ly - np.abs(y - 0.5 * Ly))
        return h - h.mean()


def _anchor(wave) -> float:
    """xi of the steepest v-transition (the front, or the leading edge of a pulse)."""
    xi = np.linspace(wave.xi_grid[0], wave.xi_grid[-1], 20 * len(wave.xi_grid))
    dv = wave.evaluate(xi, derivative=True)[:, 1]
    return float(xi[np.argmax(np.abs(dv))])


def init_from_wave(wave, cfg: SimConfig, bend: Bend | None = None, x0: float | None = None,
                   noise: float = 0.0, seed: int | None = None) -> FieldSnapshot:
    """Extrude a one-dimensional profile along y, optionally bent and perturbed.

    Pulses and fronts are placed with their steepest v-transition at x0
    (default mid-domain) and extended by their end values; the part of the
    profile where v exceeds 1e-3 of its maximum must fit in [0, Lx] (for a
    front only the bent transition has to lie inside the domain). A wave
    train is tiled periodically and needs bc_x = "periodic" with period Lx.
    ``bend`` applies xi -> xi + h0(y). ``noise`` multiplies v by
    1 + noise * N(0, 1) drawn per grid row (seeded).
    """
    x = cfg.x
    y = cfg.y
    h0 = bend.offset(y, cfg.Ly) if bend is not None else np.zeros_like(y)
    if wave.kind == "periodic":
        if cfg.bc_x != "periodic":
            raise ValueError("wave trains need periodic boundary conditions in x")
        if abs(wave.period - cfg.Lx) > 1e-6 * cfg.Lx:
            raise ValueError(f"wave-train period {wave.period:.6g} differs from Lx = {cfg.Lx:.6g}")
        x0 = 0.0 if x0 is None else x0
        xi = (x[None, :] - x0 + h0[:, None]) % wave.period
        vals = wave.evaluate(xi.ravel() + wave.xi_grid[0])
    else:
        x0 = 0.5 * cfg.Lx if x0 is None else x0
        lo, hi = wave.xi_grid[0], wave.xi_grid[-1]
        shift = _anchor(wave) - x0
        vmax = wave.v_max()
        if wave.kind.startswith("front"):
            if x0 - h0.max() < 0.0 or x0 - h0.min() > cfg.Lx:
                raise ValueError(f"front position {x0:.4g} with its bend does not fit in [0, {cfg.Lx:.4g}]")
        else:
            core = wave.xi_grid[wave.v > 1e-3 * vmax] - shift
            if core.size and (core.min() + h0.min() < 0.0 or core.max() + h0.max() > cfg.Lx):
                raise ValueError(
                    f"wave core [{core.min():.4g}, {core.max():.4g}] does not fit in [0, {cfg.Lx:.4g}]"
                )
        xi = x[None, :] + shift + h0[:, None]
        vals = wave.evaluate(np.clip(xi, lo, hi).ravel())
    vals = vals.reshape(cfg.ny, cfg.nx, 3)
    u = vals[:, :, 0].copy()
    v = np.maximum(vals[:, :, 1], 0.0)
    if noise:
        rng = np.random.default_rng(seed)
        v = v * (1.0 + noise * rng.standard_normal(cfg.ny))[:, None]
        v = np.maximum(v, 0.0)
    return FieldSnapshot(0.0, np.ascontiguousarray(u), np.ascontiguousarray(v), cfg.Lx, cfg.Ly)
