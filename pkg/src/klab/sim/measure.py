"""Measurements on simulation histories: speed, shape drift and corner geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import KlabError

SLOPE_TOL = 1e-2


class MeasurementError(KlabError, ValueError):
    """The requested feature (level crossing, interface) is absent."""


def _crossings(profile: np.ndarray, x: np.ndarray, level: float, edge: str, periodic: bool) -> np.ndarray:
    """Sub-cell x-positions where ``profile`` crosses ``level`` (edge 'down': decreasing in x)."""
    f = profile - level
    if periodic:
        g = np.r_[f, f[0]]
        xx = np.r_[x, x[-1] + (x[1] - x[0])]
    else:
        g, xx = f, x
    a, b = g[:-1], g[1:]
    if edge == "down":
        idx = np.nonzero((a > 0) & (b <= 0))[0]
    elif edge == "up":
        idx = np.nonzero((a <= 0) & (b > 0))[0]
    else:
        raise ValueError("edge must be 'down' or 'up'")
    t = a[idx] / (a[idx] - b[idx])
    return xx[idx] + t * (xx[idx + 1] - xx[idx])


@dataclass
class SpeedEstimate:
    speed: float
    residual: float  # rms deviation of the positions from the fitted line
    times: np.ndarray
    positions: np.ndarray
    level: float
    edge: str


def interface_track(history, level: float | None = None, edge: str = "down", periodic: bool | None = None,
                    row: int | None = None):
    """Unwrapped position of one level crossing of v (y-averaged, or one grid row) over time."""
    if len(history) < 1:
        raise MeasurementError("empty history")
    first = history[0]
    x = first.x
    Lx = first.Lx
    prof0 = first.v_profile() if row is None else first.v[row]
    level = 0.5 * float(prof0.max()) if level is None else float(level)
    if periodic is None:
        periodic = False
    times, pos = [], []
    prev = None
    for snap in history:
        prof = snap.v_profile() if row is None else snap.v[row]
        cr = _crossings(prof, x, level, edge, periodic)
        if cr.size == 0:
            raise MeasurementError(f"no {edge} crossing of level {level:.4g} at t = {snap.t:.4g}")
        if prev is None:
            pick = cr[np.argmax(cr)] if cr.size > 1 else cr[0]
        else:
            if periodic:
                d = (cr - prev + 0.5 * Lx) % Lx - 0.5 * Lx
                pick = prev + d[np.argmin(np.abs(d))]
            else:
                pick = cr[np.argmin(np.abs(cr - prev))]
        times.append(snap.t)
        pos.append(pick)
        prev = pick
    return np.array(times), np.array(pos), level


def measure_speed(history, level: float | None = None, edge: str = "down", periodic: bool = False) -> SpeedEstimate:
    """Least-squares speed of a level crossing of the y-averaged v.

    ``edge='down'`` follows a crossing where v decreases in x, the leading
    (uphill) edge of a stripe. The default level is half the initial maximum.
    """
    if len(history) < 3:
        raise MeasurementError("at least three snapshots are needed")
    t, xpos, level = interface_track(history, level, edge, periodic)
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, xpos, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - xpos) ** 2)))
    return SpeedEstimate(float(coef[0]), resid, t, xpos, level, edge)


def _shift_profile(x, prof, s, periodic, L):
    """prof evaluated at x + s (linear interpolation)."""
    if periodic:
        return np.interp((x + s) % L, x, prof, period=L)
    return np.interp(x + s, x, prof)


def shape_drift(first, last, anchor_first: float, anchor_last: float, periodic: bool,
                window: float | None = None) -> float:
    """Relative L2 difference of the y-averaged v profiles after aligning the anchors.

    For non-periodic domains the comparison is restricted to +-window around
    the anchor (clipped to the part inside the domain at both times).
    """
    x = first.x
    L = first.Lx
    p0 = first.v_profile()
    p1 = last.v_profile()
    s = anchor_last - anchor_first
    if periodic:
        q1 = _shift_profile(x, p1, s, True, L)
        return float(np.linalg.norm(q1 - p0) / np.linalg.norm(p0))
    window = 40.0 if window is None else window
    mask = (np.abs(x - anchor_first) <= window) & (x + s >= x[0]) & (x + s <= x[-1])
    if mask.sum() < 4:
        raise MeasurementError("comparison window is outside the domain")
    q1 = _shift_profile(x, p1, s, False, L)
    return float(np.linalg.norm((q1 - p0)[mask]) / np.linalg.norm(p0[mask]))


# ---------------------------------------------------------------------------
# corners


@dataclass
class CornerReport:
    """Interface geometry of a (possibly bent) pattern.

    ``h_fit`` is the offset h(y) in v(x, y) = V(x - c t + h(y)), so the
    interface sits at x = const - h(y). eta_minus and eta_plus are slopes of
    h on the lower and upper third of the channel.
    """

    y: np.ndarray
    h_fit: np.ndarray
    eta_plus: float
    eta_minus: float
    classification: str
    measured_speed: float
    leg_residual: float  # rms deviation of h from the straight-leg fits, relative to the kink height
    settled: float  # max change of h - mean(h) over the last two snapshots
    partial: bool = False
    notes: list = field(default_factory=list)


def classify(eta_plus: float, eta_minus: float, tol: float = SLOPE_TOL) -> str:
    """interior (eta+ < eta-), exterior (eta- < eta+), step (equal, nonzero) or hole (both zero)."""
    if abs(eta_plus - eta_minus) <= tol:
        return "hole" if abs(eta_plus) <= tol and abs(eta_minus) <= tol else "step"
    return "interior" if eta_plus < eta_minus else "exterior"


def _row_interface(snap, level, edge, periodic, ref):
    x = snap.x
    pos = np.full(snap.ny, np.nan)
    multi = False
    for j in range(snap.ny):
        cr = _crossings(snap.v[j], x, level, edge, periodic)
        if cr.size == 0:
            continue
        if cr.size > 1:
            multi = True
        if periodic:
            d = (cr - ref + 0.5 * snap.Lx) % snap.Lx - 0.5 * snap.Lx
            pos[j] = ref + d[np.argmin(np.abs(d))]
        else:
            pos[j] = cr[np.argmin(np.abs(cr - ref))]
    return pos, multi


def corner_report(history, p=None, cfg=None, level: float | None = None, edge: str = "down",
                  tol: float = SLOPE_TOL) -> CornerReport:
    """Interface offset h(y), asymptotic slopes and corner class from the last snapshots."""
    if len(history) < 2:
        raise MeasurementError("corner_report needs at least two snapshots")
    periodic = cfg.bc_x == "periodic" if cfg is not None else False
    t, track, level = interface_track(history, level, edge, periodic)
    last, prev = history[-1], history[-2]
    pos, multi = _row_interface(last, level, edge, periodic, track[-1])
    pos_prev, _ = _row_interface(prev, level, edge, periodic, track[-2])
    notes = []
    if multi:
        notes.append("several crossings in some rows; nearest to the mean interface used")
    ok = np.isfinite(pos)
    if ok.sum() < 6:
        raise MeasurementError("interface not found in enough rows")
    y = last.y
    h = -(pos - np.nanmean(pos))
    h_prev = -(pos_prev - np.nanmean(pos_prev))
    ny = last.ny
    third = max(2, ny // 3)
    lower = np.arange(ny) < third
    upper = np.arange(ny) >= ny - third
    fits = {}
    rms = []
    for name, mask in (("minus", lower & ok), ("plus", upper & ok)):
        if mask.sum() < 2:
            raise MeasurementError("interface missing on an outer third of the channel")
        coef = np.polyfit(y[mask], h[mask], 1)
        fits[name] = coef[0]
        rms.append(np.sqrt(np.mean((np.polyval(coef, y[mask]) - h[mask]) ** 2)))
    span = float(np.nanmax(h) - np.nanmin(h))
    leg_res = float(max(rms) / span) if span > 0 else 0.0
    both = ok & np.isfinite(h_prev)
    settled = float(np.max(np.abs(h[both] - h_prev[both]))) if both.any() else math.nan
    eta_plus, eta_minus = float(fits["plus"]), float(fits["minus"])
    speed = float(np.polyfit(t[-min(len(t), 5):], track[-min(len(t), 5):], 1)[0]) if len(t) >= 2 else math.nan
    return CornerReport(y, h, eta_plus, eta_minus, classify(eta_plus, eta_minus, tol), speed, leg_res, settled,
                        partial=bool(multi or not ok.all()), notes=notes)
