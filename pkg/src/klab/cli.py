"""Batch driver: ``klab <command> --config <file.json> [--out-dir <dir>]``.

A config is a JSON object with the keys ``params`` (a, b, m, eps, D),
``options`` (command specific, see ``OPTIONS``), an optional integer
``seed`` and an optional ``command`` that must match the command line.
Unknown keys are rejected. Artifacts are staged in a hidden directory
and moved into the output directory only when the command succeeds, so
a failed run leaves no partial output.

Exit codes: 0 ok, 2 config error, 3 solver failure, 4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import io
from .errors import DomainError, KlabError, SimulationError, SolverError, WindowError
from .model import ModelParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

REQUIRED = object()

_GRID = {
    "Lx": 200.0, "Ly": 100.0, "nx": 800, "ny": 400, "dt": None, "bc_x": "periodic", "bc_y": "neumann",
    "alpha": 0.0, "t_end": 200.0, "snapshot_every": 10.0, "safety": 0.9,
}
_SIM = dict(_GRID, kind=None, state=None, x0=None, noise=0.0, bend_alpha=None, bend_angle=None,
            edge=None, write_snapshots=False, row=None)

OPTIONS = {
    "steady-states": {},
    "singular-diagram": {"a_over_m_min": None, "a_over_m_max": None, "n": 400},
    "solve-wave": {"kind": REQUIRED, "defect_tol": 1e-8},
    "continue": {"kind": REQUIRED, "parameter": "a", "bounds": REQUIRED, "direction": 1.0, "ds": 0.02,
                 "ds_max": 0.15, "max_steps": 200},
    "periodic": {"family": REQUIRED, "mode": "period", "T": None, "T_min": 1e-3, "c_fixed": None,
                 "a_range": None, "ds": 0.02, "ds_max": 0.15, "max_steps": 400},
    "spectrum": {"kind": REQUIRED, "radius": 0.05, "refine": 1, "k": 12, "search": [-0.1, 1.0, 2.0],
                 "scan": False, "L_M": 2.0, "n_ell": 41, "essential_samples": 2001},
    "simulate": _SIM,
    "corner": dict(_SIM, bc_y="corner", alpha=REQUIRED, tol=1e-2),
    "dispersion": {"kind": REQUIRED, "phi_max": 0.6, "n_phi": 13},
    "verify": {"checks": []},
}
COMMANDS = tuple(OPTIONS)
# parameters a command needs (others may be omitted)
_NEEDS = {"singular-diagram": ("b", "m"), "verify": ()}
_TOP_KEYS = {"command", "params", "options", "seed"}


class ConfigError(Exception):
    pass


class VerificationFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# config


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg


def _coerce(name: str, value, default):
    if default is REQUIRED or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"option {name} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"option {name} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"option {name} must be a number")
        return float(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"option {name} must be a string")
    if isinstance(default, list) and not isinstance(value, list):
        raise ConfigError(f"option {name} must be a list")
    return value


def validate(command: str, cfg: dict) -> tuple:
    """(ModelParams or dict of given parameters, options, seed); raises ConfigError."""
    if command not in OPTIONS:
        raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    extra = set(cfg) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(extra))}")
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for command {cfg['command']!r}, not {command!r}")
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    raw = cfg.get("params", {})
    if not isinstance(raw, dict):
        raise ConfigError("params must be an object")
    unknown = set(raw) - {"a", "b", "m", "eps", "D"}
    if unknown:
        raise ConfigError(f"unknown parameters: {', '.join(sorted(unknown))}")
    for k, v in raw.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"parameter {k} must be a number")
    needs = _NEEDS.get(command, ("a", "b", "m", "eps"))
    missing = [k for k in needs if k not in raw]
    if missing:
        raise ConfigError(f"missing parameters: {', '.join(missing)}")
    if set(needs) >= {"a", "b", "m", "eps"}:
        try:
            params = ModelParams(**{k: float(v) for k, v in raw.items()})
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        params = {k: float(v) for k, v in raw.items()}
    spec = OPTIONS[command]
    given = cfg.get("options", {})
    if not isinstance(given, dict):
        raise ConfigError("options must be an object")
    unknown = set(given) - set(spec)
    if unknown:
        raise ConfigError(f"unknown options for {command}: {', '.join(sorted(unknown))}")
    opts = {}
    for name, default in spec.items():
        if name in given:
            opts[name] = _coerce(name, given[name], default)
        elif default is REQUIRED:
            raise ConfigError(f"option {name} is required for {command}")
        else:
            opts[name] = default
    return params, opts, seed


# ---------------------------------------------------------------------------
# staged output


class Run:
    """Output directory with staged artifacts; ``commit`` moves them into place."""

    def __init__(self, out_dir, command: str, config: dict, echo=print):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".klab-stage-", dir=self.out_dir))
        self.manifest = io.Manifest(self.out_dir, command, config)
        self.echo = echo
        self._names: list = []

    @property
    def summary(self) -> dict:
        return self.manifest.summary

    def _record(self, name: str, art: io.Artifact) -> io.Artifact:
        art.path = str(self.out_dir / name)
        self._names.append(name)
        self.manifest.artifacts.append(art)
        return art

    def csv(self, name: str, header, rows, preamble: str | None = None) -> io.Artifact:
        return self._record(name, io.write_csv(self.stage / name, header, rows, preamble))

    def wave(self, name: str, wave) -> io.Artifact:
        return self._record(name, io.wave_dump(self.stage / name, wave))

    def grid(self, name: str, snap) -> io.Artifact:
        return self._record(name, io.write_grid(self.stage / name, snap))

    def note(self, key: str, value):
        self.summary[key] = value
        self.echo(f"{key} = {_show(value)}")

    def commit(self):
        for name in self._names:
            os.replace(self.stage / name, self.out_dir / name)
        self.manifest.write()
        shutil.rmtree(self.stage, ignore_errors=True)
        for art in self.manifest.artifacts:
            self.echo(art.manifest_line())

    def discard(self):
        shutil.rmtree(self.stage, ignore_errors=True)


def _show(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


# ---------------------------------------------------------------------------
# commands


def cmd_steady_states(p: ModelParams, o: dict, run: Run, seed: int):
    from .model import homogeneous_stability, uniform_steady_states

    rows = []
    for s in uniform_steady_states(p):
        st = homogeneous_stability(s, p)
        rows.append((s.kind, s.u, s.v, st.trace, st.det, st.stable, s.degenerate))
    run.csv("steady_states.csv", ("kind", "u", "v", "trace", "det", "stable", "degenerate"), rows)
    run.note("n_states", len(rows))


def cmd_singular_diagram(p: dict, o: dict, run: Run, seed: int):
    from .model import regime_thresholds
    from .singular import singular_bifurcation_diagram

    b, m = p["b"], p["m"]
    grid = None
    if o["a_over_m_min"] is not None or o["a_over_m_max"] is not None:
        th = regime_thresholds(b, m)
        lo = o["a_over_m_min"] if o["a_over_m_min"] is not None else min(th.loop_stripe, th.existence_onset)
        hi = o["a_over_m_max"] if o["a_over_m_max"] is not None else 1.25 * th.loop_gap
        if not lo < hi:
            raise ConfigError("a_over_m_min must be below a_over_m_max")
        grid = np.linspace(lo, hi, o["n"])
    pts = singular_bifurcation_diagram(b, m, grid, n=o["n"])
    run.csv("diagram.csv", ("family", "a_over_m", "c", "window_flag"),
            ((q.family, q.a_over_m, q.c, q.window_flag) for q in pts))
    th = regime_thresholds(b, m)
    for k, v in th.as_dict().items():
        run.note(f"threshold_{k}", v)


def _singular_speed(kind: str, p: ModelParams) -> float:
    from .singular import build_singular_orbit

    return float(build_singular_orbit(kind, p).speed)


def cmd_solve_wave(p: ModelParams, o: dict, run: Run, seed: int):
    from .tw.waves import SolveOptions, solve_wave

    wave = solve_wave(o["kind"], p, opts=SolveOptions(defect_tol=o["defect_tol"]))
    run.wave("wave.csv", wave)
    c_sing = _singular_speed(o["kind"], p)
    run.note("kind", o["kind"])
    run.note("eps", p.eps)
    run.note("c", wave.c)
    run.note("c_singular", c_sing)
    run.note("n_nodes", wave.n_nodes)
    run.note("biomass", wave.biomass())


def _branch_rows(branch):
    flags = set(branch.fold_flags)
    for i, pt in enumerate(branch.points):
        yield pt.parameter, pt.c, pt.T, pt.B, pt.v_max, i in flags


_BRANCH_HEADER = ("parameter", "c", "T", "B", "v_max", "fold_flag")


def _cont_opts(o: dict, **extra):
    from .tw.continuation import ContinuationOptions

    return ContinuationOptions(ds=o["ds"], ds_max=o["ds_max"], max_steps=o["max_steps"], **extra)


def _pair(o: dict, name: str) -> tuple:
    val = o[name]
    if not (isinstance(val, list) and len(val) == 2 and all(isinstance(x, (int, float)) for x in val)):
        raise ConfigError(f"option {name} must be a list of two numbers")
    lo, hi = float(val[0]), float(val[1])
    if not lo < hi:
        raise ConfigError(f"option {name} must be increasing")
    return lo, hi


def cmd_continue(p: ModelParams, o: dict, run: Run, seed: int):
    from .tw.continuation import continue_wave
    from .tw.waves import solve_wave

    if o["parameter"] != "a":
        raise ConfigError("pulses and fronts are continued in a only")
    bounds = _pair(o, "bounds")
    start = solve_wave(o["kind"], p)
    br = continue_wave(start, "a", bounds, _cont_opts(o), o["direction"])
    run.csv("branch.csv", _BRANCH_HEADER, _branch_rows(br))
    run.note("points", len(br.points))
    run.note("folds", len(br.fold_flags))
    run.note("status", br.status)
    run.note("message", br.message)


def cmd_periodic(p: ModelParams, o: dict, run: Run, seed: int):
    from .tw.periodic import continue_in_period, start_wave_train, wave_train_at_period, wavenumber_sweep

    family = o["family"]
    if family not in ("stripe", "gap"):
        raise ConfigError("family must be stripe or gap")
    if o["mode"] == "period":
        start = start_wave_train(p, family)
        br = continue_in_period(start, T_min=o["T_min"], opts=_cont_opts(o, stop_at_fold=True))
        run.csv("branch.csv", _BRANCH_HEADER, _branch_rows(br))
        run.wave("wave.csv", start)
        if o["T"] is not None:
            run.wave("wave_T.csv", wave_train_at_period(p, family, o["T"]))
        T = br.column("T")
        run.note("T_start", float(T[0]))
        run.note("T_end", float(T[-1]))
        run.note("message", br.message)
        for col in ("c", "B", "v_max"):
            vals = br.column(col)
            run.note(f"{col}_monotone", bool(np.all(np.diff(vals) <= 1e-12 * np.abs(vals[:-1]).max())))
    elif o["mode"] == "wavenumber":
        if o["c_fixed"] is None or o["a_range"] is None:
            raise ConfigError("wavenumber mode needs c_fixed and a_range")
        start = start_wave_train(p, family)
        res = wavenumber_sweep(start, float(o["c_fixed"]), _pair(o, "a_range"), _cont_opts(o))
        rows = []
        for br in reversed(res["branches"]):
            rows.extend(_branch_rows(br))
        run.csv("branch.csv", _BRANCH_HEADER, rows)
        run.note("c_fixed", res["c"])
        run.note("a_span", f"[{res['a'].min():.6g}, {res['a'].max():.6g}]")
    else:
        raise ConfigError("mode must be 'period' or 'wavenumber'")


def cmd_spectrum(p: ModelParams, o: dict, run: Run, seed: int):
    from .melnikov import critical_eig_prediction
    from .spectrum import (
        FAR_FIELD,
        LinearizedOperator,
        SearchRegion,
        critical_eigenvalues,
        essential_boundary,
        point_spectrum,
        transverse_scan,
    )
    from .tw.waves import solve_wave

    kind = o["kind"]
    if kind not in FAR_FIELD:
        raise ConfigError(f"kind must be one of {', '.join(FAR_FIELD)}")
    search = o["search"]
    if len(search) != 3:
        raise ConfigError("search must be [re_min, re_max, im_max]")
    wave = solve_wave(kind, p)
    op = LinearizedOperator(wave, 0.0, 0.0, o["refine"])
    crit = critical_eigenvalues(wave, radius=o["radius"], refine=o["refine"], k=o["k"], operator=op)
    pairs, notes = point_spectrum(wave, search_region=SearchRegion(*map(float, search)), k=o["k"], operator=op)
    rows = [(0.0, "critical", e.value.real, e.value.imag, e.residual) for e in crit]
    rows += [(0.0, "point", e.value.real, e.value.imag, e.residual) for e in pairs]
    if o["scan"]:
        scan = transverse_scan(wave, L_M=o["L_M"], ell_grid=np.linspace(-o["L_M"], o["L_M"], o["n_ell"]),
                               refine=o["refine"])
        for ell, l0, lc in scan.as_rows():
            rows.append((ell, "lambda0", l0.real, l0.imag, math.nan))
            rows.append((ell, "lambdac", lc.real, lc.imag, math.nan))
        run.note("lambda0_d2", scan.lambda0_d2)
        run.note("lambda0_max_deviation", scan.max_deviation)
        run.note("scan_flags", len(scan.flags))
    run.csv("scan.csv", ("ell", "branch", "re_lambda", "im_lambda", "residual"), rows)
    ess_rows = []
    for state in FAR_FIELD[kind]:
        try:
            eb = essential_boundary(state, p, wave.c, 0.0, n_samples=o["essential_samples"])
        except DomainError as exc:
            run.note(f"essential_{state}", f"skipped: {exc}")
            continue
        for cid, pts in eb.curves.items():
            ess_rows.extend((state, 0.0, cid, s, z.real, z.imag) for s, z in zip(eb.samples, pts))
        run.note(f"essential_rightmost_{state}", eb.rightmost)
    run.csv("essential.csv", ("state", "ell", "curve_id", "k_or_nu", "re", "im"), ess_rows)
    run.note("c", wave.c)
    run.note("n_critical", len(crit))
    if crit:
        lam0 = min(crit, key=lambda e: abs(e.value))
        run.note("lambda0", lam0.value.real)
        run.note("lambda0_similarity", lam0.similarity)
        others = [e for e in crit if e is not lam0]
        if others:
            run.note("lambda_c", others[0].value.real)
    if kind in ("stripe", "gap"):
        pred = critical_eig_prediction(kind, p)
        run.csv("melnikov.csv", ("family", "a", "b", "m", "eps", "M_lambda", "M_eps", "lambda_c"),
                [(kind, p.a, p.b, p.m, p.eps, pred.M_lambda, pred.M_eps, pred.lambda_c)])
        run.note("lambda_c_predicted", pred.lambda_c)
    for n in notes:
        run.echo(f"note: {n}")


def _sim_setup(p: ModelParams, o: dict, seed: int, corner: bool):
    from .sim import Bend, SimConfig, init_from_wave, uniform_state
    from .tw.periodic import wave_train_at_period
    from .tw.waves import solve_wave

    grid = {k: o[k] for k in _GRID}
    for k in ("Lx", "Ly", "t_end", "snapshot_every", "safety", "alpha"):
        grid[k] = float(grid[k])
    if corner:
        grid["bc_y"] = "corner"
    try:
        cfg = SimConfig(**grid)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if o["kind"] is None:
        from .model import uniform_steady_states

        states = {s.kind: s for s in uniform_steady_states(p)}
        if o["state"] not in states:
            raise ConfigError(f"state must be one of {', '.join(states)} when no kind is given")
        s = states[o["state"]]
        return cfg, uniform_state(cfg, s.u, s.v), None
    kind = o["kind"]
    if kind in ("stripe", "gap") and cfg.bc_x == "periodic":
        wave = wave_train_at_period(p.with_(D=0.0), kind, cfg.Lx)
    else:
        wave = solve_wave(kind, p.with_(D=0.0))
    bend = None
    if o["bend_alpha"] is not None or o["bend_angle"] is not None:
        bend = Bend(alpha=o["bend_alpha"], angle=o["bend_angle"])
    elif corner:
        bend = Bend(alpha=cfg.alpha)
    try:
        state = init_from_wave(wave, cfg, bend, o["x0"], o["noise"], seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg, state, wave


def _default_edge(kind):
    return "up" if kind == "front_dv" else "down"


def _simulate(p: ModelParams, o: dict, run: Run, seed: int, corner: bool):
    from .sim import configure_threads, interface_track, measure_speed, run as integrate, shape_drift

    run.note("threads", configure_threads())
    cfg, state, wave = _sim_setup(p, o, seed, corner)
    try:
        res = integrate(state, p, cfg)
    except SimulationError as exc:
        if exc.last_good is not None:
            run.grid("last_good.klgrid", exc.last_good)
        raise
    periodic = cfg.bc_x == "periodic"
    run.note("steps", res.steps)
    run.note("dt", res.dt)
    run.note("zeroed", res.zeroed)
    run.csv("spacetime.csv", ("t", "x", "u", "v"), io.space_time_rows(res.history, o["row"]))
    run.grid("final.klgrid", res.final)
    if o["write_snapshots"]:
        for i, snap in enumerate(res.history):
            run.grid(f"snapshot_{i:04d}.klgrid", snap)
    if wave is None:
        run.note("max_change_u", float(np.max(np.abs(res.final.u - state.u))))
        run.note("max_change_v", float(np.max(np.abs(res.final.v - state.v))))
        return cfg, res, wave
    edge = o["edge"] or _default_edge(o["kind"])
    est = measure_speed(res.history, edge=edge, periodic=periodic)
    t, xpos, _ = interface_track(res.history, est.level, edge, periodic)
    drift = shape_drift(res.history[0], res.final, xpos[0], xpos[-1], periodic)
    run.note("bvp_speed", wave.c)
    run.note("measured_speed", est.speed)
    run.note("speed_rel_error", (est.speed - wave.c) / abs(wave.c) if wave.c else math.nan)
    run.note("shape_drift", drift)
    return cfg, res, wave


def cmd_simulate(p: ModelParams, o: dict, run: Run, seed: int):
    _simulate(p, o, run, seed, corner=False)


def cmd_corner(p: ModelParams, o: dict, run: Run, seed: int):
    from .sim import corner_report

    if o["kind"] is None:
        raise ConfigError("corner needs a wave kind")
    cfg, res, wave = _simulate(p, o, run, seed, corner=True)
    rep = corner_report(res.history, p, cfg, edge=o["edge"] or _default_edge(o["kind"]), tol=o["tol"])
    run.csv("corner.csv", ("y", "h"), zip(rep.y, rep.h_fit))
    run.note("eta_plus", rep.eta_plus)
    run.note("eta_minus", rep.eta_minus)
    run.note("classification", rep.classification)
    run.note("leg_residual", rep.leg_residual)
    run.note("settled", rep.settled)
    run.note("corner_speed", rep.measured_speed)


def cmd_dispersion(p: ModelParams, o: dict, run: Run, seed: int):
    from .sim import directional_dispersion

    phi = np.linspace(-o["phi_max"], o["phi_max"], o["n_phi"])
    res = directional_dispersion(p, o["kind"], phi)
    run.csv("dispersion.csv", ("phi", "c", "d"), zip(res.phi, res.c, res.d))
    run.note("c_s", res.c_s)
    run.note("d2_estimate", res.d2_estimate)
    run.note("d2_sign_matches_c_s", bool(np.sign(res.d2_estimate) == np.sign(res.c_s)))
    run.note("failures", len(res.failures))


# ---------------------------------------------------------------------------
# verification


def _prior(base: Path, ref: str) -> tuple:
    d = (base / ref).resolve()
    try:
        man = io.load_manifest(d)
    except FileNotFoundError:
        raise VerificationFailure(f"missing artifacts: no manifest in {d}") from None
    bad = io.check_artifacts(d, man)
    if bad:
        raise VerificationFailure("; ".join(f"{path}: {why}" for path, why in bad))
    return d, man


def _need(summary: dict, key: str, where) -> float:
    if key not in summary:
        raise VerificationFailure(f"{where}: summary has no {key}")
    return float(summary[key])


def _check(kind: str, spec: dict, base: Path) -> dict:
    if kind == "checksums":
        d, man = _prior(base, spec["dir"])
        return {"check": kind, "passed": True, "measured": len(man["artifacts"]), "tolerance": 0,
                "detail": str(d)}
    if kind == "melnikov-spectrum":
        d, man = _prior(base, spec["dir"])
        num = _need(man["summary"], "lambda_c", d)
        pred = _need(man["summary"], "lambda_c_predicted", d)
        err = abs(num - pred) / abs(pred)
        tol = float(spec.get("tol", 0.3))
        return {"check": kind, "passed": err <= tol, "measured": err, "tolerance": tol,
                "detail": f"lambda_c = {num:.6g}, predicted {pred:.6g}"}
    if kind == "sim-speed":
        d, man = _prior(base, spec["dir"])
        err = abs(_need(man["summary"], "speed_rel_error", d))
        tol = float(spec.get("tol", 0.05))
        return {"check": kind, "passed": err <= tol, "measured": err, "tolerance": tol, "detail": str(d)}
    if kind == "singular-speed":
        runs = []
        for ref in spec["dirs"]:
            d, man = _prior(base, ref)
            s = man["summary"]
            runs.append((_need(s, "eps", d), abs(_need(s, "c", d) - _need(s, "c_singular", d))))
        runs.sort(reverse=True)
        errs = [e for _, e in runs]
        ok = len(errs) >= 2 and all(b < a for a, b in zip(errs, errs[1:]))
        return {"check": kind, "passed": ok, "measured": errs[-1] if errs else math.nan, "tolerance": 0,
                "detail": "errors " + ", ".join(f"{e:.4g}" for e in errs)}
    raise ConfigError(f"unknown check {kind!r}")


_CHECK_KEYS = {
    "checksums": {"check", "dir"},
    "melnikov-spectrum": {"check", "dir", "tol"},
    "sim-speed": {"check", "dir", "tol"},
    "singular-speed": {"check", "dirs"},
}


def cmd_verify(p, o: dict, run: Run, seed: int, base: Path = Path(".")):
    checks = o["checks"]
    for c in checks:
        if not isinstance(c, dict) or c.get("check") not in _CHECK_KEYS:
            raise ConfigError(f"each check needs 'check' set to one of {', '.join(_CHECK_KEYS)}")
        extra = set(c) - _CHECK_KEYS[c["check"]]
        missing = _CHECK_KEYS[c["check"]] - set(c) - {"tol"}
        if extra or missing:
            raise ConfigError(f"check {c['check']}: unknown keys {sorted(extra)}, missing {sorted(missing)}")
    results = []
    for c in checks:
        try:
            r = _check(c["check"], c, base)
        except VerificationFailure as exc:
            r = {"check": c["check"], "passed": False, "measured": math.nan, "tolerance": math.nan,
                 "detail": str(exc)}
        results.append(r)
        run.echo(f"{'PASS' if r['passed'] else 'FAIL'} {r['check']}: measured {_show(r['measured'])}, "
                 f"tolerance {_show(r['tolerance'])} ({r['detail']})")
    run.csv("verify.csv", ("check", "passed", "measured", "tolerance", "detail"),
            ((r["check"], r["passed"], r["measured"], r["tolerance"], r["detail"].replace(",", ";"))
             for r in results))
    run.manifest.checks = results
    run.note("checks", len(results))
    failed = [r["check"] for r in results if not r["passed"]]
    run.note("failed", len(failed))
    return failed


HANDLERS = {
    "steady-states": cmd_steady_states,
    "singular-diagram": cmd_singular_diagram,
    "solve-wave": cmd_solve_wave,
    "continue": cmd_continue,
    "periodic": cmd_periodic,
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "corner": cmd_corner,
    "dispersion": cmd_dispersion,
    "verify": cmd_verify,
}


def execute(command: str, config_path, out_dir, echo=print) -> int:
    """Run one command; returns the exit status."""
    err = lambda msg: print(msg, file=sys.stderr)
    try:
        cfg = load_config(config_path)
        params, opts, seed = validate(command, cfg)
    except ConfigError as exc:
        err(f"config error: {exc}")
        return EXIT_CONFIG
    run = Run(out_dir, command, cfg, echo)
    failed = None
    try:
        if command == "verify":
            failed = cmd_verify(params, opts, run, seed, Path(config_path).resolve().parent)
        else:
            HANDLERS[command](params, opts, run, seed)
    except ConfigError as exc:
        run.discard()
        err(f"config error: {exc}")
        return EXIT_CONFIG
    except WindowError as exc:
        run.discard()
        name = f" [threshold {exc.threshold}]" if exc.threshold else ""
        err(f"precondition violated{name}: {exc}")
        return EXIT_CONFIG
    except (SolverError, SimulationError) as exc:
        if isinstance(exc, SimulationError) and run._names:
            run.commit()  # keep the last good snapshot
        else:
            run.discard()
        err(f"solver failure: {exc}")
        return EXIT_SOLVER
    except (DomainError, ValueError) as exc:
        run.discard()
        err(f"precondition violated: {exc}")
        return EXIT_CONFIG
    except KlabError as exc:
        run.discard()
        err(f"solver failure: {exc}")
        return EXIT_SOLVER
    except BaseException:
        run.discard()
        raise
    run.commit()
    if failed:
        err(f"verification failed: {', '.join(failed)}")
        return EXIT_VERIFY
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="klab", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON experiment config")
    ap.add_argument("--out-dir", default="klab_out", help="directory for artifacts (default: ./klab_out)")
    args = ap.parse_args(argv)
    return execute(args.command, args.config, args.out_dir)


if __name__ == "__main__":
    sys.exit(main())
