"""Artifact writers: CSV tables, wave dumps, binary grids and the run manifest.

Every file is written to a temporary sibling and moved into place with
os.replace, so a reader never sees a partial artifact. Floats are written
with 17 significant digits, which makes identical runs byte-identical.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

GRID_MAGIC = b"KLGRID1"
_GRID_HEADER = struct.Struct("<IIddd")
MANIFEST_NAME = "manifest.json"


@dataclass
class Artifact:
    path: str
    rows: int | None
    bytes: int
    sha256: str

    def manifest_line(self) -> str:
        rows = "-" if self.rows is None else str(self.rows)
        return f"artifact {self.path} rows={rows} bytes={self.bytes} sha256={self.sha256}"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_bytes(path, data: bytes) -> Artifact:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return Artifact(str(path), None, len(data), hashlib.sha256(data).hexdigest())


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "nan" if np.isnan(x) else format(float(x), ".17g")
    return str(x)


def csv_text(header, rows, preamble: str | None = None) -> tuple:
    lines = []
    if preamble:
        lines.append(preamble)
    lines.append(",".join(header))
    n = 0
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        lines.append(",".join(fmt(v) for v in row))
        n += 1
    return "\n".join(lines) + "\n", n


def write_csv(path, header, rows, preamble: str | None = None) -> Artifact:
    text, n = csv_text(header, rows, preamble)
    art = atomic_write_bytes(path, text.encode())
    art.rows = n
    return art


def read_csv(path) -> tuple:
    """(header, rows as lists of strings), skipping '#' comment lines."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:] if ln]


# ---------------------------------------------------------------------------
# specific formats


def wave_dump(path, wave) -> Artifact:
    """Header comment with the wave metadata, then xi,u,v,q at the mesh nodes."""
    p = wave.params
    T = wave.period if wave.period is not None else float("nan")
    pre = (
        f"# kind={wave.kind},a={fmt(p.a)},b={fmt(p.b)},m={fmt(p.m)},eps={fmt(p.eps)},"
        f"c={fmt(wave.c)},T={fmt(T)},n_nodes={wave.n_nodes}"
    )
    xi = wave.xi_grid
    rows = zip(xi, wave.u, wave.v, wave.q)
    return write_csv(path, ("xi", "u", "v", "q"), rows, preamble=pre)


def grid_bytes(snap) -> bytes:
    ny, nx = snap.u.shape
    head = GRID_MAGIC + _GRID_HEADER.pack(nx, ny, float(snap.t), float(snap.Lx), float(snap.Ly))
    u = np.ascontiguousarray(snap.u, dtype="<f8").tobytes()
    v = np.ascontiguousarray(snap.v, dtype="<f8").tobytes()
    return head + u + v


def write_grid(path, snap) -> Artifact:
    return atomic_write_bytes(path, grid_bytes(snap))


def read_grid(path):
    """Read a KLGRID1 file into a FieldSnapshot."""
    from .sim.grid import FieldSnapshot

    data = Path(path).read_bytes()
    if not data.startswith(GRID_MAGIC):
        raise ValueError(f"{path}: not a KLGRID1 file")
    off = len(GRID_MAGIC)
    nx, ny, t, Lx, Ly = _GRID_HEADER.unpack_from(data, off)
    off += _GRID_HEADER.size
    n = nx * ny
    expected = off + 16 * n
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    u = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(ny, nx).copy()
    v = np.frombuffer(data, dtype="<f8", count=n, offset=off + 8 * n).reshape(ny, nx).copy()
    return FieldSnapshot(t, u, v, Lx, Ly)


def space_time_rows(history, row: int | None = None):
    """t,x,u,v rows of a cross-section (y-average by default, or one grid row)."""
    for snap in history:
        x = snap.x
        u = snap.u.mean(axis=0) if row is None else snap.u[row]
        v = snap.v.mean(axis=0) if row is None else snap.v[row]
        for xi, ui, vi in zip(x, u, v):
            yield snap.t, xi, ui, vi


# ---------------------------------------------------------------------------
# manifest


class Manifest:
    """Collects artifacts of one run; written last as manifest.json in the output directory."""

    def __init__(self, out_dir, command: str, config: dict):
        self.out_dir = Path(out_dir)
        self.command = command
        self.config = config
        self.artifacts: list = []
        self.checks: list = []
        self.summary: dict = {}

    def add(self, art: Artifact, echo=print) -> Artifact:
        self.artifacts.append(art)
        if echo is not None:
            echo(art.manifest_line())
        return art

    def relpath(self, art: Artifact) -> str:
        try:
            return os.path.relpath(art.path, self.out_dir)
        except ValueError:
            return art.path

    def write(self) -> Artifact:
        doc = {
            "command": self.command,
            "config": self.config,
            "artifacts": [dict(asdict(a), path=self.relpath(a)) for a in self.artifacts],
            "checks": self.checks,
            "summary": self.summary,
        }
        data = (json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n").encode()
        return atomic_write_bytes(self.out_dir / MANIFEST_NAME, data)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def load_manifest(out_dir) -> dict:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"no manifest in {out_dir}")
    return json.loads(path.read_text())


def check_artifacts(out_dir, manifest: dict) -> list:
    """List of (path, problem) for artifacts that are missing or whose checksum changed."""
    bad = []
    for art in manifest.get("artifacts", []):
        path = Path(out_dir) / art["path"]
        if not path.exists():
            bad.append((str(path), "missing"))
        elif sha256_file(path) != art["sha256"]:
            bad.append((str(path), "checksum mismatch"))
    return bad
