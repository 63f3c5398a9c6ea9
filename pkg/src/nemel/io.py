"""Run configuration, field snapshots and the energy log."""
from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, SnapshotError
from .grid import FREESLIP, NOSLIP, Grid
from .material import (
    IonSpecies,
    LeslieCoefficients,
    MaterialParams,
    Permittivity,
    ValidityReport,
    validate_leslie,
)
from .presets import DEFAULTS as PRESET_DEFAULTS
from .presets import PRESETS

MAGIC = "NEMEL1"


# ---------------------------------------------------------------- config

_SCHEMA = {
    "grid": {"nx": int, "ny": int, "Lx": float, "Ly": float, "bc": str},
    "leslie": {f"alpha{k}": float for k in range(1, 7)},
    "permittivity": {"eps_perp": float, "eps_a": float},
    "species": {"z": float, "D": object, "mass": float},
    "time": {"dt": object, "safety": float, "t_final": float, "max_steps": int, "renormalize": bool},
    "initial": {"preset": str, **{k: float for k in PRESET_DEFAULTS}},
    "output": {"dir": str, "snapshot_every": int},
    "tolerances": {"poisson": float, "pressure": float, "steady": float, "equilibrium": float,
                   "field_ceiling": float},
}
_REQUIRED = {
    "grid": ("nx", "ny"),
    "leslie": tuple(f"alpha{k}" for k in range(1, 7)),
    "permittivity": ("eps_perp",),
    "species": ("z", "D"),
    "time": ("t_final",),
}


@dataclass
class RunConfig:
    grid: Grid
    material: MaterialParams
    validity: ValidityReport
    preset: str = "twist"
    initial: dict = field(default_factory=dict)
    bc: str = NOSLIP
    dt: float | None = None  # None means automatic
    safety: float = 0.4
    t_final: float = 0.0
    max_steps: int | None = None
    renormalize: bool = False
    out_dir: str = "out"
    snapshot_every: int = 0
    poisson_tol: float = 1e-10
    pressure_tol: float = 1e-10
    steady_tol: float = 1e-6
    equilibrium_tol: float = 1e-10
    field_ceiling: float = 1e8
    source: str | None = None


def _check_value(where, key, val, typ):
    if typ is object:
        return val
    if typ is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{where}.{key}: expected a number, got {val!r}")
        val = float(val)
        if not math.isfinite(val):
            raise ConfigError(f"{where}.{key}: value must be finite, got {val!r}")
        return val
    if typ is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{where}.{key}: expected an integer, got {val!r}")
        return val
    if not isinstance(val, typ):
        raise ConfigError(f"{where}.{key}: expected {typ.__name__}, got {val!r}")
    return val


def _section(doc, name, where=None):
    where = where or name
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"[{where}] must be a table")
    schema = _SCHEMA[name]
    out = {}
    for key, val in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} in [{where}]")
        out[key] = _check_value(where, key, val, schema[key])
    for key in _REQUIRED.get(name, ()):
        if key not in out:
            raise ConfigError(f"missing required key {key!r} in [{where}]")
    return out


def _diffusion(where, D):
    if isinstance(D, bool):
        raise ConfigError(f"{where}.D: expected a number or a 2x2 array")
    if isinstance(D, (int, float)):
        D = float(D)
        if not math.isfinite(D):
            raise ConfigError(f"{where}.D: value must be finite")
        return D
    try:
        arr = np.array(D, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.D: expected a number or a 2x2 array") from None
    if arr.shape != (2, 2):
        raise ConfigError(f"{where}.D: expected a 2x2 array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{where}.D: values must be finite")
    return arr


def loads_config(text: str, *, source: str | None = None) -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source or '<config>'}: parse error: {exc}") from None
    return config_from_dict(doc, source=source)


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads_config(text, source=str(path))


def config_from_dict(doc: dict, *, source: str | None = None) -> RunConfig:
    for name in doc:
        if name not in _SCHEMA:
            raise ConfigError(f"unknown section [{name}]")
    gs = _section(doc, "grid")
    ls = _section(doc, "leslie")
    ps = _section(doc, "permittivity")
    ts = _section(doc, "time")
    ins = _section(doc, "initial")
    os_ = _section(doc, "output")
    tol = _section(doc, "tolerances")

    try:
        grid = Grid(gs["nx"], gs["ny"], gs.get("Lx", 1.0), gs.get("Ly", 1.0))
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from None
    bc = gs.get("bc", NOSLIP)
    if bc not in (NOSLIP, FREESLIP):
        raise ConfigError(f"[grid].bc must be {NOSLIP!r} or {FREESLIP!r}, got {bc!r}")

    leslie = LeslieCoefficients(*(ls[f"alpha{k}"] for k in range(1, 7)))
    validity = validate_leslie(leslie)
    try:
        perm = Permittivity(ps["eps_perp"], ps.get("eps_a", 0.0))
    except ValueError as exc:
        raise ConfigError(f"[permittivity]: {exc}") from None

    species_doc = doc.get("species", {})
    if not isinstance(species_doc, dict):
        raise ConfigError("[species] must contain subtables [species.1], [species.2], ...")
    species = []
    for key in sorted(species_doc, key=lambda k: (not k.isdigit(), int(k) if k.isdigit() else 0, k)):
        where = f"species.{key}"
        if not key.isdigit():
            raise ConfigError(f"species tables must be numbered, got [{where}]")
        sd = _section({"species": species_doc[key]}, "species", where)
        try:
            species.append(IonSpecies(sd["z"], _diffusion(where, sd["D"]), sd.get("mass", 1.0)))
        except ValueError as exc:
            raise ConfigError(f"[{where}]: {exc}") from None
        if not species[-1].mass > 0:
            raise ConfigError(f"[{where}]: mass must be > 0")

    preset = ins.pop("preset", "twist")
    if preset not in PRESETS:
        raise ConfigError(f"[initial].preset must be one of {', '.join(PRESETS)}, got {preset!r}")

    dt = ts.get("dt", "auto")
    if dt == "auto":
        dt = None
    else:
        dt = _check_value("time", "dt", dt, float)
        if not dt > 0:
            raise ConfigError("[time].dt must be > 0 or \"auto\"")
    t_final = ts["t_final"]
    if t_final < 0:
        raise ConfigError("[time].t_final must be >= 0")
    max_steps = ts.get("max_steps")
    if max_steps is not None and max_steps < 0:
        raise ConfigError("[time].max_steps must be >= 0")

    snap = os_.get("snapshot_every", 0)
    if snap < 0:
        raise ConfigError("[output].snapshot_every must be >= 0")
    for k, v in tol.items():
        if not v > 0:
            raise ConfigError(f"[tolerances].{k} must be > 0")

    return RunConfig(
        grid=grid,
        material=MaterialParams(leslie, perm, tuple(species)),
        validity=validity,
        preset=preset,
        initial=ins,
        bc=bc,
        dt=dt,
        safety=ts.get("safety", 0.4),
        t_final=t_final,
        max_steps=max_steps,
        renormalize=ts.get("renormalize", False),
        out_dir=os_.get("dir", "out"),
        snapshot_every=snap,
        poisson_tol=tol.get("poisson", 1e-10),
        pressure_tol=tol.get("pressure", 1e-10),
        steady_tol=tol.get("steady", 1e-6),
        equilibrium_tol=tol.get("equilibrium", 1e-10),
        field_ceiling=tol.get("field_ceiling", 1e8),
        source=source,
    )


def require_valid(cfg: RunConfig, override: bool = False) -> None:
    """Refuse coefficient sets outside the positivity conditions unless overridden."""
    if not cfg.validity.satisfies_positivity and not override:
        raise ConfigError("Leslie coefficients violate: " + "; ".join(cfg.validity.violations))


# ---------------------------------------------------------------- snapshots

def _fmt(x) -> str:
    return f"{x:.17g}"


def write_field(path, name: str, values, g: Grid, t: float) -> None:
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"field {name!r} must be 2-D, got shape {a.shape}")
    if any(ch.isspace() for ch in name) or not name:
        raise ValueError(f"invalid field name {name!r}")
    lines = [f"{MAGIC} {name} {a.shape[0]} {a.shape[1]} {_fmt(g.Lx)} {_fmt(g.Ly)} {_fmt(t)}\n"]
    lines.extend(" ".join(_fmt(x) for x in row) + "\n" for row in a)
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", encoding="ascii", newline="\n") as f:
        f.writelines(lines)
    os.replace(tmp, path)


@dataclass
class FieldSnapshot:
    name: str
    values: np.ndarray
    Lx: float
    Ly: float
    t: float


def read_field(path, *, name: str | None = None, shape=None) -> FieldSnapshot:
    data = Path(path).read_bytes()
    pos = data.find(b"\n")
    if pos < 0:
        raise SnapshotError(f"{path}: truncated header at byte {len(data)}")
    head = data[:pos].decode("ascii", errors="replace").split()
    if not head or head[0] != MAGIC:
        raise SnapshotError(f"{path}: bad magic {head[0] if head else ''!r}, expected {MAGIC}")
    if len(head) != 7:
        raise SnapshotError(f"{path}: malformed header")
    try:
        fname, nx, ny = head[1], int(head[2]), int(head[3])
        Lx, Ly, t = float(head[4]), float(head[5]), float(head[6])
    except ValueError:
        raise SnapshotError(f"{path}: malformed header") from None
    if name is not None and fname != name:
        raise SnapshotError(f"{path}: field {fname!r}, expected {name!r}")
    if shape is not None and (nx, ny) != tuple(shape):
        raise SnapshotError(f"{path}: dimensions {nx}x{ny} do not match expected {shape[0]}x{shape[1]}")
    out = np.empty((nx, ny))
    offset = pos + 1
    for i in range(nx):
        end = data.find(b"\n", offset)
        if end < 0:
            raise SnapshotError(f"{path}: truncated at byte {len(data)} (row {i} of {nx})")
        row = data[offset:end].split()
        if len(row) != ny:
            raise SnapshotError(f"{path}: row {i} at byte {offset} has {len(row)} values, expected {ny}")
        try:
            out[i] = [float(x) for x in row]
        except ValueError:
            raise SnapshotError(f"{path}: invalid number in row {i} at byte {offset}") from None
        offset = end + 1
    if offset != len(data):
        raise SnapshotError(f"{path}: trailing data at byte {offset}")
    return FieldSnapshot(fname, out, Lx, Ly, t)


def state_fields(state) -> dict:
    """Name -> 2-D array for everything a snapshot stores."""
    out = {f"c{k + 1}": ck for k, ck in enumerate(state.ion.c)}
    out["d1"] = state.d[..., 0]
    out["d2"] = state.d[..., 1]
    out["u"] = state.flow.u
    out["v"] = state.flow.v
    out["pi"] = state.flow.pi
    out["phi"] = state.phi
    return out


def snapshot_dir(out_dir, step: int) -> Path:
    return Path(out_dir) / f"snap_{step:08d}"


def write_state(out_dir, state, g: Grid) -> Path:
    path = snapshot_dir(out_dir, state.step)
    path.mkdir(parents=True, exist_ok=True)
    for name, arr in state_fields(state).items():
        write_field(path / f"{name}.txt", name, arr, g, state.t)
    meta = {"step": state.step, "t": state.t, "masses": [float(m) for m in state.ion.masses]}
    (path / "meta.json").write_text(json.dumps(meta) + "\n", encoding="ascii")
    return path


def read_state_fields(path, g: Grid, n_species: int) -> tuple[dict, dict]:
    path = Path(path)
    shapes = {f"c{k + 1}": g.shape for k in range(n_species)}
    shapes.update({"d1": g.shape, "d2": g.shape, "u": (g.nx + 1, g.ny), "v": (g.nx, g.ny + 1),
                   "pi": g.shape, "phi": g.shape})
    fields_ = {}
    for name, shape in shapes.items():
        snap = read_field(path / f"{name}.txt", name=name, shape=shape)
        if (snap.Lx, snap.Ly) != (g.Lx, g.Ly):
            raise SnapshotError(f"{path / name}: domain {snap.Lx}x{snap.Ly} does not match grid")
        fields_[name] = snap
    meta = json.loads((path / "meta.json").read_text(encoding="ascii"))
    return fields_, meta


def latest_snapshot(out_dir) -> Path | None:
    snaps = sorted(Path(out_dir).glob("snap_*"))
    snaps = [p for p in snaps if (p / "meta.json").exists()]
    return snaps[-1] if snaps else None


# ---------------------------------------------------------------- energy log

def log_header(n_species: int) -> list[str]:
    return (["step", "t", "dt", "E_kin", "E_elastic", "E_entropy", "E_elec", "E_total",
             "D_ionic", "D_visc", "D_rot", "audit_r"]
            + [f"mass_{k + 1}" for k in range(n_species)]
            + ["min_c", "max_len_dev", "div_inf"])


class EnergyLog:
    """Append-only CSV writer; every row is flushed."""

    def __init__(self, path, n_species: int, *, append: bool = False):
        self.path = Path(path)
        self.columns = log_header(n_species)
        mode = "a" if append else "w"
        self._f = open(self.path, mode, encoding="ascii", newline="\n")  # noqa: SIM115
        if not append:
            self._f.write(",".join(self.columns) + "\n")
            self._f.flush()

    def write(self, step: int, values: dict) -> None:
        row = [str(step)] + [repr(float(values[c])) for c in self.columns[1:]]
        self._f.write(",".join(row) + "\n")
        self._f.flush()

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log(path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty energy log")
    header = lines[0].split(",")
    rows = [[float(x) for x in ln.split(",")] for ln in lines[1:] if ln]
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def truncate_log(path, last_step: int) -> None:
    """Drop rows after ``last_step`` so a resumed run can append."""
    lines = Path(path).read_text(encoding="ascii").splitlines(keepends=True)
    keep = [lines[0]] + [ln for ln in lines[1:] if ln.strip() and int(ln.split(",", 1)[0]) <= last_step]
    Path(path).write_text("".join(keep), encoding="ascii")
