"""Run configuration files, series tables and run manifests.

Configuration files are flat ``key = value`` text with dotted section keys
whose final suffix names the SI unit (``grid.x_min_m``, ``time.dt_s``).
Lines starting with ``#`` are comments.  Missing keys fall back to the
electron barrier scenario.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from . import scenarios as S
from .domain import HBAR, Barrier, Grid1D, PacketSpec, ParticleSpec, SmoothedStep, Step
from .errors import ConfigError
from .propagator import KickEvent, SimConfig, Trajectory

TOOL = "qevap"

# key -> value type; kick.<n>.* keys are handled separately
_SCALAR_KEYS = {
    "particle.mass_kg": float,
    "particle.hbar_Js": float,
    "grid.x_min_m": float,
    "grid.x_max_m": float,
    "grid.n_points": int,
    "grid.dx_m": float,
    "potential.kind": str,
    "potential.V0_J": float,
    "potential.x0_m": float,
    "potential.x1_m": float,
    "potential.x_edge_m": float,
    "potential.width_m": float,
    "potential.velocity_mps": float,
    "potential.drift_start_s": float,
    "packet.x_i_m": float,
    "packet.sigma_m": float,
    "packet.k_bar_per_m": float,
    "packet.energy_J": float,
    "time.dt_s": float,
    "time.t_end_s": float,
    "time.record_every": int,
    "measure.x_T_m": float,
    "snapshots.times_s": list,
}
_KICK_FIELDS = {"q_per_m": float, "t_k_s": float, "delta_t_s": float, "n_substeps": int}
_KICK_RE = re.compile(r"^kick\.(\d+)\.(\w+)$")
_UNIT_RE = re.compile(r"_(m|s|J|kg|Js|mps|per_m)$")

_POTENTIAL_FIELDS = {
    "barrier": ("potential.x0_m", "potential.x1_m"),
    "step": ("potential.x_edge_m",),
    "smoothed_step": ("potential.x_edge_m", "potential.width_m"),
}


def _base(key: str) -> str:
    """Key with any unit suffix removed (``packet.sigma_nm`` -> ``packet.sigma``)."""
    head, _, last = key.rpartition(".")
    for known in _SCALAR_KEYS:
        kh, _, kl = known.rpartition(".")
        stem = _UNIT_RE.sub("", kl)
        if kh == head and (last == stem or last.startswith(stem + "_")):
            return known
    return ""


def _check_key(key: str):
    if key in _SCALAR_KEYS:
        return
    m = _KICK_RE.match(key)
    if m:
        fld = m.group(2)
        if fld in _KICK_FIELDS:
            return
        for known in _KICK_FIELDS:
            stem = _UNIT_RE.sub("", known)
            if fld == stem or fld.startswith(stem + "_"):
                raise ConfigError(f"unit suffix mismatch for {key!r}: expected kick.{m.group(1)}.{known}", key)
        raise ConfigError(f"unknown config key {key!r}", key)
    known = _base(key)
    if known:
        raise ConfigError(f"unit suffix mismatch for {key!r}: expected {known!r}", key)
    raise ConfigError(f"unknown config key {key!r}", key)


def parse_config_text(text: str) -> dict[str, str]:
    """Raw ``key -> value string`` mapping; duplicate or unknown keys are errors."""
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'", f"line {n}")
        key, value = (s.strip() for s in line.split("=", 1))
        _check_key(key)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", key)
        out[key] = value
    return out


def _convert(key: str, raw: Any, typ):
    try:
        if typ is list:
            if isinstance(raw, (list, tuple)):
                return tuple(float(v) for v in raw)
            raw = str(raw).strip()
            return tuple(float(v) for v in raw.split(",") if v.strip()) if raw else ()
        if typ is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        if typ is float:
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError
            return val
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value {raw!r} for {key}", key) from None


def config_from_mapping(values: Mapping[str, Any]) -> SimConfig:
    """Build a SimConfig from flat keys, filling gaps from the electron scenario."""
    for k in values:
        _check_key(k)
    v: dict[str, Any] = {}
    for k, raw in values.items():
        m = _KICK_RE.match(k)
        typ = _KICK_FIELDS[m.group(2)] if m else _SCALAR_KEYS[k]
        v[k] = _convert(k, raw, typ)

    particle = ParticleSpec(v.get("particle.mass_kg", ParticleSpec.electron().mass),
                            v.get("particle.hbar_Js", HBAR))

    kind = v.get("potential.kind", "barrier")
    if kind not in _POTENTIAL_FIELDS:
        raise ConfigError(f"unknown potential kind {kind!r}", "potential.kind")
    for other, keys in _POTENTIAL_FIELDS.items():
        for key in keys:
            if key in v and key not in _POTENTIAL_FIELDS[kind]:
                raise ConfigError(f"{key} does not apply to potential.kind = {kind}", key)
    V0 = v.get("potential.V0_J", S.V0_ELECTRON)
    drift = dict(velocity=v.get("potential.velocity_mps", 0.0),
                 drift_start=v.get("potential.drift_start_s", 0.0))
    if kind == "barrier":
        pot = Barrier(V0, v.get("potential.x0_m", 0.0), v.get("potential.x1_m", S.BARRIER_WIDTH), **drift)
    elif kind == "step":
        pot = Step(V0, v.get("potential.x_edge_m", 0.0), **drift)
    else:
        pot = SmoothedStep(V0, v.get("potential.x_edge_m", 0.0), v.get("potential.width_m", 0.0), **drift)

    x_i = v.get("packet.x_i_m", S.X_INITIAL)
    sigma = v.get("packet.sigma_m", S.SIGMA)
    if "packet.k_bar_per_m" in v and "packet.energy_J" in v:
        raise ConfigError("give packet.k_bar_per_m or packet.energy_J, not both", "packet.energy_J")
    if "packet.k_bar_per_m" in v:
        packet = PacketSpec(x_i, sigma, v["packet.k_bar_per_m"])
    else:
        packet = PacketSpec.from_energy(x_i, sigma, v.get("packet.energy_J", S.E_INITIAL), particle)

    x_min = v.get("grid.x_min_m", S.X_MIN)
    x_max = v.get("grid.x_max_m", S.X_MAX)
    if "grid.n_points" in v and "grid.dx_m" in v:
        raise ConfigError("give grid.n_points or grid.dx_m, not both", "grid.dx_m")
    if "grid.n_points" in v:
        grid = Grid1D(x_min, x_max, v["grid.n_points"])
    else:
        dx = v.get("grid.dx_m", S.DX)
        if not dx > 0:
            raise ConfigError("grid spacing must be positive", "grid.dx_m")
        grid = Grid1D.with_spacing(x_min, x_max, dx)

    idx = sorted({int(_KICK_RE.match(k).group(1)) for k in v if _KICK_RE.match(k)})
    kicks = []
    for i in idx:
        pre = f"kick.{i}."
        for req in ("q_per_m", "t_k_s"):
            if pre + req not in v:
                raise ConfigError(f"kick {i} is missing {pre + req}", pre + req)
        kicks.append(KickEvent(v[pre + "q_per_m"], v[pre + "t_k_s"],
                               v.get(pre + "delta_t_s", 0.0), v.get(pre + "n_substeps", 1)))
    kicks.sort(key=lambda k: k.t_k)

    x_T = v.get("measure.x_T_m")
    if x_T is None:
        x_T = S.measurement_boundary(pot, particle, packet)
    return SimConfig(particle, grid, pot, packet,
                     v.get("time.dt_s", S.DT), v.get("time.t_end_s", S.T_END),
                     tuple(kicks), x_T, v.get("snapshots.times_s", ()),
                     v.get("time.record_every", 10))


def config_to_mapping(config: SimConfig) -> dict[str, Any]:
    """Every key needed to rebuild ``config`` exactly (no defaults left implicit)."""
    pot = config.potential
    out: dict[str, Any] = {
        "particle.mass_kg": config.particle.mass,
        "particle.hbar_Js": config.particle.hbar,
        "grid.x_min_m": config.grid.x_min,
        "grid.x_max_m": config.grid.x_max,
        "grid.n_points": config.grid.n_points,
        "potential.kind": pot.kind,
        "potential.V0_J": pot.V0,
    }
    if pot.kind == "barrier":
        out["potential.x0_m"], out["potential.x1_m"] = pot.x0, pot.x1
    else:
        out["potential.x_edge_m"] = pot.x_edge
    if pot.kind == "smoothed_step":
        out["potential.width_m"] = pot.width
    out["potential.velocity_mps"] = pot.velocity
    out["potential.drift_start_s"] = pot.drift_start
    out["packet.x_i_m"] = config.packet.x_i
    out["packet.sigma_m"] = config.packet.sigma
    out["packet.k_bar_per_m"] = config.packet.k_bar
    out["time.dt_s"] = config.dt
    out["time.t_end_s"] = config.t_end
    out["time.record_every"] = config.record_every
    out["measure.x_T_m"] = config.x_T
    out["snapshots.times_s"] = list(config.snapshot_times)
    for i, k in enumerate(config.kicks):
        out[f"kick.{i}.q_per_m"] = k.q
        out[f"kick.{i}.t_k_s"] = k.t_k
        out[f"kick.{i}.delta_t_s"] = k.delta_t
        out[f"kick.{i}.n_substeps"] = k.n_substeps
    return out


def _fmt_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_text(config: SimConfig) -> str:
    lines = [f"# {TOOL} {__version__} run configuration (SI units in key names)"]
    section = None
    for key, val in config_to_mapping(config).items():
        sec = key.split(".", 1)[0]
        if sec != section and section is not None:
            lines.append("")
        section = sec
        lines.append(f"{key} = {_fmt_value(val)}")
    return "\n".join(lines) + "\n"


def config_hash(config: SimConfig) -> str:
    return hashlib.sha256(config_text(config).encode()).hexdigest()


def read_config(path: str | Path) -> SimConfig:
    """Load a config file, or the single resolved config of a run manifest."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", str(path)) from None
    if path.suffix == ".json":
        manifest = RunManifest.from_json(text)
        if len(manifest.configs) != 1:
            raise ConfigError("manifest holds several configs; pick one with load_manifest_configs",
                              "configs")
        return config_from_mapping(manifest.configs[0]["config"])
    return config_from_mapping(parse_config_text(text))


def write_config(path: str | Path, config: SimConfig) -> None:
    Path(path).write_text(config_text(config))


# ---------------------------------------------------------------- series

def format_number(v) -> str:
    """12 significant digits in scientific notation; ints and strings verbatim."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.11e}"
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(f"{float(v):.11e}")
        return f if math.isfinite(f) else None
    return v


def write_series(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence],
                 meta: Mapping[str, Any] | None = None, fmt: str = "csv") -> Path:
    """Write a table as CSV (``#`` metadata lines, header row) or JSON lines.

    For ``fmt="jsonl"`` the suffix becomes ``.jsonl`` and the first line is
    ``{"meta": {...}}``.
    """
    path = Path(path)
    meta = {"tool": TOOL, "version": __version__, **(meta or {})}
    if fmt == "csv":
        path = path.with_suffix(".csv")
        lines = [f"# {k}: {v}" for k, v in meta.items()]
        lines.append(",".join(columns))
        for row in rows:
            if len(row) != len(columns):
                raise ValueError("row length does not match columns")
            lines.append(",".join(format_number(v) for v in row))
    elif fmt == "jsonl":
        path = path.with_suffix(".jsonl")
        lines = [json.dumps({"meta": {k: _json_value(v) for k, v in meta.items()}})]
        for row in rows:
            lines.append(json.dumps({c: _json_value(v) for c, v in zip(columns, row)}))
    else:
        raise ConfigError(f"unknown output format {fmt!r}", "--format")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_series(path: str | Path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Inverse of :func:`write_series` for CSV files (values left as strings)."""
    meta, columns, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, val = line[1:].partition(":")
            meta[k.strip()] = val.strip()
        elif columns is None:
            columns = line.split(",")
        elif line:
            rows.append(line.split(","))
    return meta, columns or [], rows


TRAJECTORY_COLUMNS = ("t_s", "norm", "mean_x_m", "mean_p_kgms", "E_kin_J", "E_tot_J", "T", "R")
SNAPSHOT_COLUMNS = ("x_m", "re_psi", "im_psi")


def write_trajectory(path: str | Path, traj: Trajectory, fmt: str = "csv",
                     meta: Mapping[str, Any] | None = None) -> Path:
    rows = [(r.t, r.norm, r.mean_x, r.mean_p, r.E_kin, r.E_tot, r.T, r.R) for r in traj.records]
    meta = {"config_sha256": config_hash(traj.config), **(meta or {})}
    return write_series(path, TRAJECTORY_COLUMNS, rows, meta, fmt)


def write_snapshots(directory: str | Path, traj: Trajectory, prefix: str = "snapshot",
                    fmt: str = "csv", raw: bool = False) -> list[Path]:
    """One file per snapshot time; ``raw`` adds an ``.npy`` dump of the amplitudes."""
    directory = Path(directory)
    paths = []
    h = config_hash(traj.config)
    for i, (t, wf) in enumerate(traj.snapshots):
        a = wf.amplitudes
        rows = zip(wf.x, a.real, a.imag)
        stem = directory / f"{prefix}_{i:03d}"
        paths.append(write_series(stem, SNAPSHOT_COLUMNS, rows,
                                  {"t_s": format_number(t), "config_sha256": h}, fmt))
        if raw:
            np.save(stem.with_suffix(".npy"), a)
            paths.append(stem.with_suffix(".npy"))
    return paths


# ---------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    command: str
    argv: list[str]
    configs: list[dict[str, Any]] = field(default_factory=list)
    wall_clock_s: float = 0.0
    convergence: dict[str, Any] = field(default_factory=dict)
    parameters: dict[str, Any] = field(default_factory=dict)
    tool: str = TOOL
    version: str = __version__

    def add_config(self, label: str, config: SimConfig) -> None:
        self.configs.append({"label": label, "sha256": config_hash(config),
                             "config": config_to_mapping(config)})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_default) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest is not valid JSON: {exc}", "manifest") from None
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})

    def write(self, directory: str | Path) -> Path:
        path = Path(directory) / "manifest.json"
        path.write_text(self.to_json())
        return path

    def resolved_configs(self) -> list[tuple[str, SimConfig]]:
        return [(c["label"], config_from_mapping(c["config"])) for c in self.configs]


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def load_manifest(path: str | Path) -> RunManifest:
    return RunManifest.from_json(Path(path).read_text())
