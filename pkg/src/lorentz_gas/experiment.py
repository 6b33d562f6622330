"""Experiment plans, dataset directories and manifests.

A plan is a flat key-value text file::

    # geometry sweep at desk scale
    radii = 0, 0.25, 0.6
    n_particles = 20000
    seed = 0
    t_obs = 200
    probes = log 10 200 16
    normalization = wall
    event_budget = 100000000
    out = runs/sweep

``probes`` is either ``log t_min t_max count`` or an explicit
comma-separated list, in units of the chosen mean collision time.  Any
key may be overridden for one radius with ``key[R] = value``, e.g.
``n_particles[0.25] = 100000``.  Lengths are in units of L = 1.

Each radius produces one dataset directory holding a manifest, one raw
CSV per probe time and a moment table.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
import platform
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .engine import CORNER_NUDGE, CORNER_TOL, DEFAULT_EVENT_BUDGET, TANGENCY_TOL
from .ensemble import EnsembleResult, EnsembleSpec, Normalization, default_probes
from .geometry import BilliardConfig
from .moments import EnsembleMoments

FORMAT_VERSION = 1
RAW_COLUMNS = ("particle_id", "t", "n_wall", "n_disk", "dx", "dy")
MANIFEST = "manifest.json"
MAX_RADIUS = 1.0 / math.sqrt(2.0)

_SECTION = "plan"
_OVERRIDE = re.compile(r"^(\w+)\[([^\]]+)\]$")


@dataclass
class RunSettings:
    """Ensemble settings shared by every radius unless overridden."""

    n_particles: int = 20000
    seed: int = 0
    t_obs: float = 200.0
    probes: list[float] = field(default_factory=default_probes)
    normalization: str = "wall"
    event_budget: int = DEFAULT_EVENT_BUDGET


@dataclass
class ExperimentPlan:
    radii: list[float]
    settings: RunSettings = field(default_factory=RunSettings)
    overrides: dict[float, dict] = field(default_factory=dict)
    out: str = "runs"
    format_version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        self.radii = [float(r) for r in self.radii]
        if not self.radii:
            raise ValueError("plan lists no radii")
        for r in self.radii:
            if not 0.0 <= r < MAX_RADIUS:
                raise ValueError(f"R/L = {r:g} outside [0, 1/sqrt 2)")
        for r, ov in self.overrides.items():
            if float(r) not in self.radii:
                raise ValueError(f"override for R/L = {r:g}, which is not in the plan")
            unknown = set(ov) - {f.name for f in fields(RunSettings)}
            if unknown:
                raise ValueError(f"unknown override keys {sorted(unknown)}")

    def settings_for(self, R: float) -> RunSettings:
        return replace(self.settings, **self.overrides.get(float(R), {}))

    def spec_for(self, R: float) -> EnsembleSpec:
        s = self.settings_for(R)
        return EnsembleSpec(BilliardConfig(1.0, R), s.n_particles, s.t_obs, list(s.probes),
                            s.seed, Normalization(s.normalization), s.event_budget)

    def specs(self) -> list[EnsembleSpec]:
        """All ensemble specs; raises before anything is simulated if one is invalid."""
        return [self.spec_for(R) for R in self.radii]

    # -- text round trip ----------------------------------------------------

    def to_text(self) -> str:
        lines = [f"format_version = {self.format_version}",
                 "radii = " + ", ".join(_fmt(r) for r in self.radii),
                 f"out = {self.out}"]
        lines += [f"{k} = {_fmt(v)}" for k, v in _settings_items(self.settings)]
        for R in sorted(self.overrides):
            for k, v in sorted(self.overrides[R].items()):
                lines.append(f"{k}[{_fmt(R)}] = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentPlan":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        cp.optionxform = str
        cp.read_string(f"[{_SECTION}]\n{text}")
        kv = dict(cp[_SECTION])
        if "radii" not in kv:
            raise ValueError("plan needs a 'radii' key")
        base: dict = {}
        overrides: dict[float, dict] = {}
        plan_keys: dict = {}
        for key, raw in kv.items():
            m = _OVERRIDE.match(key)
            if m:
                name, R = m.group(1), float(m.group(2))
                overrides.setdefault(R, {})[name] = _parse_setting(name, raw)
            elif key in {f.name for f in fields(RunSettings)}:
                base[key] = _parse_setting(key, raw)
            elif key == "radii":
                plan_keys["radii"] = [float(x) for x in raw.split(",") if x.strip()]
            elif key == "out":
                plan_keys["out"] = raw.strip()
            elif key == "format_version":
                plan_keys["format_version"] = int(raw)
            else:
                raise ValueError(f"unknown plan key {key!r}")
        return cls(settings=RunSettings(**base), overrides=overrides, **plan_keys)

    @classmethod
    def load(cls, path) -> "ExperimentPlan":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(float(x)) for x in v)
    return str(v)


def _settings_items(s: RunSettings):
    for f in fields(RunSettings):
        yield f.name, getattr(s, f.name)


def _parse_setting(name: str, raw: str):
    raw = raw.strip()
    if name in ("n_particles", "seed", "event_budget"):
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if name == "t_obs":
        return float(raw)
    if name == "normalization":
        return Normalization(raw).value
    if name == "probes":
        parts = raw.split()
        if parts and parts[0] == "log":
            if len(parts) != 4:
                raise ValueError("probes = log t_min t_max count")
            return default_probes(float(parts[1]), float(parts[2]), int(parts[3]))
        return [float(x) for x in raw.split(",") if x.strip()]
    raise ValueError(f"unknown setting {name!r}")


# -- datasets ------------------------------------------------------------------


def dataset_name(R: float) -> str:
    return f"R{R:.4f}"


def probe_filename(index: int) -> str:
    return f"probe_{index:03d}.csv"


def config_hash(spec: EnsembleSpec) -> str:
    """SHA-256 of everything that determines the simulated numbers."""
    payload = json.dumps({
        "L": spec.config.L, "R": spec.config.R, "n_particles": spec.n_particles,
        "t_obs": spec.t_obs, "probes": list(spec.probes), "seed": spec.master_seed,
        "normalization": spec.normalization.value, "event_budget": spec.event_budget,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def versions() -> dict:
    import scipy

    from . import __version__

    return {"lorentz_gas": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_dataset(result: EnsembleResult, directory) -> dict:
    """Raw probe CSVs, moment table and manifest for one ensemble run."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    spec = result.spec
    cfg = spec.config
    s = result.samples
    valid = result.valid
    ids = np.nonzero(valid)[0]
    files = []
    for p, t in enumerate(result.probe_times):
        name = probe_filename(p)
        tt = repr(float(t))
        rows = ((int(i), tt, int(s.n_wall[i, p]), int(s.n_disk[i, p]), repr(float(s.dx[i, p])),
                 repr(float(s.dy[i, p]))) for i in ids)
        _write_csv(d / name, RAW_COLUMNS, rows)
        files.append(name)
    table = result.moments.table()
    _write_csv(d / "moments.csv", list(table[0]), ([_cell(v) for v in row.values()] for row in table))
    files.append("moments.csv")
    manifest = {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash(spec),
        "seed": spec.master_seed,
        "L": cfg.L,
        "R": cfg.R,
        "n_particles": spec.n_particles,
        "t_obs": spec.t_obs,
        "probes": list(spec.probes),
        "probe_times": [float(t) for t in result.probe_times],
        "normalization": spec.normalization.value,
        "event_budget": spec.event_budget,
        "tau": {"wall": cfg.tau_wall, "disk": _finite(cfg.tau_disk), "total": cfg.tau_total},
        "area": cfg.area,
        "horizon": cfg.horizon.value,
        "corrected_geometry": cfg.overlaps_walls,
        "acceptance_rate": result.acceptance_rate,
        "corner_hits": s.corner_hits,
        "events": s.events,
        "aborted": result.aborted,
        "tolerances": {"tangency": TANGENCY_TOL, "corner": CORNER_TOL, "corner_nudge": CORNER_NUDGE},
        "versions": versions(),
        "files": files,
    }
    (d / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def _finite(x: float):
    return x if math.isfinite(x) else None


@dataclass
class Dataset:
    """A dataset directory read back into arrays of shape ``(N, P)``."""

    path: Path
    manifest: dict
    particle_id: np.ndarray
    n_wall: np.ndarray
    n_disk: np.ndarray
    dx: np.ndarray
    dy: np.ndarray

    @property
    def probe_times(self) -> np.ndarray:
        return np.asarray(self.manifest["probe_times"], dtype=float)

    @property
    def config(self) -> BilliardConfig:
        return BilliardConfig(self.manifest["L"], self.manifest["R"])

    @property
    def tau(self) -> float:
        return self.config.tau(self.manifest["normalization"])

    def moments(self) -> EnsembleMoments:
        return EnsembleMoments.from_samples(self.probe_times, self.n_wall, self.n_disk, self.dx, self.dy)

    def block_moments(self, n_blocks: int = 20) -> list[EnsembleMoments]:
        parts = np.array_split(np.arange(self.n_wall.shape[0]), n_blocks)
        return [EnsembleMoments.from_samples(self.probe_times, self.n_wall[ix], self.n_disk[ix],
                                             self.dx[ix], self.dy[ix]) for ix in parts if ix.size]

    def probe_index(self, t_over_tau: float, rtol: float = 1e-6) -> int:
        probes = np.asarray(self.manifest["probes"], dtype=float)
        hit = np.nonzero(np.isclose(probes, t_over_tau, rtol=rtol, atol=0.0))[0]
        if not hit.size:
            avail = ", ".join(f"{p:.6g}" for p in probes)
            raise KeyError(f"no probe at t = {t_over_tau:g} tau; available: {avail}")
        return int(hit[0])


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    manifest = json.loads((d / MANIFEST).read_text(encoding="utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{d}: unsupported format version {manifest.get('format_version')}")
    cols = {c: [] for c in RAW_COLUMNS[2:]}
    ids = None
    for p in range(len(manifest["probe_times"])):
        arr = np.genfromtxt(d / probe_filename(p), delimiter=",", names=True, ndmin=1)
        if ids is None:
            ids = arr["particle_id"].astype(np.int64)
        for c in cols:
            cols[c].append(arr[c])
    stack = {c: np.column_stack(v) for c, v in cols.items()}
    return Dataset(d, manifest, ids, stack["n_wall"].astype(np.int64), stack["n_disk"].astype(np.int64),
                   stack["dx"], stack["dy"])


def find_datasets(root) -> list[Path]:
    """``root`` itself if it is a dataset, else its dataset subdirectories sorted by R."""
    root = Path(root)
    if (root / MANIFEST).exists():
        return [root]
    found = [p.parent for p in root.glob(f"*/{MANIFEST}")]
    return sorted(found, key=lambda p: json.loads((p / MANIFEST).read_text())["R"])
