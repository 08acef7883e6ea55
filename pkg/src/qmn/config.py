"""Experiment configuration: nested JSON blocks with defaults and validation."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import FunctionEnsemble, Grid
from .hammerstein import Cone, HammersteinProblem, Kernel, Nonlinearity
from .noncompactness import QuasimeasureParams, make_saturating

SCHEMA_VERSION = "qmn.v1"

DEFAULTS: dict = {
    "grid": {"dim": 1, "half_width": 3.0, "points_per_axis": 61},
    "saturating": {"levels": 3},
    "quasimeasure": {"k_budget": 1, "delta_schedule": None, "eps_schedule": [0.5, 0.1, 0.02]},
    "kernel": {"family": "separable",
               "params": {"outer": {"kind": "gauss"}, "inner": {"kind": "indicator", "lo": 0.0, "hi": 1.0}}},
    "nonlinearity": {"family": "affine", "params": {"alpha": 0.5, "gamma": 1.0}},
    "cone": {"r": 1.0, "c": 0.2},
    "solver": {"tol": 1e-10, "max_iter": 200, "radius": None},
    "suite": {"trials": 100, "seed": 0, "max_size": 6},
    "darbo": {"iters": 8, "members": 6, "probes": None, "kappa_budget": 2000, "q_trials": 20,
              "phi_D_slope": None, "phi_E_slope": None, "slack": 1e-9},
    "output": {"directory": "out", "formats": "both"},
}

FORMATS = ("json", "csv", "both")


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and not isinstance(val, dict):
            raise ConfigError(f"config key {where!r} must be an object")
        # kernel and nonlinearity parameters are free-form per family
        if isinstance(base[key], dict) and key != "params":
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _number(block: dict, key: str, where: str, lo=None, integer=False, allow_none=False):
    v = block[key]
    if v is None and allow_none:
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError(f"{where}.{key} must be a finite number")
    if integer and int(v) != v:
        raise ConfigError(f"{where}.{key} must be an integer")
    if lo is not None and v < lo:
        raise ConfigError(f"{where}.{key} must be >= {lo}")


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be an object")
        cfg = cls(_merge(DEFAULTS, raw))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None) -> "ExperimentConfig":
        if path is None:
            return cls.from_dict({})
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def dumps(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2) + "\n"

    def override(self, **blocks) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(_merge(self.data, blocks))

    def validate(self):
        d = self.data
        g = d["grid"]
        _number(g, "dim", "grid", lo=1, integer=True)
        _number(g, "half_width", "grid", lo=0)
        _number(g, "points_per_axis", "grid", lo=2, integer=True)
        _number(d["saturating"], "levels", "saturating", lo=1, integer=True)
        q = d["quasimeasure"]
        _number(q, "k_budget", "quasimeasure", lo=1, integer=True)
        for key in ("eps_schedule", "delta_schedule"):
            if q[key] is not None and not (isinstance(q[key], list) and q[key]):
                raise ConfigError(f"quasimeasure.{key} must be a nonempty list")
        c = d["cone"]
        _number(c, "r", "cone")
        _number(c, "c", "cone")
        s = d["solver"]
        _number(s, "tol", "solver")
        _number(s, "max_iter", "solver", lo=1, integer=True)
        _number(s, "radius", "solver", allow_none=True)
        u = d["suite"]
        for key in ("trials", "max_size"):
            _number(u, key, "suite", lo=1, integer=True)
        _number(u, "seed", "suite", lo=0, integer=True)
        b = d["darbo"]
        for key in ("iters", "members", "kappa_budget", "q_trials"):
            _number(b, key, "darbo", lo=1, integer=True)
        for key in ("phi_D_slope", "phi_E_slope"):
            _number(b, key, "darbo", lo=0, allow_none=True)
        _number(b, "slack", "darbo", lo=0)
        if d["output"]["formats"] not in FORMATS:
            raise ConfigError(f"output.formats must be one of {FORMATS}")
        # building the objects runs the family and range checks of each module
        try:
            params = self.params()
            self.problem()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        probes = b["probes"]
        if probes is not None:
            if not isinstance(probes, list) or not probes or any(
                    isinstance(p, bool) or not isinstance(p, int) or not 0 <= p < params.grid.size for p in probes):
                raise ConfigError("darbo.probes must list valid node indices")

    # ---- builders

    def grid(self) -> Grid:
        g = self.data["grid"]
        return Grid(g["dim"], g["half_width"], g["points_per_axis"])

    def params(self) -> QuasimeasureParams:
        grid = self.grid()
        q = self.data["quasimeasure"]
        sat = make_saturating(grid, self.data["saturating"]["levels"])
        h = grid.spacing
        delta = q["delta_schedule"] or [4 * h, 2 * h, h]
        return QuasimeasureParams(q["k_budget"], tuple(delta), tuple(q["eps_schedule"]), sat)

    def problem(self) -> HammersteinProblem:
        d = self.data
        return HammersteinProblem(
            self.grid(),
            Kernel(d["kernel"]["family"], d["kernel"].get("params", {})),
            Nonlinearity(d["nonlinearity"]["family"], d["nonlinearity"].get("params", {})),
            Cone(d["cone"]["r"], d["cone"]["c"]),
            d["solver"]["radius"],
        )

    def probes(self) -> list[int]:
        p = self.data["darbo"]["probes"]
        if p is not None:
            return list(p)
        n = self.grid().size
        return sorted({int(round(i * (n - 1) / 4)) for i in range(5)})


# --------------------------------------------------------------------------
# ensemble files


class EnsembleFileError(ValueError):
    pass


ENSEMBLE_HEADER = "dim,half_width,points_per_axis,codomain_dim"


def write_ensemble(F: FunctionEnsemble, path: str | Path):
    g = F.grid
    lines = [ENSEMBLE_HEADER, f"{g.dim},{g.half_width!r},{g.points_per_axis},{F.codomain_dim}"]
    for member in F.values:
        lines.append(",".join(repr(float(v)) for v in member.ravel()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_ensemble(path: str | Path, grid: Grid | None = None) -> FunctionEnsemble:
    """Parse an ensemble CSV: a header row, a grid row, then one row per member.

    Member rows list values node by node (all codomain components of a node
    together). Errors name the offending line.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise EnsembleFileError(f"cannot read ensemble {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != ENSEMBLE_HEADER:
        raise EnsembleFileError(f"{path}: line 1: expected header {ENSEMBLE_HEADER!r}")
    if len(lines) < 3:
        raise EnsembleFileError(f"{path}: no member rows")
    try:
        dim, half, ppa, m = lines[1].split(",")
        file_grid = Grid(int(dim), float(half), int(ppa))
        m = int(m)
        if m < 1:
            raise ValueError("codomain_dim must be positive")
    except ValueError as exc:
        raise EnsembleFileError(f"{path}: line 2: bad grid row ({exc})") from exc
    if grid is not None and file_grid != grid:
        raise EnsembleFileError(f"{path}: line 2: grid {file_grid.to_dict()} does not match config {grid.to_dict()}")
    width = file_grid.size * m
    rows = []
    for no, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != width:
            raise EnsembleFileError(f"{path}: line {no}: expected {width} values, found {len(cells)}")
        try:
            row = [float(c) for c in cells]
        except ValueError as exc:
            raise EnsembleFileError(f"{path}: line {no}: {exc}") from exc
        if not all(np.isfinite(row)):
            raise EnsembleFileError(f"{path}: line {no}: non-finite value")
        rows.append(row)
    if not rows:
        raise EnsembleFileError(f"{path}: no member rows")
    return FunctionEnsemble(file_grid, np.array(rows).reshape(len(rows), file_grid.size, m))
