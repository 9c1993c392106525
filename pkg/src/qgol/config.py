"""Run configuration documents, presets, and file output."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .ensemble import EnsembleSpec, EnsembleSummary, sample_initial_config
from .lattice import LatticeSpec
from .observables import TrajectoryRecord
from .trotter import EvolutionParams

PRESETS = ("A", "B")
PRESET_A_PATTERN = "110011"
PRESET_B_ALIVE = 24


class ConfigError(ValueError):
    """Invalid configuration document; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"field '{field_name}': {message}")
        self.field = field_name


def preset_config(name: str, L: int) -> np.ndarray:
    """Named initial conditions, centred in the chain (left-biased when the slack is odd).

    A: two pairs of alive sites with two dead sites between them.
    B: 24 contiguous alive sites.
    """
    if name == "A":
        pattern = [int(c) for c in PRESET_A_PATTERN]
    elif name == "B":
        pattern = [1] * PRESET_B_ALIVE
    else:
        raise ConfigError("initial.preset", f"unknown preset {name!r}; expected one of {PRESETS}")
    if len(pattern) > L:
        raise ConfigError("initial.preset", f"preset {name} needs L >= {len(pattern)}, got {L}")
    bits = np.zeros(L, dtype=np.int8)
    start = (L - len(pattern)) // 2
    bits[start:start + len(pattern)] = pattern
    return bits


def parse_bits(text: str) -> np.ndarray:
    if not text or set(text) - {"0", "1"}:
        raise ConfigError("initial.bits", f"expected a string of 0/1 characters, got {text!r}")
    return np.array([int(c) for c in text], dtype=np.int8)


def _check_fields(doc: dict, allowed: set[str], where: str) -> None:
    if not isinstance(doc, dict):
        raise ConfigError(where or "<root>", "expected a mapping")
    for key in doc:
        if key not in allowed:
            name = f"{where}.{key}" if where else key
            raise ConfigError(name, "unknown field")


def _typed(doc: dict, key: str, kind, where: str = ""):
    value = doc[key]
    name = f"{where}.{key}" if where else key
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if (kind is int and isinstance(value, bool)) or not isinstance(value, kind):
        raise ConfigError(name, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


@dataclass
class RunConfig:
    L: int = 32
    backend: str = "exact"
    dt: float = 1e-2
    t_final: float = 10.0
    order: int = 4
    sample_interval: float | None = None
    generation_time: float = math.pi / 2
    bond_cap: int = 30
    initial: dict[str, Any] = field(default_factory=lambda: {"preset": "A"})
    output_dir: str = "out"
    save_amplitudes: bool = False

    _TYPES = {
        "L": int, "backend": str, "dt": float, "t_final": float, "order": int,
        "sample_interval": float, "generation_time": float, "bond_cap": int,
        "initial": dict, "output_dir": str, "save_amplitudes": bool,
    }

    def __post_init__(self) -> None:
        if self.backend not in ("exact", "mps"):
            raise ConfigError("backend", f"expected 'exact' or 'mps', got {self.backend!r}")
        try:
            LatticeSpec(self.L)
        except ValueError as exc:
            raise ConfigError("L", str(exc)) from None
        if self.bond_cap < 1:
            raise ConfigError("bond_cap", "must be >= 1")
        try:
            self.params()
        except ValueError as exc:
            raise ConfigError("params", str(exc)) from None
        self.initial_config()

    def params(self) -> EvolutionParams:
        return EvolutionParams(
            dt=self.dt, t_final=self.t_final, order=self.order,
            sample_interval=self.sample_interval, generation_time=self.generation_time,
        )

    def initial_config(self) -> np.ndarray:
        init = self.initial
        _check_fields(init, {"bits", "preset", "random"}, "initial")
        if len(init) != 1:
            raise ConfigError("initial", "give exactly one of 'bits', 'preset', 'random'")
        if "bits" in init:
            bits = parse_bits(_typed(init, "bits", str, "initial"))
            if bits.size != self.L:
                raise ConfigError("initial.bits", f"length {bits.size} does not match L={self.L}")
            return bits
        if "preset" in init:
            return preset_config(_typed(init, "preset", str, "initial"), self.L)
        rnd = init["random"]
        _check_fields(rnd, {"rho0", "seed"}, "initial.random")
        for key in ("rho0", "seed"):
            if key not in rnd:
                raise ConfigError(f"initial.random.{key}", "missing")
        rho0 = _typed(rnd, "rho0", float, "initial.random")
        if not 0.0 <= rho0 <= 1.0:
            raise ConfigError("initial.random.rho0", "must lie in [0, 1]")
        seed = _typed(rnd, "seed", int, "initial.random")
        return sample_initial_config(self.L, rho0, np.random.SeedSequence(seed))

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        _check_fields(doc, names, "")
        kwargs = {}
        for key in doc:
            if key == "sample_interval" and doc[key] is None:
                kwargs[key] = None
                continue
            kwargs[key] = _typed(doc, key, cls._TYPES[key])
        return cls(**kwargs)

    def digest(self) -> str:
        return config_hash(self.to_dict())


def config_hash(doc: dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def ensemble_spec_from_dict(doc: dict[str, Any]) -> EnsembleSpec:
    names = {f.name for f in dataclasses.fields(EnsembleSpec)}
    _check_fields(doc, names, "")
    doc = dict(doc)
    if "params" in doc:
        params = doc["params"]
        _check_fields(params, {f.name for f in dataclasses.fields(EvolutionParams)}, "params")
        try:
            doc["params"] = EvolutionParams(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError("params", str(exc)) from None
    try:
        return EnsembleSpec(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError("<spec>", str(exc)) from None


COMPARE_SHARED = ("L", "rho0_grid", "realizations", "master_seed", "window_fraction")


def compare_specs_from_dict(doc: dict[str, Any]) -> tuple[EnsembleSpec, EnsembleSpec]:
    """Split a compare document into (quantum, classical) ensemble specs.

    Shared keys sit at the top level; ``quantum`` and ``classical`` sections
    carry backend-specific keys and are both required.
    """
    _check_fields(doc, set(COMPARE_SHARED) | {"quantum", "classical"}, "")
    for section in ("quantum", "classical"):
        if section not in doc:
            raise ConfigError(section, "missing backend section")
    shared = {k: doc[k] for k in COMPARE_SHARED if k in doc}
    quantum = dict(doc["quantum"])
    _check_fields(quantum, {"backend", "params", "bond_cap"}, "quantum")
    if quantum.get("backend", "mps") not in ("exact", "mps"):
        raise ConfigError("quantum.backend", "expected 'exact' or 'mps'")
    quantum.setdefault("backend", "mps")
    classical = dict(doc["classical"])
    _check_fields(classical, {"generations", "boundary"}, "classical")
    return (
        ensemble_spec_from_dict({**shared, **quantum}),
        ensemble_spec_from_dict({**shared, **classical, "backend": "classical"}),
    )


def load_document(path: str | Path) -> dict[str, Any]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be a mapping")
    return doc


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def dump_json(doc: Any, path: Path) -> None:
    # json writes floats with repr(), which round-trips doubles exactly
    path.write_text(json.dumps(_jsonable(doc), indent=1, sort_keys=True, allow_nan=True) + "\n")


def write_trajectory(record: TrajectoryRecord, out_dir: str | Path, stem: str = "run") -> dict[str, Path]:
    """Write the long-form population table, cluster table and summary document."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "populations": out / f"{stem}_populations.csv",
        "clusters": out / f"{stem}_clusters.csv",
        "summary": out / f"{stem}_summary.json",
    }
    with paths["populations"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "site", "n", "v", "D"])
        for k, t in enumerate(record.times):
            for j in range(record.L):
                w.writerow([repr(float(t)), j + 1, repr(float(record.populations[j, k])),
                            repr(float(record.visibility[j, k])), int(record.discretized[j, k])])
    with paths["clusters"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "ell", "count"])
        for k, t in enumerate(record.times):
            for ell in range(1, record.L + 1):
                w.writerow([repr(float(t)), ell, int(record.clusters[ell - 1, k])])
    summary = {
        "times": record.times,
        "density": record.density,
        "diversity": record.diversity,
        "diversity_literal_sum": record.diversity_literal,
        "visibility_truncated_window": record.visibility_truncated,
        "diagnostics": record.diagnostics,
        "metadata": record.metadata,
    }
    dump_json(summary, paths["summary"])
    return paths


ENSEMBLE_COLUMNS = (
    "rho0", "rho_eq_mean", "rho_eq_stderr", "delta_eq_mean", "delta_eq_stderr",
    "delta_literal_sum_mean", "R", "backend",
)


def _cell(v):
    return repr(float(v)) if isinstance(v, float) else v


def write_ensemble(summary: EnsembleSummary, out_dir: str | Path, stem: str = "ensemble") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"table": out / f"{stem}.csv", "summary": out / f"{stem}_summary.json"}
    with paths["table"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ENSEMBLE_COLUMNS)
        for row in summary.rows():
            w.writerow([_cell(row[c]) for c in ENSEMBLE_COLUMNS])
    dump_json(summary.to_dict(), paths["summary"])
    return paths


COMPARE_FIELDS = ("rho_eq_mean", "rho_eq_stderr", "delta_eq_mean", "delta_eq_stderr", "delta_literal_sum_mean", "R")


def compare_rows(quantum: EnsembleSummary, classical: EnsembleSummary) -> list[dict[str, Any]]:
    rows = []
    for q, c in zip(quantum.points, classical.points):
        row: dict[str, Any] = {"rho0": q.rho0}
        for name in COMPARE_FIELDS:
            row[f"quantum_{name}"] = getattr(q, name)
        for name in COMPARE_FIELDS:
            row[f"classical_{name}"] = getattr(c, name)
        rows.append(row)
    return rows


def write_compare(quantum: EnsembleSummary, classical: EnsembleSummary, out_dir: str | Path,
                  stem: str = "compare") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = compare_rows(quantum, classical)
    paths = {"table": out / f"{stem}.csv", "summary": out / f"{stem}_summary.json"}
    with paths["table"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(rows[0]))
        for row in rows:
            w.writerow([_cell(v) for v in row.values()])
    dump_json({"quantum": quantum.to_dict(), "classical": classical.to_dict(),
               "code_version": __version__}, paths["summary"])
    return paths
