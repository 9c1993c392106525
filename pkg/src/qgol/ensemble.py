"""Random initial states, ensemble averages, equilibrium values and size scaling."""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .classical import evolve_batch
from .dense import evolve_exact
from .lattice import LatticeSpec
from .mps import DEFAULT_BOND_CAP, evolve_mps
from .observables import cluster_function_batch
from .trotter import EvolutionParams

log = logging.getLogger(__name__)

BACKENDS = ("exact", "mps", "classical")
SEED_SCHEME = "numpy SeedSequence(master_seed, spawn_key=(rho0_index, realization)) -> PCG64"
DEFAULT_QUANTUM_T_FINAL = 100.0
DEFAULT_GENERATIONS = 200


class EnsembleRunError(RuntimeError):
    """A single realization failed; the message names the offending (rho0, realization)."""


def alive_count(L: int, rho0: float) -> int:
    """round(rho0 * L) with halves rounded up."""
    return int(math.floor(rho0 * L + 0.5))


def realization_seed(master_seed: int, rho_index: int, realization: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(rho_index, realization))


def sample_initial_config(L: int, rho0: float, seed) -> np.ndarray:
    """Exactly round(rho0 * L) alive sites at uniformly random positions."""
    if not 0.0 <= rho0 <= 1.0:
        raise ValueError(f"rho0 must lie in [0, 1], got {rho0}")
    LatticeSpec(L)
    rng = np.random.Generator(np.random.PCG64(seed))
    bits = np.zeros(L, dtype=np.int8)
    bits[rng.choice(L, size=alive_count(L, rho0), replace=False)] = 1
    return bits


def equilibrium_estimate(series, window_fraction: float = 0.25) -> tuple[float, float]:
    """Mean over the final ``window_fraction`` of samples and a drift diagnostic.

    Drift is |mean of the last quarter - mean of the third quarter|.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 8:
        raise ValueError(f"series too short for an equilibrium estimate: {n} < 8 samples")
    if not 0.0 < window_fraction <= 1.0:
        raise ValueError("window_fraction must lie in (0, 1]")
    tail = max(1, int(math.ceil(window_fraction * n)))
    q = n // 4
    drift = abs(x[n - q:].mean() - x[n - 2 * q:n - q].mean())
    return float(x[n - tail:].mean()), float(drift)


@dataclass
class EnsembleSpec:
    L: int
    rho0_grid: list[float]
    realizations: int = 30
    backend: str = "classical"
    params: EvolutionParams = field(default_factory=lambda: EvolutionParams(t_final=DEFAULT_QUANTUM_T_FINAL))
    bond_cap: int = DEFAULT_BOND_CAP
    generations: int = DEFAULT_GENERATIONS
    boundary: str = "frozen"
    master_seed: int = 0
    window_fraction: float = 0.25

    def __post_init__(self) -> None:
        LatticeSpec(self.L)
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if not self.rho0_grid:
            raise ValueError("rho0_grid is empty")
        for r in self.rho0_grid:
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"rho0 values must lie in [0, 1], got {r}")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["rho0_grid"] = list(self.rho0_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EnsembleSpec":
        d = dict(d)
        if isinstance(d.get("params"), dict):
            d["params"] = EvolutionParams(**d["params"])
        return cls(**d)


@dataclass
class RealizationResult:
    rho_index: int
    realization: int
    initial_config: str
    rho_eq: float
    delta_eq: float
    delta_literal_eq: float
    rho_drift: float
    delta_drift: float
    max_discarded_weight: float = 0.0

    def key(self) -> tuple[int, int]:
        return self.rho_index, self.realization


@dataclass
class RhoPoint:
    rho0: float
    rho_eq_mean: float
    rho_eq_stderr: float
    delta_eq_mean: float
    delta_eq_stderr: float
    delta_literal_sum_mean: float
    delta_literal_sum_stderr: float
    R: int
    backend: str
    realizations: list[RealizationResult]

    def row(self) -> dict[str, Any]:
        d = asdict(self)
        del d["realizations"]
        return d


@dataclass
class EnsembleSummary:
    points: list[RhoPoint]
    metadata: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"points": [asdict(p) for p in self.points], "metadata": self.metadata}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EnsembleSummary":
        points = []
        for p in d["points"]:
            p = dict(p)
            p["realizations"] = [RealizationResult(**r) for r in p["realizations"]]
            points.append(RhoPoint(**p))
        return cls(points, dict(d["metadata"]))

    def rows(self) -> list[dict[str, Any]]:
        return [p.row() for p in self.points]


def _mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _quantum_task(args) -> RealizationResult:
    spec, rho_index, r = args
    rho0 = spec.rho0_grid[rho_index]
    config = sample_initial_config(spec.L, rho0, realization_seed(spec.master_seed, rho_index, r))
    try:
        if spec.backend == "exact":
            rec = evolve_exact(config, spec.params)
            max_discarded = 0.0
        else:
            rec = evolve_mps(config, spec.params, m=spec.bond_cap, measure_energy=False)
            max_discarded = float(rec.diagnostics["discarded_weight"][-1])
    except Exception as exc:
        raise EnsembleRunError(f"{spec.backend} run failed at rho0={rho0} realization={r}: {exc}") from exc
    rho_eq, rho_drift = equilibrium_estimate(rec.density, spec.window_fraction)
    delta_eq, delta_drift = equilibrium_estimate(rec.diversity, spec.window_fraction)
    lit_eq, _ = equilibrium_estimate(rec.diversity_literal, spec.window_fraction)
    return RealizationResult(
        rho_index, r, "".join(map(str, config)), rho_eq, delta_eq, lit_eq, rho_drift, delta_drift, max_discarded
    )


def _classical_point(spec: EnsembleSpec, rho_index: int) -> list[RealizationResult]:
    rho0 = spec.rho0_grid[rho_index]
    configs = np.stack([
        sample_initial_config(spec.L, rho0, realization_seed(spec.master_seed, rho_index, r))
        for r in range(spec.realizations)
    ])
    history = evolve_batch(configs, spec.generations, spec.boundary)  # (G + 1, R, L)
    G1, R, L = history.shape
    clusters = cluster_function_batch(history.reshape(G1 * R, L)).reshape(G1, R, L)
    density = history.mean(axis=2)
    diversity = np.count_nonzero(clusters, axis=2)
    literal = clusters.sum(axis=2)
    out = []
    for r in range(R):
        rho_eq, rho_drift = equilibrium_estimate(density[:, r], spec.window_fraction)
        delta_eq, delta_drift = equilibrium_estimate(diversity[:, r], spec.window_fraction)
        lit_eq, _ = equilibrium_estimate(literal[:, r], spec.window_fraction)
        out.append(RealizationResult(
            rho_index, r, "".join(map(str, configs[r])), rho_eq, delta_eq, lit_eq, rho_drift, delta_drift
        ))
    return out


def _load_checkpoint(path: Path) -> dict[tuple[int, int], RealizationResult]:
    done = {}
    if path.exists():
        with path.open() as fh:
            for line in fh:
                if line.strip():
                    res = RealizationResult(**json.loads(line))
                    done[res.key()] = res
    return done


def run_ensemble(spec: EnsembleSpec, workers: int = 1, checkpoint: str | os.PathLike | None = None) -> EnsembleSummary:
    """Evolve every (rho0, realization) pair and aggregate equilibrium values.

    Quantum realizations are independent tasks; with ``workers > 1`` they run in
    a process pool. ``checkpoint`` names a JSON-lines file of finished
    realizations that is appended to as work completes and reused on restart;
    it must only be shared between runs of the same spec.
    """
    results: dict[tuple[int, int], RealizationResult] = {}
    if spec.backend == "classical":
        for k in range(len(spec.rho0_grid)):
            for res in _classical_point(spec, k):
                results[res.key()] = res
    else:
        ckpt = Path(checkpoint) if checkpoint else None
        if ckpt:
            results.update(_load_checkpoint(ckpt))
        # realization-major order, so an interrupted run has covered the whole grid evenly
        tasks = [
            (spec, k, r)
            for r in range(spec.realizations)
            for k in range(len(spec.rho0_grid))
            if (k, r) not in results
        ]
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                finished = pool.map(_quantum_task, tasks)
                for res in finished:
                    results[res.key()] = res
                    _append(ckpt, res)
        else:
            for task in tasks:
                res = _quantum_task(task)
                log.info("rho0=%s realization=%d rho_eq=%.4f delta_eq=%.3f",
                         spec.rho0_grid[res.rho_index], res.realization, res.rho_eq, res.delta_eq)
                results[res.key()] = res
                _append(ckpt, res)

    points = []
    for k, rho0 in enumerate(spec.rho0_grid):
        reals = [results[(k, r)] for r in range(spec.realizations)]
        rho_m, rho_se = _mean_stderr([x.rho_eq for x in reals])
        del_m, del_se = _mean_stderr([x.delta_eq for x in reals])
        lit_m, lit_se = _mean_stderr([x.delta_literal_eq for x in reals])
        points.append(RhoPoint(rho0, rho_m, rho_se, del_m, del_se, lit_m, lit_se, len(reals), spec.backend, reals))
    return EnsembleSummary(points, _metadata(spec))


def _append(path: Path | None, res: RealizationResult) -> None:
    if path is None:
        return
    with path.open("a") as fh:
        fh.write(json.dumps(asdict(res)) + "\n")


def _metadata(spec: EnsembleSpec) -> dict[str, Any]:
    meta = {
        "spec": spec.to_dict(),
        "backend": spec.backend,
        "seed_scheme": SEED_SCHEME,
        "master_seed": spec.master_seed,
        "window_fraction": spec.window_fraction,
        "diversity_definition": "distinct cluster sizes (delta); total cluster count (delta_literal_sum)",
        "code_version": __version__,
    }
    if spec.backend == "classical":
        meta.update(generations=spec.generations, boundary=spec.boundary)
    else:
        meta.update(dt=spec.params.dt, order=spec.params.order, t_final=spec.params.t_final)
        if spec.backend == "mps":
            meta["bond_cap"] = spec.bond_cap
    return meta


@dataclass
class ScalingResult:
    rho0: float
    sizes: list[int]
    rho_mean: list[float]
    rho_stderr: list[float]
    delta_mean: list[float]
    delta_stderr: list[float]
    exponent: float
    exponent_stderr: float
    exponent_ci: tuple[float, float]
    prefactor: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def fit_power_law(sizes, values, confidence: float = 0.95) -> tuple[float, float, tuple[float, float], float]:
    """Least-squares fit of log(values) = a + b log(sizes); returns (b, stderr, CI, exp(a))."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if sizes.size < 3:
        raise ValueError(f"power-law fit needs at least 3 sizes, got {sizes.size}")
    fit = stats.linregress(np.log(sizes), np.log(values))
    tcrit = stats.t.ppf(0.5 + confidence / 2, sizes.size - 2)
    half = tcrit * fit.stderr
    return float(fit.slope), float(fit.stderr), (float(fit.slope - half), float(fit.slope + half)), float(np.exp(fit.intercept))


def scaling_study(
    rho0: float,
    sizes: Sequence[int],
    realizations: int = 30,
    generations: int = DEFAULT_GENERATIONS,
    master_seed: int = 0,
    boundary: str = "frozen",
    window_fraction: float = 0.25,
) -> ScalingResult:
    """Classical equilibrium density and diversity versus chain length, with a power-law fit of diversity."""
    if len(sizes) < 3:
        raise ValueError(f"scaling study needs at least 3 sizes, got {len(sizes)}")
    rows = []
    for L in sizes:
        spec = EnsembleSpec(
            L=L, rho0_grid=[rho0], realizations=realizations, backend="classical",
            generations=generations, boundary=boundary, master_seed=master_seed,
            window_fraction=window_fraction,
        )
        rows.append(run_ensemble(spec).points[0])
    b, se, ci, a = fit_power_law(sizes, [p.delta_eq_mean for p in rows])
    return ScalingResult(
        rho0=rho0,
        sizes=list(sizes),
        rho_mean=[p.rho_eq_mean for p in rows],
        rho_stderr=[p.rho_eq_stderr for p in rows],
        delta_mean=[p.delta_eq_mean for p in rows],
        delta_stderr=[p.delta_eq_stderr for p in rows],
        exponent=b,
        exponent_stderr=se,
        exponent_ci=ci,
        prefactor=a,
    )
