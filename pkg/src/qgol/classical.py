"""Classical reversible Game of Life on a chain.

A cell toggles iff exactly two or three of its four nearest cells (i +- 1,
i +- 2) are alive. With the default frozen boundary the outer two cells at
each end never toggle, mirroring the quantum model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeSpec, active_mask
from .observables import TrajectoryRecord, cluster_function_batch

SCAN_MAX_SITES = 16
BOUNDARIES = ("frozen", "periodic")


def _active(bits: np.ndarray, boundary: str) -> np.ndarray:
    if boundary == "frozen":
        return active_mask(bits)
    if boundary == "periodic":
        count = sum(np.roll(bits, s, axis=-1) for s in (-2, -1, 1, 2))
        return (count == 2) | (count == 3)
    raise ValueError(f"unknown boundary {boundary!r}; expected one of {BOUNDARIES}")


def classical_step(config, boundary: str = "frozen") -> np.ndarray:
    """One synchronous generation. Accepts a single config (L,) or a batch (..., L)."""
    bits = np.asarray(config, dtype=np.int8)
    LatticeSpec(bits.shape[-1])
    return bits ^ _active(bits, boundary).astype(np.int8)


@dataclass
class ClassicalTrajectory:
    configs: np.ndarray  # (G + 1, L), generation 0 first
    density: np.ndarray
    clusters: np.ndarray  # (G + 1, L); clusters[g, l - 1]
    diversity: np.ndarray
    diversity_literal: np.ndarray

    @property
    def generations(self) -> int:
        return self.configs.shape[0] - 1

    def to_record(self, generation_time: float = 1.0, metadata: dict | None = None) -> TrajectoryRecord:
        times = np.arange(self.configs.shape[0]) * generation_time
        meta = {"backend": "classical", "L": self.configs.shape[1]}
        meta.update(metadata or {})
        return TrajectoryRecord.from_bits(times, self.configs.T, generation_time, metadata=meta)


def evolve_batch(configs: np.ndarray, generations: int, boundary: str = "frozen") -> np.ndarray:
    """Stack of states with shape (G + 1, ..., L) for a batch of initial configs."""
    if generations < 1:
        raise ValueError("generations must be >= 1")
    bits = np.asarray(configs, dtype=np.int8)
    out = np.empty((generations + 1,) + bits.shape, dtype=np.int8)
    out[0] = bits
    for g in range(generations):
        out[g + 1] = classical_step(out[g], boundary)
    return out


def classical_evolve(config, generations: int, boundary: str = "frozen") -> ClassicalTrajectory:
    configs = evolve_batch(config, generations, boundary)
    clusters = cluster_function_batch(configs)
    return ClassicalTrajectory(
        configs=configs,
        density=configs.mean(axis=1),
        clusters=clusters,
        diversity=np.count_nonzero(clusters, axis=1),
        diversity_literal=clusters.sum(axis=1),
    )


@dataclass
class InjectivityReport:
    L: int
    boundary: str
    n_configs: int
    n_images: int
    bijective: bool
    collisions: list[tuple[str, ...]]  # preimage groups sharing one image, as bit strings

    @property
    def n_collision_groups(self) -> int:
        return len(self.collisions)

    def summary(self) -> str:
        verdict = "bijective" if self.bijective else f"NOT injective ({self.n_collision_groups} colliding groups)"
        return f"L={self.L} {self.boundary}: {self.n_configs} configs -> {self.n_images} images, {verdict}"


def _bitstring(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def injectivity_scan(L: int, boundary: str = "frozen", max_listed: int | None = None) -> InjectivityReport:
    """Apply one generation to all 2^L configurations and look for collisions."""
    LatticeSpec(L)
    if L > SCAN_MAX_SITES:
        raise ValueError(f"injectivity scan limited to L <= {SCAN_MAX_SITES}, got {L}")
    idx = np.arange(2**L, dtype=np.int64)
    # site i is bit (i - 1), same convention as the dense backend
    bits = ((idx[:, None] >> np.arange(L)) & 1).astype(np.int8)
    images = classical_step(bits, boundary).astype(np.int64) @ (1 << np.arange(L, dtype=np.int64))
    order = np.argsort(images, kind="stable")
    uniq, first, counts = np.unique(images[order], return_index=True, return_counts=True)
    collisions = []
    for start, count in zip(first[counts > 1], counts[counts > 1]):
        if max_listed is not None and len(collisions) >= max_listed:
            break
        group = order[start:start + count]
        collisions.append(tuple(_bitstring(bits[k]) for k in group))
    return InjectivityReport(
        L=L,
        boundary=boundary,
        n_configs=2**L,
        n_images=int(uniq.size),
        bijective=bool(uniq.size == 2**L),
        collisions=collisions,
    )
