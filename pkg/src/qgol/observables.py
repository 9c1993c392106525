"""Measured quantities: populations, visibility, discretisation, clusters, density, diversity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

NORM_TOLERANCE = 1e-6


class DiagnosticsError(RuntimeError):
    """State handed to a measurement is not normalised."""


def populations(state) -> np.ndarray:
    """Site occupations <n_i> for i = 1..L of a dense or MPS state."""
    norm = state.norm()
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise DiagnosticsError(f"state norm {norm!r} deviates from 1 by more than {NORM_TOLERANCE}")
    return state.populations()


def visibility(series: np.ndarray, times: np.ndarray, T: float) -> tuple[np.ndarray, np.ndarray]:
    """Max-minus-min of each site's population within a window of width T around every sample.

    ``series`` has shape (L, S) and ``times`` shape (S,). Returns the (L, S)
    visibility matrix and an (S,) flag marking samples whose window runs past
    the recorded time range (those windows are clipped, not dropped).
    """
    series = np.atleast_2d(np.asarray(series, dtype=float))
    times = np.asarray(times, dtype=float)
    half = T / 2
    eps = 1e-9 * max(1.0, T)
    lo = np.searchsorted(times, times - half - eps, side="left")
    hi = np.searchsorted(times, times + half + eps, side="right")
    vis = np.empty_like(series)
    for k in range(times.size):
        window = series[:, lo[k]:hi[k]]
        vis[:, k] = np.abs(window.max(axis=1) - window.min(axis=1))
    truncated = (times - half < times[0] - eps) | (times + half > times[-1] + eps)
    return vis, truncated


def discretize(n: np.ndarray) -> np.ndarray:
    """1 where the population is strictly above one half."""
    return (np.asarray(n) > 0.5).astype(np.int8)


def cluster_function(bits: np.ndarray) -> np.ndarray:
    """Histogram of maximal runs of ones.

    Returns an integer array ``c`` of length L where ``c[l - 1]`` is the number
    of clusters of size ``l``.
    """
    bits = np.asarray(bits, dtype=np.int8).ravel()
    L = bits.size
    padded = np.concatenate(([0], bits, [0]))
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return np.bincount(ends - starts, minlength=L + 1)[1:]


def cluster_function_batch(bits: np.ndarray) -> np.ndarray:
    """Cluster histograms for a (S, L) stack; returns (S, L)."""
    bits = np.asarray(bits, dtype=np.int8)
    S, L = bits.shape
    padded = np.zeros((S, L + 2), dtype=np.int8)
    padded[:, 1:-1] = bits
    edges = np.diff(padded, axis=1)
    rows, starts = np.nonzero(edges == 1)
    _, ends = np.nonzero(edges == -1)
    # nonzero walks row-major, so starts and ends pair up row by row
    out = np.zeros((S, L + 1), dtype=np.int64)
    np.add.at(out, (rows, ends - starts), 1)
    return out[:, 1:]


def density(bits: np.ndarray) -> float:
    bits = np.asarray(bits)
    return float(bits.sum()) / bits.size


def diversity(counts: np.ndarray) -> int:
    """Number of distinct cluster sizes present."""
    return int(np.count_nonzero(np.asarray(counts)))


def diversity_literal(counts: np.ndarray) -> int:
    """Plain sum of all cluster counts, i.e. the total number of clusters."""
    return int(np.asarray(counts).sum())


@dataclass
class TrajectoryRecord:
    """Sampled observables of one run.

    Matrices indexed by site (or cluster size) are stored site-major with
    shape (L, S); ``clusters[l - 1, k]`` counts clusters of size ``l`` at
    sample ``k``.
    """

    times: np.ndarray
    populations: np.ndarray
    visibility: np.ndarray
    visibility_truncated: np.ndarray
    discretized: np.ndarray
    clusters: np.ndarray
    density: np.ndarray
    diversity: np.ndarray
    diversity_literal: np.ndarray
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.populations.shape[0]

    @classmethod
    def from_populations(
        cls,
        times,
        pops,
        generation_time: float,
        diagnostics: dict | None = None,
        metadata: dict | None = None,
    ) -> "TrajectoryRecord":
        times = np.asarray(times, dtype=float)
        pops = np.asarray(pops, dtype=float)
        vis, truncated = visibility(pops, times, generation_time)
        disc = discretize(pops)
        return cls._from_bits(times, pops, vis, truncated, disc, diagnostics, metadata)

    @classmethod
    def from_bits(cls, times, bits, generation_time: float = 1.0, diagnostics=None, metadata=None) -> "TrajectoryRecord":
        """Record for a classical run where the configuration is the discretised population.

        The visibility window spans one generation either side of each sample.
        """
        bits = np.asarray(bits, dtype=np.int8)
        times = np.asarray(times, dtype=float)
        pops = bits.astype(float)
        vis, truncated = visibility(pops, times, 2.0 * generation_time)
        return cls._from_bits(times, pops, vis, truncated, bits, diagnostics, metadata)

    @classmethod
    def _from_bits(cls, times, pops, vis, truncated, disc, diagnostics, metadata):
        clusters = cluster_function_batch(disc.T).T
        return cls(
            times=times,
            populations=pops,
            visibility=vis,
            visibility_truncated=truncated,
            discretized=disc,
            clusters=clusters,
            density=disc.mean(axis=0),
            diversity=np.count_nonzero(clusters, axis=0),
            diversity_literal=clusters.sum(axis=0),
            diagnostics=dict(diagnostics or {}),
            metadata=dict(metadata or {}),
        )
