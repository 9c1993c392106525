"""Exact state-vector backend.

Basis convention: bit (i - 1) of the basis index is the occupation of site i,
so site 1 is the least significant bit.
"""

from __future__ import annotations

import functools
import itertools
import time
from dataclasses import dataclass

import numpy as np

from .lattice import ACTIVE_COUNTS, HamTerm, LatticeSpec, build_terms, sublattice_partition
from .observables import TrajectoryRecord
from .trotter import EvolutionParams, segment_schedule

DENSE_MAX_SITES = 24
ORACLE_MAX_SITES = 10
BIT_CONVENTION = "site i <-> bit (i-1) of basis index (site 1 = least significant bit)"

# (n_{i+2}, n_{i+1}, n_{i-1}, n_{i-2}) patterns that switch a term on
_ACTIVE_PATTERNS = [p for p in itertools.product((0, 1), repeat=4) if sum(p) in ACTIVE_COUNTS]


class BackendCapacityError(ValueError):
    """System is too large for the requested backend."""


@dataclass
class DenseState:
    amplitudes: np.ndarray
    L: int

    def copy(self) -> "DenseState":
        return DenseState(self.amplitudes.copy(), self.L)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def populations(self) -> np.ndarray:
        probs = self.probabilities()
        L = self.L
        return np.array(
            [probs.reshape(2 ** (L - i), 2, 2 ** (i - 1))[:, 1, :].sum() for i in range(1, L + 1)]
        )

    def window_view(self, term: HamTerm) -> np.ndarray:
        """View with axes (high, n_{i+2}, n_{i+1}, n_i, n_{i-1}, n_{i-2}, low)."""
        i = term.flip_site
        return self.amplitudes.reshape(2 ** (self.L - i - 2), 2, 2, 2, 2, 2, 2 ** (i - 3))

    def apply_hamiltonian(self) -> np.ndarray:
        """Return H|psi> as a new amplitude vector."""
        out = np.zeros_like(self.amplitudes)
        out_state = DenseState(out, self.L)
        for term in build_terms(LatticeSpec(self.L)):
            src = self.window_view(term)
            dst = out_state.window_view(term)
            for a, b, d, e in _ACTIVE_PATTERNS:
                dst[:, a, b, 0, d, e, :] += src[:, a, b, 1, d, e, :]
                dst[:, a, b, 1, d, e, :] += src[:, a, b, 0, d, e, :]
        return out

    def energy(self) -> float:
        return float(np.vdot(self.amplitudes, self.apply_hamiltonian()).real)


def config_index(config) -> int:
    return sum(int(b) << k for k, b in enumerate(config))


def init_dense(config) -> DenseState:
    L = len(config)
    LatticeSpec(L)
    if L > DENSE_MAX_SITES:
        raise BackendCapacityError(
            f"L={L} exceeds the dense backend cap of {DENSE_MAX_SITES} sites; use the mps backend"
        )
    psi = np.zeros(2**L, dtype=complex)
    psi[config_index(config)] = 1.0
    return DenseState(psi, L)


# Up to this size each term's rotated amplitude pairs are cached as index arrays
# (gather/scatter is several times faster than ten strided view updates).
PAIR_CACHE_MAX_SITES = 20


@functools.lru_cache(maxsize=256)
def _term_pairs(L: int, flip_site: int) -> np.ndarray:
    """Basis indices with the flip bit clear whose neighbours switch the term on."""
    idx = np.arange(2**L, dtype=np.int32 if L < 31 else np.int64)
    bit = flip_site - 1
    count = sum((idx >> (j - 1)) & 1 for j in (flip_site - 2, flip_site - 1, flip_site + 1, flip_site + 2))
    keep = (((idx >> bit) & 1) == 0) & ((count == 2) | (count == 3))
    return idx[keep]


def apply_term_propagator(state: DenseState, term: HamTerm, theta: float) -> DenseState:
    """Apply exp(-i theta h) for one term, in place; returns ``state``.

    Only amplitude pairs whose neighbour bits switch the term on are rotated.
    """
    if theta == 0.0:
        return state
    c, s = np.cos(theta), np.sin(theta)
    if state.L <= PAIR_CACHE_MAX_SITES:
        psi = state.amplitudes
        lo = _term_pairs(state.L, term.flip_site)
        hi = lo | (1 << (term.flip_site - 1))
        a, b = psi[lo], psi[hi]
        psi[lo] = c * a - 1j * s * b
        psi[hi] = c * b - 1j * s * a
        return state
    view = state.window_view(term)
    for p, q, d, e in _ACTIVE_PATTERNS:
        v0 = view[:, p, q, 0, d, e, :]
        v1 = view[:, p, q, 1, d, e, :]
        old0 = v0.copy()
        v0 *= c
        v0 -= 1j * s * v1
        v1 *= c
        v1 -= 1j * s * old0
    return state


def apply_schedule(state: DenseState, groups, schedule, dt: float) -> DenseState:
    for g, w in schedule:
        for term in groups[g]:
            apply_term_propagator(state, term, w * dt)
    return state


def trotter_step(state: DenseState, terms, params: EvolutionParams, n_steps: int = 1) -> DenseState:
    """Advance ``state`` in place by ``n_steps`` steps of size ``params.dt``."""
    groups = sublattice_partition(terms)
    return apply_schedule(state, groups, segment_schedule(params.order, n_steps), params.dt)


def dense_hamiltonian(L: int) -> np.ndarray:
    """Full 2^L x 2^L Hamiltonian, built by enumerating basis states."""
    if L > ORACLE_MAX_SITES:
        raise BackendCapacityError(f"L={L} exceeds the oracle cap of {ORACLE_MAX_SITES} sites")
    spec = LatticeSpec(L)
    dim = 2**L
    H = np.zeros((dim, dim))
    for idx in range(dim):
        bits = [(idx >> k) & 1 for k in range(L)]
        for i in spec.flip_sites:
            count = bits[i - 3] + bits[i - 2] + bits[i] + bits[i + 1]
            if count in ACTIVE_COUNTS:
                H[idx ^ (1 << (i - 1)), idx] += 1.0
    return H


def dense_oracle_evolve(state: DenseState, t: float) -> DenseState:
    """exp(-iHt)|psi> via eigendecomposition of the full Hamiltonian."""
    H = dense_hamiltonian(state.L)
    evals, evecs = np.linalg.eigh(H)
    coeffs = evecs.T @ state.amplitudes
    return DenseState(evecs @ (np.exp(-1j * evals * t) * coeffs), state.L)


def evolve_exact(config, params: EvolutionParams, metadata: dict | None = None) -> TrajectoryRecord:
    state = init_dense(config)
    L = state.L
    groups = sublattice_partition(build_terms(LatticeSpec(L)))
    schedule = segment_schedule(params.order, params.steps_per_sample)

    times = params.sample_times()
    pops = np.empty((L, len(times)))
    norms = np.empty(len(times))
    energies = np.empty(len(times))
    started = time.perf_counter()
    for k in range(len(times)):
        if k:
            apply_schedule(state, groups, schedule, params.dt)
        pops[:, k] = state.populations()
        norms[k] = state.norm()
        energies[k] = state.energy()

    meta = {
        "backend": "exact",
        "L": L,
        "dt": params.dt,
        "order": params.order,
        "t_final": params.t_final,
        "sample_interval": params.steps_per_sample * params.dt,
        "generation_time": params.generation_time,
        "bit_convention": BIT_CONVENTION,
        "initial_config": "".join(str(int(b)) for b in config),
        "wall_seconds": time.perf_counter() - started,
    }
    meta.update(metadata or {})
    return TrajectoryRecord.from_populations(
        times, pops, params.generation_time, diagnostics={"norm": norms, "energy": energies}, metadata=meta
    )
