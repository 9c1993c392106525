"""Matrix-product-state backend with windowed five-site gates.

Tensors have legs (left bond, physical, right bond). Sites are stored
0-based internally; public functions that take a flip site use the 1-based
lattice numbering of :mod:`qgol.lattice`.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg

from .lattice import HamTerm, LatticeSpec, build_terms, local_gate, local_term_matrix, sublattice_partition
from .observables import TrajectoryRecord
from .trotter import EvolutionParams, segment_schedule

log = logging.getLogger(__name__)

DEFAULT_BOND_CAP = 30
RELATIVE_CUTOFF = 1e-10


def _svd(matrix: np.ndarray):
    try:
        return np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(matrix, full_matrices=False, check_finite=False, lapack_driver="gesvd")


# i**k for k mod 4, kept exact so gauge-transformed real gates stay exactly real
_I_POWERS = np.array([1, 1j, -1, -1j])


def window_phases(n_sites: int) -> np.ndarray:
    """Diagonal of D = diag(1, i) tensored over ``n_sites`` sites, lowest bit = first site."""
    idx = np.arange(2**n_sites)
    popcount = sum((idx >> k) & 1 for k in range(n_sites))
    return _I_POWERS[popcount % 4]


def to_gauge(matrix: np.ndarray) -> np.ndarray:
    """D O D^dagger for an operator on a window of sites.

    Stored MPS amplitudes are phi(x) = i^N(x) psi(x) / g. In that frame every
    term propagator is a real rotation, so a classical initial state keeps
    real tensors for the whole run.
    """
    n_sites = int(np.log2(matrix.shape[0]))
    d = window_phases(n_sites)
    out = d[:, None] * np.asarray(matrix, dtype=complex) * d.conj()[None, :]
    if not np.any(out.imag):
        return out.real.copy()
    return out


@dataclass
class MpsState:
    """Finite open-boundary MPS kept in mixed canonical form around ``center``.

    Amplitudes are stored in the occupation-phase frame (see :func:`to_gauge`):
    psi(x) = global_phase * (-i)^N(x) * phi(x). Populations are unaffected.

    ``discarded_weight`` accumulates the squared singular-value weight cut by
    truncation (relative to the pre-truncation norm at each cut) and
    ``log_raw_norm`` the log of the kept norm before renormalisation.
    ``truncation_ledger`` holds one discarded-weight entry per closed segment.
    """

    tensors: list[np.ndarray]
    bond_cap: int = DEFAULT_BOND_CAP
    cutoff: float = RELATIVE_CUTOFF
    center: int = 0
    global_phase: complex = 1.0
    discarded_weight: float = 0.0
    log_raw_norm: float = 0.0
    truncation_ledger: list[float] = field(default_factory=list)
    _pending: float = 0.0

    @property
    def L(self) -> int:
        return len(self.tensors)

    def bond_dimensions(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def max_bond(self) -> int:
        return max(self.bond_dimensions(), default=1)

    def copy(self) -> "MpsState":
        return replace(self, tensors=[t.copy() for t in self.tensors], truncation_ledger=list(self.truncation_ledger))

    def record_discarded(self, weight: float) -> None:
        self.discarded_weight += weight
        self._pending += weight

    def close_ledger_entry(self) -> float:
        """Append the weight discarded since the previous entry to the ledger."""
        self.truncation_ledger.append(self._pending)
        self._pending = 0.0
        return self.truncation_ledger[-1]

    # canonical form -------------------------------------------------------

    def move_center(self, target: int) -> None:
        """Shift the orthogonality centre to 0-based site ``target`` with QR steps."""
        while self.center < target:
            j = self.center
            a = self.tensors[j]
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl * d, dr))
            self.tensors[j] = q.reshape(dl, d, q.shape[1])
            self.tensors[j + 1] = np.tensordot(r, self.tensors[j + 1], axes=(1, 0))
            self.center += 1
        while self.center > target:
            j = self.center
            a = self.tensors[j]
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl, d * dr).T)
            self.tensors[j] = q.T.reshape(q.shape[1], d, dr)
            self.tensors[j - 1] = np.tensordot(self.tensors[j - 1], r.T, axes=(2, 0))
            self.center -= 1

    def is_canonical(self, atol: float = 1e-10) -> bool:
        """Sites left of the centre are left isometries, sites right of it right isometries."""
        for j, a in enumerate(self.tensors):
            dl, d, dr = a.shape
            if j < self.center:
                m = a.reshape(dl * d, dr)
                if not np.allclose(m.conj().T @ m, np.eye(dr), atol=atol):
                    return False
            elif j > self.center:
                m = a.reshape(dl, d * dr)
                if not np.allclose(m @ m.conj().T, np.eye(dl), atol=atol):
                    return False
        return True

    # contractions ---------------------------------------------------------

    def to_dense(self) -> np.ndarray:
        """Physical amplitude vector in the dense backend's convention (site 1 = lowest bit)."""
        phi = self.tensors[0]
        for t in self.tensors[1:]:
            phi = np.tensordot(phi, t, axes=(phi.ndim - 1, 0))
        phi = phi.reshape([2] * self.L)
        # C order puts site 1 first (most significant); reverse so it becomes the lowest bit
        phi = phi.transpose(range(self.L - 1, -1, -1)).reshape(-1)
        return self.global_phase * window_phases(self.L).conj() * phi

    # left environments have legs (bra, ket), right environments (ket, bra)

    def _left_environments(self) -> list[np.ndarray]:
        envs = [np.ones((1, 1))]
        for a in self.tensors:
            e = np.tensordot(envs[-1], a, axes=(1, 0))
            envs.append(np.tensordot(a.conj(), e, axes=([0, 1], [0, 1])))
        return envs

    def _right_environments(self) -> list[np.ndarray]:
        envs = [np.ones((1, 1))]
        for a in reversed(self.tensors):
            e = np.tensordot(a, envs[-1], axes=(2, 0))
            envs.append(np.tensordot(e, a.conj(), axes=([1, 2], [1, 2])))
        return envs[::-1]

    def norm(self) -> float:
        a = self.tensors[self.center]
        return float(np.sqrt(np.vdot(a, a).real))

    def full_norm(self) -> float:
        """Norm by full contraction, independent of the canonical form."""
        return float(np.sqrt(abs(self._left_environments()[-1][0, 0])))

    def populations(self) -> np.ndarray:
        left = self._left_environments()
        right = self._right_environments()
        out = np.empty(self.L)
        for j, a in enumerate(self.tensors):
            b = a[:, 1, :]
            out[j] = np.einsum("ab,ac,bd,dc->", left[j], b.conj(), b, right[j + 1]).real
        return out

    def _contract_window(self, left, right, first: int, cores) -> complex:
        env = left.reshape(left.shape[0], 1, left.shape[1])  # (bra, mpo, ket)
        for k, w in enumerate(cores):
            a = self.tensors[first + k]
            t = np.tensordot(env, a, axes=(2, 0))  # (bra, mpo, i, ket')
            t = np.tensordot(t, w, axes=([1, 2], [0, 2]))  # (bra, ket', o, mpo')
            env = np.tensordot(a.conj(), t, axes=([0, 1], [0, 2]))  # (bra', ket', mpo')
            env = env.transpose(0, 2, 1)
        return complex(np.einsum("xwy,yx->", env, right))

    def expect(self, op: "FiveSiteOperator") -> complex:
        """<psi|O|psi> for a physical-frame operator."""
        first = op.first_site - 1
        cores = FiveSiteOperator.from_matrix(to_gauge(op.to_matrix()), op.first_site).cores
        left = self._left_environments()[first]
        right = self._right_environments()[first + len(cores)]
        return self._contract_window(left, right, first, cores)

    def energy(self) -> float:
        cores = _term_cores()
        left = self._left_environments()
        right = self._right_environments()
        return float(sum(
            self._contract_window(left[f], right[f + 5], f, cores).real for f in range(self.L - 4)
        ))


def init_mps(config, bond_cap: int = DEFAULT_BOND_CAP, cutoff: float = RELATIVE_CUTOFF) -> MpsState:
    LatticeSpec(len(config))
    tensors = []
    for b in config:
        t = np.zeros((1, 2, 1))
        t[0, int(b), 0] = 1.0
        tensors.append(t)
    # phi(x0) = 1 requires psi(x0) = g * (-i)^N0 = 1
    n0 = int(sum(int(b) for b in config))
    return MpsState(tensors, bond_cap=bond_cap, cutoff=cutoff, global_phase=complex(_I_POWERS[n0 % 4]))


@dataclass
class FiveSiteOperator:
    """Operator on sites first..first+4 (1-based) as tensor-train cores.

    Each core has legs (left bond, out, in, right bond).
    """

    first_site: int
    cores: list[np.ndarray]

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, first_site: int, tol: float = 1e-13) -> "FiveSiteOperator":
        """Exact TT-SVD of a 32x32 matrix indexed with the leftmost site as lowest bit."""
        t = np.asarray(matrix).reshape([2] * 10)
        # axes now (o4..o0, i4..i0); interleave as (o0, i0, o1, i1, ...)
        t = t.transpose([4, 9, 3, 8, 2, 7, 1, 6, 0, 5])
        cores = []
        rest = t.reshape(1, -1)
        for _ in range(4):
            bl = rest.shape[0]
            u, s, vh = _svd(rest.reshape(bl * 4, -1))
            keep = max(1, int(np.count_nonzero(s > tol * s[0])))
            cores.append(u[:, :keep].reshape(bl, 2, 2, keep))
            rest = s[:keep, None] * vh[:keep]
        cores.append(rest.reshape(rest.shape[0], 2, 2, 1))
        return cls(first_site, cores)

    def bond_dimensions(self) -> list[int]:
        return [c.shape[3] for c in self.cores[:-1]]

    @cached_property
    def matrix(self) -> np.ndarray:
        t = self.cores[0]
        for c in self.cores[1:]:
            t = np.tensordot(t, c, axes=(t.ndim - 1, 0))
        t = t.reshape([2] * 10)  # (o0, i0, o1, i1, ..., o4, i4)
        t = t.transpose([8, 6, 4, 2, 0, 9, 7, 5, 3, 1])
        return t.reshape(32, 32)

    def to_matrix(self) -> np.ndarray:
        return self.matrix


_TERM_CORES: list[np.ndarray] = []


def _term_cores() -> list[np.ndarray]:
    if not _TERM_CORES:
        _TERM_CORES.extend(FiveSiteOperator.from_matrix(to_gauge(local_term_matrix()), 1).cores)
    return _TERM_CORES


def term_propagator_operator(term: HamTerm, theta: float) -> FiveSiteOperator:
    return FiveSiteOperator.from_matrix(local_gate(theta), term.window[0])


def _window_gate_tensor(matrix: np.ndarray) -> np.ndarray:
    """Reorder a 32x32 window matrix so it acts on C-ordered (s0, ..., s4) indices."""
    t = matrix.reshape([2] * 10)  # (o4..o0, i4..i0)
    return t.transpose([4, 3, 2, 1, 0, 9, 8, 7, 6, 5]).reshape(32, 32)


def apply_and_compress(state: MpsState, op, m: int | None = None) -> float:
    """Apply a physical-frame five-site operator in place and recompress to bond cap ``m``.

    ``op`` is a :class:`FiveSiteOperator` or a ``(first_site, matrix)`` pair.
    Returns the weight discarded by this application; the centre ends on the
    window's last site. Non-unitary operators are applied and then renormalised.
    """
    if isinstance(op, FiveSiteOperator):
        first_site, matrix = op.first_site, op.to_matrix()
    else:
        first_site, matrix = op
    return _apply_window(state, first_site - 1, _window_gate_tensor(to_gauge(matrix)), m)


def _apply_window(state: MpsState, first: int, gate_c: np.ndarray, m: int | None) -> float:
    m = state.bond_cap if m is None else m
    last = first + 4
    if first < 0 or last >= state.L:
        raise ValueError(f"window {first + 1}..{last + 1} outside 1..{state.L}")
    if state.center < first:
        state.move_center(first)
    elif state.center > last:
        state.move_center(last)

    theta = state.tensors[first]
    for j in range(first + 1, last + 1):
        theta = np.tensordot(theta, state.tensors[j], axes=(theta.ndim - 1, 0))
    dl, dr = theta.shape[0], theta.shape[-1]
    theta = theta.reshape(dl, 32, dr)
    new = np.matmul(gate_c, theta)
    if np.array_equal(new, theta):
        return 0.0

    discarded = 0.0
    rest = new.reshape(dl, -1)
    bl = dl
    for k in range(4):
        u, rest, fraction = _split_left(rest.reshape(bl * 2, -1), m, state)
        discarded += fraction
        state.tensors[first + k] = u.reshape(bl, 2, u.shape[1])
        bl = u.shape[1]
    rest /= np.linalg.norm(rest)
    state.tensors[last] = rest.reshape(bl, 2, dr)
    state.center = last
    state.record_discarded(discarded)
    return discarded


# Gram eigenvalues below this fraction of the largest are rounding noise.
_GRAM_NOISE = 1e-13


def _split_left(matrix: np.ndarray, m: int, state: MpsState) -> tuple[np.ndarray, np.ndarray, float]:
    """Factor ``matrix = U @ R`` with U a left isometry, truncating to at most ``m`` columns.

    When the bond has to be cut to ``m`` anyway, U comes from the eigenvectors
    of the reduced density matrix ``M M^dagger``; this is much cheaper than an
    SVD of the wide matrix and only loses precision in discarded directions.
    Otherwise an SVD honours the relative singular-value cutoff exactly.
    Returns (U, R renormalised to the incoming norm, discarded fraction).
    """
    rows, cols = matrix.shape
    if min(rows, cols) > m:
        gram = matrix @ matrix.conj().T
        w, v = scipy.linalg.eigh(gram, driver="evd", check_finite=False)
        w = w[::-1]
        if w[m] > _GRAM_NOISE * w[0]:
            w = np.clip(w, 0.0, None)
            total = float(w.sum())
            keep = min(m, int(np.count_nonzero(w > state.cutoff**2 * w[0])))
            kept = float(w[:keep].sum())
            u = np.ascontiguousarray(v[:, ::-1][:, :keep])
            rest = u.conj().T @ matrix
            return u, rest * np.sqrt(total / kept), _account(state, total, kept)
    u, s, vh = _svd(matrix)
    total = float(np.dot(s, s))
    keep = max(1, min(m, int(np.count_nonzero(s > state.cutoff * s[0]))))
    kept = float(np.dot(s[:keep], s[:keep]))
    rest = (s[:keep] * np.sqrt(total / kept))[:, None] * vh[:keep]
    return u[:, :keep], rest, _account(state, total, kept)


def _account(state: MpsState, total: float, kept: float) -> float:
    if total <= 0.0:
        return 0.0
    state.log_raw_norm += 0.5 * np.log(kept / total)
    return (total - kept) / total


class _GateCache:
    def __init__(self) -> None:
        self._cache: dict[float, np.ndarray] = {}

    def __call__(self, theta: float) -> np.ndarray:
        g = self._cache.get(theta)
        if g is None:
            g = self._cache[theta] = _window_gate_tensor(to_gauge(local_gate(theta)))
        return g


def apply_schedule(state: MpsState, groups, schedule, dt: float, gates: _GateCache, m: int) -> None:
    """Run a merged product-formula schedule; groups are swept in ascending site order."""
    for g, w in schedule:
        gate = gates(w * dt)
        for term in groups[g]:
            _apply_window(state, term.flip_site - 3, gate, m)


def evolve_mps(
    config,
    params: EvolutionParams,
    m: int = DEFAULT_BOND_CAP,
    metadata: dict | None = None,
    measure_energy: bool = True,
) -> TrajectoryRecord:
    state = init_mps(config, bond_cap=m)
    L = state.L
    groups = sublattice_partition(build_terms(LatticeSpec(L)))
    schedule = segment_schedule(params.order, params.steps_per_sample)
    gates = _GateCache()

    times = params.sample_times()
    S = len(times)
    pops = np.empty((L, S))
    names = ("norm", "full_norm", "energy", "discarded_weight", "log_raw_norm", "max_bond")
    diag = {name: np.empty(S) for name in names}
    started = time.perf_counter()
    for k in range(S):
        if k:
            apply_schedule(state, groups, schedule, params.dt, gates, m)
            state.close_ledger_entry()
        pops[:, k] = state.populations()
        diag["norm"][k] = state.norm()
        diag["full_norm"][k] = state.full_norm()
        diag["energy"][k] = state.energy() if measure_energy else np.nan
        diag["discarded_weight"][k] = state.discarded_weight
        diag["log_raw_norm"][k] = state.log_raw_norm
        diag["max_bond"][k] = state.max_bond()
        if k and k % 100 == 0:
            log.info("mps t=%.2f chi=%d discarded=%.3g elapsed=%.0fs", times[k], diag["max_bond"][k],
                     state.discarded_weight, time.perf_counter() - started)

    meta = {
        "backend": "mps",
        "L": L,
        "dt": params.dt,
        "order": params.order,
        "t_final": params.t_final,
        "sample_interval": params.steps_per_sample * params.dt,
        "generation_time": params.generation_time,
        "bond_cap": m,
        "relative_cutoff": state.cutoff,
        "initial_config": "".join(str(int(b)) for b in config),
        "wall_seconds": time.perf_counter() - started,
    }
    meta.update(metadata or {})
    return TrajectoryRecord.from_populations(times, pops, params.generation_time, diagnostics=diag, metadata=meta)
