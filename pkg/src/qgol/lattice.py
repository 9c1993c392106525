"""Chain geometry, activity rule and the projected-flip term structure.

Sites are numbered 1..L. A flip term lives on every site i in 3..L-2 and
flips i only when its four neighbours (i-2, i-1, i+1, i+2) hold exactly two
or three alive cells. The outer two sites at each end carry no term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ACTIVE_COUNTS = frozenset({2, 3})
MIN_SITES = 5


class LatticeError(ValueError):
    """Invalid lattice size or flip-site index."""


@dataclass(frozen=True)
class LatticeSpec:
    L: int

    def __post_init__(self) -> None:
        if int(self.L) != self.L or self.L < MIN_SITES:
            raise LatticeError(f"lattice too small: L={self.L}, need L >= {MIN_SITES}")

    @property
    def sites(self) -> range:
        return range(1, self.L + 1)

    @property
    def flip_sites(self) -> range:
        return range(3, self.L - 1)

    @property
    def frozen_sites(self) -> tuple[int, ...]:
        return (1, 2, self.L - 1, self.L)


@dataclass(frozen=True)
class HamTerm:
    """One projected-flip term: X on ``flip_site`` times the 2-or-3 neighbour projector."""

    flip_site: int
    neighbor_sites: tuple[int, int, int, int]
    active_counts: frozenset = field(default=ACTIVE_COUNTS)

    @property
    def window(self) -> tuple[int, int]:
        """First and last site touched by the term (inclusive)."""
        return self.flip_site - 2, self.flip_site + 2

    def projector_value(self, neighbor_bits: Sequence[int]) -> int:
        return int(sum(neighbor_bits) in self.active_counts)


def neighbor_indices(spec: LatticeSpec, i: int) -> tuple[int, int, int, int]:
    if not 3 <= i <= spec.L - 2:
        raise LatticeError(f"invalid flip site {i} for L={spec.L} (allowed 3..{spec.L - 2})")
    return (i - 2, i - 1, i + 1, i + 2)


def is_active(config: Sequence[int], i: int) -> bool:
    """True iff the four neighbours of site ``i`` (1-based) hold 2 or 3 alive cells."""
    spec = LatticeSpec(len(config))
    count = sum(int(config[j - 1]) for j in neighbor_indices(spec, i))
    return count in ACTIVE_COUNTS


def active_mask(bits: np.ndarray) -> np.ndarray:
    """Vectorised activity for every site of one or more configurations.

    ``bits`` has shape (..., L). Returns a boolean array of the same shape that
    is False on the four frozen boundary sites.
    """
    bits = np.asarray(bits, dtype=np.int8)
    L = bits.shape[-1]
    LatticeSpec(L)
    out = np.zeros(bits.shape, dtype=bool)
    count = bits[..., 0:L - 4] + bits[..., 1:L - 3] + bits[..., 3:L - 1] + bits[..., 4:L]
    out[..., 2:L - 2] = (count == 2) | (count == 3)
    return out


def build_terms(spec: LatticeSpec) -> list[HamTerm]:
    return [HamTerm(i, neighbor_indices(spec, i)) for i in spec.flip_sites]


def sublattice_partition(terms: Sequence[HamTerm]) -> tuple[list[HamTerm], list[HamTerm], list[HamTerm]]:
    """Split terms into three mutually commuting groups by flip site mod 3.

    Groups are ordered so the group containing site 3 comes first; terms inside
    a group are sorted by ascending flip site.
    """
    groups: tuple[list[HamTerm], ...] = ([], [], [])
    for term in sorted(terms, key=lambda t: t.flip_site):
        groups[term.flip_site % 3].append(term)
    return groups[0], groups[1], groups[2]


def mirror_site(L: int, i: int) -> int:
    return L + 1 - i


def local_gate(theta: float) -> np.ndarray:
    """Dense 32x32 matrix of exp(-i theta h) on the window (i-2, ..., i+2).

    Row/column index is b(i-2) + 2 b(i-1) + 4 b(i) + 8 b(i+1) + 16 b(i+2), i.e.
    the leftmost window site is the least significant bit, matching the global
    basis convention.
    """
    c, s = np.cos(theta), np.sin(theta)
    gate = np.eye(32, dtype=complex)
    for idx in range(32):
        if (idx >> 2) & 1:
            continue
        count = (idx & 1) + ((idx >> 1) & 1) + ((idx >> 3) & 1) + ((idx >> 4) & 1)
        if count not in ACTIVE_COUNTS:
            continue
        up = idx | 4
        gate[idx, idx] = gate[up, up] = c
        gate[idx, up] = gate[up, idx] = -1j * s
    return gate


def local_term_matrix() -> np.ndarray:
    """Dense 32x32 matrix of a single term h = X_i P_i on its five-site window."""
    h = np.zeros((32, 32))
    for idx in range(32):
        count = (idx & 1) + ((idx >> 1) & 1) + ((idx >> 3) & 1) + ((idx >> 4) & 1)
        if count in ACTIVE_COUNTS:
            h[idx, idx ^ 4] = 1.0
    return h
