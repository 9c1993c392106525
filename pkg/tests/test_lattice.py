import itertools

import numpy as np
import pytest

from qgol.lattice import (
    LatticeError,
    LatticeSpec,
    active_mask,
    build_terms,
    is_active,
    local_gate,
    local_term_matrix,
    mirror_site,
    neighbor_indices,
    sublattice_partition,
)


def test_small_lattice_rejected():
    with pytest.raises(LatticeError):
        LatticeSpec(4)


def test_flip_sites_skip_two_boundary_sites_each_side():
    spec = LatticeSpec(8)
    assert list(spec.flip_sites) == [3, 4, 5, 6]
    assert spec.frozen_sites == (1, 2, 7, 8)


def test_neighbor_indices():
    spec = LatticeSpec(10)
    assert neighbor_indices(spec, 3) == (1, 2, 4, 5)
    assert neighbor_indices(spec, 8) == (6, 7, 9, 10)
    for bad in (0, 1, 2, 9, 10, 11):
        with pytest.raises(LatticeError):
            neighbor_indices(spec, bad)


def test_is_active_counts():
    # site 3 of 11001: neighbours 1,2,4,5 hold four? no -> 1,1,0,1 = 3 alive
    assert is_active([1, 1, 0, 0, 1], 3)
    assert not is_active([1, 1, 0, 1, 1], 3)      # four alive
    assert not is_active([1, 0, 0, 0, 0], 3)      # one alive
    assert is_active([1, 0, 1, 1, 0], 3)          # two alive, centre ignored


def test_active_mask_matches_scalar_rule():
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, size=(50, 9))
    mask = active_mask(bits)
    for row, m in zip(bits, mask):
        expected = [False, False] + [is_active(row, i) for i in range(3, 8)] + [False, False]
        assert list(m) == expected


def test_partition_groups_commute_and_cover():
    terms = build_terms(LatticeSpec(13))
    groups = sublattice_partition(terms)
    assert sum(len(g) for g in groups) == len(terms)
    assert groups[0][0].flip_site == 3
    for g in groups:
        sites = [t.flip_site for t in g]
        assert sites == sorted(sites)
        # same-group flip sites are 3 apart: no term flips a site another term reads
        assert all(b - a == 3 for a, b in zip(sites, sites[1:]))


def test_local_term_is_hermitian_involution_on_support():
    h = local_term_matrix()
    assert np.array_equal(h, h.T)
    P = h @ h
    assert np.allclose(P @ P, P)          # projector
    assert np.allclose(np.diag(np.diag(P)), P)
    # projector counts: 10 of 16 neighbour patterns active, times 2 centre values
    assert int(np.trace(P)) == 20


def test_local_gate_is_exponential_of_term():
    import scipy.linalg

    theta = 0.37
    assert np.allclose(local_gate(theta), scipy.linalg.expm(-1j * theta * local_term_matrix()), atol=1e-13)


def test_mirror_site():
    L = 9
    assert [mirror_site(L, i) for i in (1, 3, 5, 9)] == [9, 7, 5, 1]


def test_activity_rule_is_reflection_symmetric():
    L = 8
    for bits in itertools.product((0, 1), repeat=L):
        mask = active_mask(np.array(bits))
        assert np.array_equal(mask[::-1], active_mask(np.array(bits[::-1])))
