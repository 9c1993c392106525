import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgol.observables import (
    DiagnosticsError,
    TrajectoryRecord,
    cluster_function,
    cluster_function_batch,
    density,
    discretize,
    diversity,
    diversity_literal,
    populations,
    visibility,
)


def runs_oracle(bits):
    """Cluster sizes by itertools.groupby, independent of the diff-based code."""
    return [len(list(g)) for k, g in itertools.groupby(bits) if k == 1]


bit_lists = st.lists(st.integers(0, 1), min_size=1, max_size=64)


@given(bit_lists)
def test_cluster_function_matches_groupby(bits):
    counts = cluster_function(np.array(bits))
    expected = np.zeros(len(bits), dtype=int)
    for size in runs_oracle(bits):
        expected[size - 1] += 1
    assert np.array_equal(counts, expected)


@given(bit_lists)
def test_cluster_mass_and_reflection(bits):
    counts = cluster_function(np.array(bits))
    sizes = np.arange(1, len(bits) + 1)
    assert (sizes * counts).sum() == sum(bits)
    assert np.array_equal(counts, cluster_function(np.array(bits[::-1])))


def test_cluster_function_examples():
    assert list(cluster_function([0, 1, 1, 0, 1, 0, 0, 1, 1, 1])) == [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]
    assert cluster_function(np.ones(6, int))[5] == 1
    assert cluster_function(np.zeros(6, int)).sum() == 0


def test_batch_agrees_with_single():
    rng = np.random.default_rng(11)
    bits = rng.integers(0, 2, size=(200, 17))
    batch = cluster_function_batch(bits)
    for row, counts in zip(bits, batch):
        assert np.array_equal(counts, cluster_function(row))


def test_diversity_definitions():
    counts = cluster_function([1, 0, 1, 0, 1, 1, 0, 1, 1, 1])
    # sizes 1, 1, 2, 3 -> three distinct sizes, four clusters
    assert diversity(counts) == 3
    assert diversity_literal(counts) == 4


def test_discretize_is_strict():
    assert list(discretize([0.5, 0.5000001, 0.49, 1.0])) == [0, 1, 0, 1]


def test_density():
    assert density([1, 0, 1, 1]) == 0.75


def test_visibility_of_sine_wave():
    times = np.linspace(0, 10, 1001)
    n = np.sin(times) ** 2
    vis, truncated = visibility(n[None, :], times, np.pi / 2)
    k = 500
    window = (times >= times[k] - np.pi / 4 - 1e-12) & (times <= times[k] + np.pi / 4 + 1e-12)
    assert vis[0, k] == pytest.approx(n[window].max() - n[window].min())
    assert truncated[0] and truncated[-1] and not truncated[k]


def test_visibility_zero_for_constant():
    times = np.arange(0, 3, 0.1)
    vis, _ = visibility(np.full((3, times.size), 0.7), times, 1.0)
    assert np.all(vis == 0)


class _Unnormalised:
    def norm(self):
        return 1.01

    def populations(self):
        return np.zeros(5)


def test_populations_refuse_unnormalised_state():
    with pytest.raises(DiagnosticsError):
        populations(_Unnormalised())


@settings(max_examples=30)
@given(st.integers(5, 20), st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_record_fields_are_consistent(L, S, seed):
    rng = np.random.default_rng(seed)
    pops = rng.random((L, S))
    rec = TrajectoryRecord.from_populations(np.arange(S) * 0.1, pops, np.pi / 2)
    assert rec.discretized.shape == (L, S)
    mass = (np.arange(1, L + 1)[:, None] * rec.clusters).sum(axis=0)
    assert np.array_equal(mass, rec.discretized.sum(axis=0))
    assert np.allclose(rec.density, rec.discretized.mean(axis=0))
    assert np.array_equal(rec.diversity, (rec.clusters > 0).sum(axis=0))
