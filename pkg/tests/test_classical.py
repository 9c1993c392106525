import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qgol.classical import classical_evolve, classical_step, evolve_batch, injectivity_scan
from qgol.lattice import is_active


def bits(s):
    return np.array([int(c) for c in s], dtype=np.int8)


def step_oracle(config):
    """Hand-rolled loop over sites, one at a time, from the rule as stated."""
    L = len(config)
    out = list(config)
    for i in range(3, L - 1):
        if is_active(config, i):
            out[i - 1] = 1 - config[i - 1]
    return out


def test_worked_example():
    assert "".join(map(str, classical_step(bits("0011001100")))) == "0011111100"
    traj = classical_evolve(bits("0011001100"), 2)
    assert ["".join(map(str, c)) for c in traj.configs] == ["0011001100", "0011111100", "0000110000"]


@pytest.mark.parametrize("L", [5, 6, 7, 9])
def test_exhaustive_against_oracle(L):
    for config in itertools.product((0, 1), repeat=L):
        assert list(classical_step(np.array(config))) == step_oracle(list(config))


@given(st.lists(st.integers(0, 1), min_size=5, max_size=40))
def test_boundary_frozen_and_reflection(config):
    c = np.array(config, dtype=np.int8)
    out = classical_step(c)
    assert np.array_equal(out[[0, 1, -2, -1]], c[[0, 1, -2, -1]])
    assert np.array_equal(classical_step(c[::-1]), out[::-1])


def test_fixed_points():
    for L in (5, 12, 33):
        for fill in (0, 1):
            c = np.full(L, fill, dtype=np.int8)
            traj = classical_evolve(c, 100)
            assert np.all(traj.density == fill)
            assert np.all(traj.diversity == fill)


def test_periodic_boundary_wraps():
    c = bits("1100000011")
    # with wrapping, site 1 sees sites L-1, L, 2, 3 -> 1+1+1+0 = 3 alive, flips off
    assert classical_step(c, boundary="periodic")[0] == 0
    assert classical_step(c, boundary="frozen")[0] == 1


def test_unknown_boundary():
    with pytest.raises(ValueError):
        classical_step(bits("00000"), boundary="mirror")


def test_batch_matches_single():
    rng = np.random.default_rng(2)
    configs = rng.integers(0, 2, size=(6, 15))
    hist = evolve_batch(configs, 20)
    for r in range(6):
        assert np.array_equal(hist[:, r], classical_evolve(configs[r], 20).configs)


def test_injectivity_small_sizes():
    rep5 = injectivity_scan(5)
    assert rep5.n_configs == 32
    assert rep5.bijective and rep5.collisions == []
    rep8 = injectivity_scan(8)
    assert rep8.n_configs == 256
    assert not rep8.bijective
    assert rep8.n_images == 190
    # every listed group really collides
    for group in rep8.collisions:
        images = {tuple(classical_step(bits(s))) for s in group}
        assert len(group) >= 2 and len(images) == 1
    assert "NOT injective" in rep8.summary()


def test_injectivity_scan_capacity():
    with pytest.raises(ValueError):
        injectivity_scan(17)


def test_periodic_rule_not_injective_at_five_sites():
    assert not injectivity_scan(5, boundary="periodic").bijective
