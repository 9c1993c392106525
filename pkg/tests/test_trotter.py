import numpy as np
import pytest

from qgol.trotter import EvolutionParams, merge_stages, segment_schedule, step_schedule


def _weights(schedule):
    totals = np.zeros(3)
    for group, w in schedule:
        totals[group] += w
    return totals


@pytest.mark.parametrize("order", [1, 2, 4])
def test_each_group_gets_full_step(order):
    assert np.allclose(_weights(step_schedule(order)), 1.0)


@pytest.mark.parametrize("order", [1, 2, 4])
def test_segment_weights_scale_with_steps(order):
    sched = segment_schedule(order, 7)
    assert np.allclose(_weights(sched), 7.0)
    # no two consecutive stages on the same group survive merging
    assert all(a[0] != b[0] for a, b in zip(sched, sched[1:]))


def test_strang_is_symmetric():
    s = step_schedule(2)
    assert [g for g, _ in s] == [g for g, _ in reversed(s)]


def test_merge_stages_combines_neighbours():
    assert merge_stages([(0, 0.5), (0, 0.5), (1, 1.0)]) == [(0, 1.0), (1, 1.0)]


def test_default_params():
    p = EvolutionParams()
    assert p.dt == 1e-2 and p.order == 4
    assert p.steps_per_sample == 5
    assert p.n_samples == 2000
    assert p.generation_time == pytest.approx(np.pi / 2)


def test_sample_interval_must_be_multiple_of_dt():
    with pytest.raises(ValueError):
        EvolutionParams(dt=0.01, t_final=1.0, sample_interval=0.015)


def test_unsupported_order():
    with pytest.raises(ValueError):
        EvolutionParams(order=3)


def test_sample_times():
    p = EvolutionParams(dt=0.1, t_final=1.0, sample_interval=0.5)
    assert np.allclose(p.sample_times(), [0.0, 0.5, 1.0])
