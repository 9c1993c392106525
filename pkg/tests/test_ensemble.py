import json
from pathlib import Path

import numpy as np
import pytest

from qgol.config import ensemble_spec_from_dict
from qgol.ensemble import (
    EnsembleSpec,
    EnsembleSummary,
    alive_count,
    equilibrium_estimate,
    fit_power_law,
    realization_seed,
    run_ensemble,
    sample_initial_config,
    scaling_study,
)
from qgol.trotter import EvolutionParams

FIXTURES = Path(__file__).parent / "fixtures"


def test_alive_count_rounds_half_up():
    assert alive_count(32, 0.5) == 16
    assert alive_count(10, 0.25) == 3  # 2.5 -> 3
    assert alive_count(12, 0.0) == 0 and alive_count(12, 1.0) == 12


def test_sampling_exact_count_and_determinism():
    for r in range(20):
        seed = realization_seed(9, 1, r)
        a = sample_initial_config(32, 0.5, seed)
        assert a.sum() == 16
        assert np.array_equal(a, sample_initial_config(32, 0.5, realization_seed(9, 1, r)))
    assert sample_initial_config(8, 0.0, realization_seed(0, 0, 0)).sum() == 0
    assert sample_initial_config(8, 1.0, realization_seed(0, 0, 0)).sum() == 8


def test_realization_seeds_are_distinct():
    configs = {sample_initial_config(40, 0.5, realization_seed(1, k, r)).tobytes() for k in range(3) for r in range(30)}
    assert len(configs) == 90


def test_sampling_rejects_bad_density():
    with pytest.raises(ValueError):
        sample_initial_config(10, 1.2, realization_seed(0, 0, 0))


def test_equilibrium_estimate():
    assert equilibrium_estimate(np.full(40, 0.3)) == (pytest.approx(0.3), 0.0)
    step = np.r_[np.ones(30), np.zeros(10)]
    assert equilibrium_estimate(step, 0.25) == (0.0, 1.0)
    with pytest.raises(ValueError):
        equilibrium_estimate(np.ones(7))


def test_classical_endpoints():
    s = run_ensemble(EnsembleSpec(L=32, rho0_grid=[0.0, 1.0], realizations=5))
    zero, one = s.points
    assert zero.rho_eq_mean == 0 and zero.delta_eq_mean == 0
    assert one.rho_eq_mean == 1 and one.delta_eq_mean == 1 and one.rho_eq_stderr == 0


def test_duplicate_grid_values_give_rows_per_entry():
    s = run_ensemble(EnsembleSpec(L=16, rho0_grid=[0.5, 0.5], realizations=4))
    assert len(s.rows()) == 2


def test_summary_roundtrip():
    s = run_ensemble(EnsembleSpec(L=16, rho0_grid=[0.25, 0.5], realizations=4, generations=40))
    back = EnsembleSummary.from_dict(json.loads(json.dumps(s.to_dict())))
    assert back.to_dict() == s.to_dict()


def test_classical_reproducible():
    spec = EnsembleSpec(L=20, rho0_grid=[0.3, 0.6], realizations=6, generations=50, master_seed=3)
    assert run_ensemble(spec).to_dict() == run_ensemble(spec).to_dict()


def test_stderr_shrinks_like_inverse_sqrt_r():
    small = run_ensemble(EnsembleSpec(L=64, rho0_grid=[0.5], realizations=30)).points[0]
    big = run_ensemble(EnsembleSpec(L=64, rho0_grid=[0.5], realizations=480, master_seed=1)).points[0]
    ratio = small.rho_eq_stderr / big.rho_eq_stderr
    # sqrt(480 / 30) = 4; sample stderr of 30 draws scatters by ~13%
    assert 2.8 < ratio < 5.5


def _mean_density_drift(L, rho0, k, generations):
    from qgol.classical import evolve_batch

    configs = np.stack([sample_initial_config(L, rho0, realization_seed(0, k, r)) for r in range(30)])
    series = evolve_batch(configs, generations).mean(axis=2).mean(axis=1)
    return equilibrium_estimate(series)[1]


def test_classical_equilibration_time_roughly_size_and_density_independent():
    # one drift threshold at one generation count, for every L and rho0; the
    # diagnostic is applied to the realization-averaged density so single-site
    # granularity noise at small L does not swamp the trend
    threshold = 0.02
    cases = [(L, rho0, k) for L in (32, 128, 512) for k, rho0 in enumerate((0.25, 0.5, 0.75))]
    for L, rho0, k in cases:
        assert _mean_density_drift(L, rho0, k, 200) < threshold, (L, rho0)
    # and the diagnostic does flag runs that are stopped too early
    assert max(_mean_density_drift(L, rho0, k, 40) for L, rho0, k in cases) > threshold


def test_quantum_checkpoint_resume(tmp_path):
    spec = EnsembleSpec(L=8, rho0_grid=[0.5], realizations=3, backend="exact",
                        params=EvolutionParams(dt=0.02, t_final=2.0, sample_interval=0.1))
    ckpt = tmp_path / "ck.jsonl"
    full = run_ensemble(spec, checkpoint=ckpt)
    assert len(ckpt.read_text().splitlines()) == 3
    # drop one line and resume: the missing realization is recomputed, the rest reused
    lines = ckpt.read_text().splitlines()
    ckpt.write_text("\n".join(lines[:2]) + "\n")
    again = run_ensemble(spec, checkpoint=ckpt)
    assert again.to_dict()["points"] == full.to_dict()["points"]


def test_exact_ensemble_regression_fixture():
    spec = ensemble_spec_from_dict(json.loads((FIXTURES / "ensemble_L12_exact_spec.json").read_text()))
    expected = json.loads((FIXTURES / "ensemble_L12_exact_expected.json").read_text())["points"]
    got = run_ensemble(spec).points
    for p, e in zip(got, expected):
        for key in ("rho0", "rho_eq_mean", "rho_eq_stderr", "delta_eq_mean", "delta_eq_stderr", "delta_literal_sum_mean"):
            assert getattr(p, key) == pytest.approx(e[key], abs=1e-8)
        assert [r.initial_config for r in p.realizations] == [r["initial_config"] for r in e["realizations"]]


def test_power_law_fit_recovers_exponent():
    L = np.array([32, 64, 128, 256, 512])
    b, se, ci, a = fit_power_law(L, 2.0 * L**0.5)
    assert b == pytest.approx(0.5) and a == pytest.approx(2.0)
    with pytest.raises(ValueError):
        fit_power_law([32, 64], [1, 2])


def test_scaling_study_needs_three_sizes():
    with pytest.raises(ValueError):
        scaling_study(0.5, [32])


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(L=16, rho0_grid=[1.5])
    with pytest.raises(ValueError):
        EnsembleSpec(L=16, rho0_grid=[0.5], realizations=0)
    with pytest.raises(ValueError):
        EnsembleSpec(L=16, rho0_grid=[0.5], backend="quantum")
