import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jchsim.dynamics import InitialStateSpec, run_sequence, simulation_sequence
from jchsim.hilbert import CompositeSpace
from jchsim.model import JchParams
from jchsim.noise import (NoiseModel, check_truncation, draw_shot, ensemble_run, sample_intensity_factor,
                          sample_thermal_occupation, shot_rng, thermal_tail_mass, thermal_weights)


@given(st.floats(0, 5), st.integers(0, 6))
def test_thermal_weights_normalised_and_geometric(nbar, cutoff):
    w = thermal_weights(nbar, cutoff)
    assert w.sum() == pytest.approx(1.0)
    assert np.all(w >= 0)
    if nbar > 0 and cutoff > 0:
        np.testing.assert_allclose(w[1:], w[:-1] * nbar / (1 + nbar), rtol=1e-9, atol=1e-300)


def test_thermal_weights_values():
    w = thermal_weights(0.03, 2)
    raw = np.array([1, 0.03, 0.03 ** 2]) / 1.03 ** np.arange(1, 4)
    np.testing.assert_allclose(w, raw / raw.sum())
    assert thermal_tail_mass(0.03, 2) == pytest.approx((0.03 / 1.03) ** 3)
    with pytest.raises(ValueError):
        thermal_weights(-0.1, 2)


def test_thermal_sampler_frequencies():
    rng = np.random.default_rng(1)
    draws = np.array([sample_thermal_occupation(0.5, rng, 3) for _ in range(20000)])
    freq = np.bincount(draws, minlength=4) / len(draws)
    np.testing.assert_allclose(freq, thermal_weights(0.5, 3), atol=0.01)
    assert sample_thermal_occupation(0.0, rng, 2) == 0
    assert sample_thermal_occupation(5.0, rng, 0) == 0


def test_intensity_factor():
    rng = np.random.default_rng(2)
    s = np.array([sample_intensity_factor(0.02, rng) for _ in range(20000)])
    assert s.mean() == pytest.approx(1.0, abs=1e-3)
    assert s.std() == pytest.approx(0.02, rel=0.03)
    assert sample_intensity_factor(0.0, rng) == 1.0
    assert all(sample_intensity_factor(2.0, rng) > 0 for _ in range(200))


def test_shot_streams_are_fixed_and_distinct():
    a = shot_rng(7, 3).random(4)
    np.testing.assert_array_equal(a, shot_rng(7, 3).random(4))
    assert not np.array_equal(a, shot_rng(7, 4).random(4))
    assert not np.array_equal(a, shot_rng(8, 3).random(4))


def test_draw_shot_order_and_correlation():
    noise = NoiseModel(nbar=0.5, intensity_sigma=0.1, seed=11)
    d = draw_shot(noise, 5, [2, 2])
    rng = shot_rng(11, 5)
    expected = tuple(sample_thermal_occupation(0.5, rng, 2) for _ in range(2))
    assert d.thermal == expected
    assert d.intensity[0] == d.intensity[1] == sample_intensity_factor(0.1, rng)
    ind = draw_shot(NoiseModel(nbar=0.5, intensity_sigma=0.1, seed=11, intensity_correlation="independent"), 5, [2, 2])
    assert ind.intensity[0] != ind.intensity[1]


def test_noise_model_validation():
    assert NoiseModel.noiseless().is_noiseless
    assert not NoiseModel().is_noiseless
    np.testing.assert_allclose(NoiseModel(nbar=[0.1, 0.2]).nbar_array(2), [0.1, 0.2])
    for kwargs in ({"nbar": -1}, {"intensity_sigma": -0.1}, {"shots": 0}, {"intensity_correlation": "x"}):
        with pytest.raises(ValueError):
            NoiseModel(**kwargs)
    with pytest.raises(ValueError):
        NoiseModel(nbar=[0.1, 0.2]).nbar_array(3)


def test_noiseless_ensemble_equals_deterministic_run(params, space):
    seq = simulation_sequence(params, 40.0, 1.0)
    init = InitialStateSpec.dressed()
    ens = ensemble_run(seq, init, params, space, NoiseModel.noiseless(shots=3))
    det = run_sequence(seq, init, params, space)
    np.testing.assert_allclose(ens.observables["p_ntot_ge1"], det.observables["p_ntot_ge1"], atol=1e-14)
    assert np.max(ens.stderr["p_ntot_ge1"]) <= 1e-15


def test_ensemble_mean_and_stderr(params, space):
    seq = simulation_sequence(params, 20.0, 1.0)
    noise = NoiseModel(nbar=0.3, intensity_sigma=0.05, shots=16, seed=3)
    ens = ensemble_run(seq, InitialStateSpec.dressed(), params, space, noise)
    samples = ens.samples["p_e"]
    assert samples.shape == (16, 21, 2)
    np.testing.assert_allclose(ens.observables["p_e"], samples.mean(axis=0))
    np.testing.assert_allclose(ens.stderr["p_e"], samples.std(axis=0, ddof=1) / 4)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_ensemble_independent_of_worker_count(seed):
    params, space = JchParams.two_ion(delta2_khz=-24), CompositeSpace(2, 2)
    seq = simulation_sequence(params, 10.0, 1.0)
    noise = NoiseModel(nbar=0.3, shots=5, seed=seed)
    one = ensemble_run(seq, InitialStateSpec.dressed(), params, space, noise, workers=1)
    two = ensemble_run(seq, InitialStateSpec.dressed(), params, space, noise, workers=2)
    for name in one.observables:
        np.testing.assert_array_equal(one.observables[name], two.observables[name])


def test_truncation_warning(space, caplog):
    assert check_truncation(NoiseModel(), space) < 1e-4
    check_truncation(NoiseModel(nbar=1.0), space)
    assert "thermal tail" in caplog.text


def test_headroom_check(params, space):
    seq = simulation_sequence(params, 1.0, 1.0)
    with pytest.raises(ValueError):
        ensemble_run(seq, InitialStateSpec.dressed(1, 3), params, space, NoiseModel(shots=2))
