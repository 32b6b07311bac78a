import numpy as np
import pytest

from jchsim.analysis import (CALIBRATION_TARGETS, DEFAULT_WINDOW_US, WINDOW_CANDIDATES_US, LeakageResult,
                             calibrate_window, detuning_sweep, find_min_detuning, leakage, noiseless_objective,
                             phonon_configuration, polariton_configuration, simulate, time_averaged_leakage)
from jchsim.dynamics import InitialStateSpec, TrajectoryRecord, prepare_initial, run_sequence, simulation_sequence
from jchsim.hilbert import StateVector
from jchsim.noise import NoiseModel

# frozen noiseless values on the default window (regenerate only on a deliberate model change)
NOISELESS_MINUS24 = 0.0296997216
NOISELESS_PHONON_NTOT = 0.1149582185
NOISELESS_PHONON_NPH = 0.0298549193


def _record(values):
    t = np.arange(len(values), dtype=float)
    obs = {"p_ntot_ge1": np.column_stack([np.zeros_like(t), values]),
           "p_nph_ge1": np.column_stack([np.zeros_like(t), values / 2])}
    return TrajectoryRecord(t, obs)


def test_time_average_is_arithmetic_mean_over_window():
    rec = _record(np.array([0.0, 1.0, 2.0, 3.0, 4.0]))
    assert time_averaged_leakage(rec, 2, "polariton", (0, 4)).mean_leakage == 2.0
    assert time_averaged_leakage(rec, 2, "polariton", (1, 2)).mean_leakage == 1.5
    assert time_averaged_leakage(rec, 2, "phonon", (0, 4)).mean_leakage == 1.0
    with pytest.raises(ValueError):
        time_averaged_leakage(rec, 2, "polariton", (0, 5))
    with pytest.raises(ValueError):
        time_averaged_leakage(rec, 2, "polariton", (3, 2))
    with pytest.raises(ValueError):
        time_averaged_leakage(rec, 2, "polariton", (1.2, 1.8))
    with pytest.raises(ValueError):
        time_averaged_leakage(rec, 2, "quasiparticle", (0, 4))


def test_default_window():
    assert DEFAULT_WINDOW_US == (0.0, 400.0)
    assert 400.0 in WINDOW_CANDIDATES_US


def test_frozen_noiseless_goldens(params, space):
    pol_params, pol_init = polariton_configuration(params)
    ph_params, ph_init = phonon_configuration(params)
    assert leakage(pol_params, pol_init, space=space).mean_leakage == pytest.approx(NOISELESS_MINUS24, abs=1e-9)
    assert leakage(ph_params, ph_init, space=space).mean_leakage == pytest.approx(NOISELESS_PHONON_NTOT, abs=1e-9)
    assert leakage(ph_params, ph_init, kind="phonon", space=space).mean_leakage == pytest.approx(
        NOISELESS_PHONON_NPH, abs=1e-9)


def test_leakage_bounded(params, space):
    for d in (-500, -24, 0, 24):
        res = leakage(params.with_detuning(2, d), InitialStateSpec.superposition(), space=space)
        assert 0.0 <= res.mean_leakage <= 1.0
        assert np.all((res.series >= -1e-12) & (res.series <= 1 + 1e-12))


def test_leakage_invariant_under_dressed_phase_convention(params, space):
    p = params.with_detuning(2, -24)
    psi = prepare_initial(InitialStateSpec.dressed(), space, p)
    seq = simulation_sequence(p, 400.0)
    ref = time_averaged_leakage(run_sequence(seq, psi, p, space)).mean_leakage
    for phase in (-1.0, 1j, np.exp(0.3j)):
        flipped = StateVector(space, phase * psi.amplitudes)
        assert time_averaged_leakage(run_sequence(seq, flipped, p, space)).mean_leakage == pytest.approx(ref, abs=1e-14)


def test_sweep_rows_carry_gaps(params, space):
    rows = detuning_sweep([-24, 24], InitialStateSpec.superposition(), params, None, (0, 50), space)
    assert rows[0].gap2_khz == pytest.approx(rows[0].e_plus2_khz + 11.8)
    assert rows[1].gap1_khz == pytest.approx(11.8 - rows[1].e_minus2_khz)
    assert rows[0].stderr == 0.0
    assert len(rows[0].as_tuple()) == 7
    with pytest.raises(ValueError):
        detuning_sweep([], InitialStateSpec.dressed(), params)


def test_sweep_continuity(params, space):
    f = noiseless_objective(params, InitialStateSpec.dressed(1, 1, "minus"), space=space)
    for d in (-30.0, -24.0, -15.0, -10.0):
        assert abs(f(d + 0.1) - f(d)) <= 0.01


def test_large_detuning_plateau(params, space):
    f = noiseless_objective(params, InitialStateSpec.dressed(1, 1, "minus"), space=space)
    values = [f(d) for d in (-100, -200, -500, -1000)]
    # monotone approach to the off-resonant plateau
    assert all(b >= a - 1e-3 for a, b in zip(values, values[1:]))
    assert abs(values[-1] - values[-2]) < 0.01


def test_find_min_edge_and_errors(params, space):
    d, v = find_min_detuning((-12, -10), InitialStateSpec.dressed(), params, (0, 100), 1.0, space=space)
    assert -12 <= d <= -10
    with pytest.raises(ValueError):
        find_min_detuning((-10, -10), InitialStateSpec.dressed(), params)
    with pytest.raises(ValueError):
        find_min_detuning((-20, -10), InitialStateSpec.dressed(), params, grid_step=0)


def test_ensemble_leakage_stderr(params, space):
    noise = NoiseModel(shots=20, seed=5)
    traj = simulate(params.with_detuning(2, -24), InitialStateSpec.dressed(), noise, 50.0, space)
    res = time_averaged_leakage(traj, 2, "polariton", (0, 50))
    per_shot = traj.samples["p_ntot_ge1"][:, :, 1].mean(axis=1)
    assert res.stderr == pytest.approx(per_shot.std(ddof=1) / np.sqrt(20))
    assert isinstance(res, LeakageResult)


@pytest.mark.slow
def test_calibration_selects_default_window(params, space):
    best, scores = calibrate_window(params, NoiseModel(), space=space)
    assert (0.0, best) == DEFAULT_WINDOW_US
    for name, (target, tol) in CALIBRATION_TARGETS.items():
        assert abs(scores[best][name] - target) <= tol
