"""Leakage of the hopping quasiparticle into a detuned site.

The leakage metric is the time average, over an observation window, of the
probability of finding one or more polaritons (or phonons) at the blocked
site.  Sweeps pair it with the single-site dressed-energy gaps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .dynamics import InitialStateSpec, TrajectoryRecord, run_sequence, simulation_sequence
from .hilbert import CompositeSpace
from .model import JchParams
from .noise import NoiseModel, ensemble_run
from .spectrum import gap_table

# chosen by calibrate_window over WINDOW_CANDIDATES_US; see docs/calibration.md
DEFAULT_WINDOW_US = (0.0, 400.0)
WINDOW_CANDIDATES_US = (300.0, 350.0, 400.0, 450.0, 500.0)

POLARITON_DELTA2_KHZ = -24.0

NEGATIVE_DELTAS_KHZ = (-500, -100, -50, -30, -28, -26, -24, -22, -20, -15, -10)
POSITIVE_DELTAS_KHZ = (10, 15, 20, 22, 24, 26, 28, 30, 50, 100, 500)

_SERIES = {"polariton": "p_ntot_ge1", "phonon": "p_nph_ge1"}


@dataclass
class LeakageResult:
    mean_leakage: float
    window: tuple[float, float]
    times_us: np.ndarray = field(repr=False)
    series: np.ndarray = field(repr=False)
    stderr: float | None = None
    series_stderr: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class SweepRow:
    delta2_khz: float
    e_minus2_khz: float
    e_plus2_khz: float
    gap1_khz: float
    gap2_khz: float
    mean_leakage: float
    stderr: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.delta2_khz, self.e_minus2_khz, self.e_plus2_khz, self.gap1_khz,
                self.gap2_khz, self.mean_leakage, self.stderr)


def _window_mask(times: np.ndarray, window: Sequence[float]) -> np.ndarray:
    t0, t1 = float(window[0]), float(window[1])
    eps = 1e-9 * max(1.0, abs(t1))
    if t1 < t0:
        raise ValueError(f"window end {t1} precedes start {t0}")
    if t0 < times[0] - eps or t1 > times[-1] + eps:
        raise ValueError(f"window {tuple(window)} not within trajectory [{times[0]}, {times[-1]}]")
    mask = (times >= t0 - eps) & (times <= t1 + eps)
    if not mask.any():
        raise ValueError(f"window {tuple(window)} contains no samples")
    return mask


def time_averaged_leakage(traj: TrajectoryRecord, site: int = 2, kind: str = "polariton",
                          window: Sequence[float] = DEFAULT_WINDOW_US) -> LeakageResult:
    """Mean of P(N >= 1) at ``site`` over sampled points in ``window``."""
    if kind not in _SERIES:
        raise ValueError(f"kind must be 'polariton' or 'phonon', got {kind!r}")
    name = _SERIES[kind]
    mask = _window_mask(traj.times_us, window)
    series = traj.series(name, site)[mask]
    stderr = None
    series_err = None
    if traj.samples is not None and traj.shots > 1:
        per_shot = traj.samples[name][:, mask, site - 1].mean(axis=1)
        stderr = float(per_shot.std(ddof=1) / np.sqrt(traj.shots))
    if traj.stderr is not None:
        series_err = traj.stderr[name][mask, site - 1]
    return LeakageResult(float(series.mean()), (float(window[0]), float(window[1])),
                         traj.times_us[mask], series, stderr, series_err)


def simulate(params: JchParams, init: InitialStateSpec, noise: NoiseModel | None,
             duration_us: float, space: CompositeSpace | None = None, workers: int = 1,
             dt_out_us: float = 1.0) -> TrajectoryRecord:
    """Simulation step alone, deterministic or ensemble-averaged."""
    space = space or CompositeSpace(params.n_sites)
    seq = simulation_sequence(params, duration_us, dt_out_us)
    if noise is None or noise.is_noiseless:
        return run_sequence(seq, init, params, space)
    return ensemble_run(seq, init, params, space, noise, workers=workers)


def leakage(params: JchParams, init: InitialStateSpec, noise: NoiseModel | None = None,
            window: Sequence[float] = DEFAULT_WINDOW_US, site: int = 2, kind: str = "polariton",
            space: CompositeSpace | None = None, workers: int = 1) -> LeakageResult:
    traj = simulate(params, init, noise, window[1], space, workers)
    return time_averaged_leakage(traj, site, kind, window)


def _reference_branch(init: InitialStateSpec, delta2: float) -> str:
    if init.kind == "dressed":
        return init.branch
    return "minus" if delta2 <= 0 else "plus"


def detuning_sweep(delta2_list: Iterable[float], init: InitialStateSpec, params: JchParams,
                   noise: NoiseModel | None = None, window: Sequence[float] = DEFAULT_WINDOW_US,
                   space: CompositeSpace | None = None, workers: int = 1,
                   reference_branch: str | None = None, site: int = 2) -> list[SweepRow]:
    """One row per Ion-2 detuning: dressed energies, gaps to Ion 1, leakage.

    Every row reuses the same noise seed, so shot ``i`` sees identical random
    draws at every detuning.
    """
    deltas = [float(d) for d in delta2_list]
    if not deltas:
        raise ValueError("delta2_list must be non-empty")
    pos = site - 1
    rows = []
    for d in deltas:
        branch = reference_branch or _reference_branch(init, d)
        gaps = gap_table([d], params.g_khz[pos], branch, delta1_khz=params.delta_khz[0],
                         g1_khz=params.g_khz[0])[0]
        result = leakage(params.with_detuning(site, d), init, noise, window, site,
                         "polariton", space, workers)
        rows.append(SweepRow(d, gaps.e_minus2_khz, gaps.e_plus2_khz, gaps.gap1_khz, gaps.gap2_khz,
                             result.mean_leakage, 0.0 if result.stderr is None else result.stderr))
    return rows


def noiseless_objective(params: JchParams, init: InitialStateSpec,
                        window: Sequence[float] = DEFAULT_WINDOW_US, site: int = 2,
                        space: CompositeSpace | None = None):
    def objective(delta2: float) -> float:
        value = leakage(params.with_detuning(site, float(delta2)), init, None, window, site,
                        "polariton", space).mean_leakage
        if not np.isfinite(value):
            raise ArithmeticError(f"non-finite leakage at delta2 = {delta2}")
        return value
    return objective


def find_min_detuning(delta_range: Sequence[float], init: InitialStateSpec, params: JchParams,
                      window: Sequence[float] = DEFAULT_WINDOW_US, grid_step: float = 1.0,
                      site: int = 2, space: CompositeSpace | None = None) -> tuple[float, float]:
    """Grid scan then golden-section refinement of the noiseless leakage."""
    lo, hi = sorted(float(x) for x in delta_range)
    if not hi > lo:
        raise ValueError(f"degenerate detuning range {tuple(delta_range)}")
    if not grid_step > 0:
        raise ValueError(f"grid_step must be positive, got {grid_step}")
    f = noiseless_objective(params, init, window, site, space)
    grid = np.arange(lo, hi + 1e-9 * grid_step, grid_step)
    if grid[-1] < hi:
        grid = np.append(grid, hi)
    values = np.array([f(x) for x in grid])
    k = int(np.argmin(values))
    if k == 0 or k == len(grid) - 1:
        return float(grid[k]), float(values[k])
    res = minimize_scalar(f, bracket=(grid[k - 1], grid[k], grid[k + 1]), method="golden",
                          options={"xtol": 1e-4})
    if res.fun <= values[k]:
        return float(res.x), float(res.fun)
    return float(grid[k]), float(values[k])


@dataclass
class BlockadeReport:
    polariton_noiseless: float
    phonon_noiseless: float
    polariton_noisy: float
    phonon_noisy: float
    polariton_noisy_stderr: float
    phonon_noisy_stderr: float
    phonon_noiseless_nph: float
    phonon_noisy_nph: float
    phonon_noisy_nph_stderr: float = 0.0

    @property
    def ratio(self) -> float:
        return self.phonon_noiseless / self.polariton_noiseless

    def rows(self) -> list[tuple[str, float, float]]:
        return [
            ("polariton_noiseless", self.polariton_noiseless, 0.0),
            ("phonon_noiseless", self.phonon_noiseless, 0.0),
            ("ratio_noiseless", self.ratio, 0.0),
            ("polariton_noisy", self.polariton_noisy, self.polariton_noisy_stderr),
            ("phonon_noisy", self.phonon_noisy, self.phonon_noisy_stderr),
            ("phonon_noiseless_phonon_number", self.phonon_noiseless_nph, 0.0),
            ("phonon_noisy_phonon_number", self.phonon_noisy_nph, self.phonon_noisy_nph_stderr),
        ]


def polariton_configuration(params: JchParams) -> tuple[JchParams, InitialStateSpec]:
    return params.with_detuning(2, POLARITON_DELTA2_KHZ), InitialStateSpec.dressed(1, 1, "minus")


def phonon_configuration(params: JchParams) -> tuple[JchParams, InitialStateSpec]:
    """Phonon blockade: only the blocked ion is illuminated (resonantly); |1,g> starts at Ion 1."""
    cfg = params.with_detuning(2, 0.0).with_coupling(1, 0.0)
    return cfg, InitialStateSpec.bare([(1, 0)] + [(0, 0)] * (params.n_sites - 1))


def blockade_comparison(params: JchParams, noise: NoiseModel,
                        window: Sequence[float] = DEFAULT_WINDOW_US,
                        space: CompositeSpace | None = None, workers: int = 1) -> BlockadeReport:
    """Polariton vs phonon blockade leakage at Ion 2, with and without noise.

    Both configurations are scored with P(N_tot,2 >= 1); the phonon-number
    variant P(N_ph,2 >= 1) of the phonon configuration is reported alongside.
    """
    pol_params, pol_init = polariton_configuration(params)
    ph_params, ph_init = phonon_configuration(params)

    def both(cfg, init, noisy):
        traj = simulate(cfg, init, noise if noisy else None, window[1], space, workers)
        return (time_averaged_leakage(traj, 2, "polariton", window),
                time_averaged_leakage(traj, 2, "phonon", window))

    pol_clean, _ = both(pol_params, pol_init, False)
    ph_clean, ph_clean_nph = both(ph_params, ph_init, False)
    pol_noisy, _ = both(pol_params, pol_init, True)
    ph_noisy, ph_noisy_nph = both(ph_params, ph_init, True)
    return BlockadeReport(
        pol_clean.mean_leakage, ph_clean.mean_leakage,
        pol_noisy.mean_leakage, ph_noisy.mean_leakage,
        pol_noisy.stderr or 0.0, ph_noisy.stderr or 0.0,
        ph_clean_nph.mean_leakage, ph_noisy_nph.mean_leakage, ph_noisy_nph.stderr or 0.0,
    )


CALIBRATION_TARGETS = {
    # name: (target, tolerance)
    "dressed_minus24_noisy": (0.0549, 0.005),
    "polariton_noiseless": (0.0297, 0.003),
    "phonon_noiseless": (0.1144, 0.005),
}


def calibrate_window(params: JchParams, noise: NoiseModel, candidates: Sequence[float] = WINDOW_CANDIDATES_US,
                     space: CompositeSpace | None = None, workers: int = 1) -> tuple[float, dict[float, dict]]:
    """Pick the window end that best matches the calibration targets.

    Each configuration is simulated once up to the longest candidate and
    re-averaged per window; the score is the sum of squared deviations in
    units of each target's tolerance.
    """
    t_max = max(candidates)
    pol_params, pol_init = polariton_configuration(params)
    ph_params, ph_init = phonon_configuration(params)
    trajs = {
        "dressed_minus24_noisy": simulate(pol_params, pol_init, noise, t_max, space, workers),
        "polariton_noiseless": simulate(pol_params, pol_init, None, t_max, space),
        "phonon_noiseless": simulate(ph_params, ph_init, None, t_max, space),
    }
    scores = {}
    for t_end in candidates:
        values = {k: time_averaged_leakage(tr, 2, "polariton", (0.0, t_end)).mean_leakage
                  for k, tr in trajs.items()}
        score = sum(((values[k] - target) / tol) ** 2 for k, (target, tol) in CALIBRATION_TARGETS.items())
        scores[float(t_end)] = {"score": score, **values}
    best = min(scores, key=lambda t: scores[t]["score"])
    return best, scores
