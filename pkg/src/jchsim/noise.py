"""Monte Carlo ensembles over thermal phonons and laser-intensity noise.

Each shot draws, per site, an initial Fock occupation from a truncated
Bose-Einstein distribution and a quasi-static intensity factor that scales
the JC coupling (equivalently every drive amplitude on that site).  Shot
``i`` uses its own generator seeded from ``SeedSequence(seed, spawn_key=(i,))``
so results do not depend on scheduling or worker count.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import (OBSERVABLES, InitialStateSpec, PulseSequence, TrajectoryRecord,
                       run_sequence, sequence_times)
from .hilbert import CompositeSpace
from .model import JchParams

log = logging.getLogger(__name__)

DEFAULT_NBAR = 0.03
DEFAULT_INTENSITY_SIGMA = 0.02
DEFAULT_SHOTS = 1000
DEFAULT_SEED = 20240917
TAIL_MASS_LIMIT = 1e-4


@dataclass(frozen=True)
class NoiseModel:
    nbar: float | tuple[float, ...] = DEFAULT_NBAR
    intensity_sigma: float = DEFAULT_INTENSITY_SIGMA
    shots: int = DEFAULT_SHOTS
    seed: int = DEFAULT_SEED
    intensity_correlation: str = "common"

    def __post_init__(self):
        nbar = np.atleast_1d(np.asarray(self.nbar, dtype=float))
        if np.any(~np.isfinite(nbar)) or np.any(nbar < 0):
            raise ValueError(f"nbar must be >= 0, got {self.nbar!r}")
        if not self.intensity_sigma >= 0:
            raise ValueError(f"intensity_sigma must be >= 0, got {self.intensity_sigma!r}")
        if int(self.shots) != self.shots or self.shots < 1:
            raise ValueError(f"shots must be a positive integer, got {self.shots!r}")
        if self.intensity_correlation not in ("common", "independent"):
            raise ValueError("intensity_correlation must be 'common' or 'independent'")
        if isinstance(self.nbar, (list, np.ndarray)):
            object.__setattr__(self, "nbar", tuple(float(x) for x in self.nbar))

    @classmethod
    def noiseless(cls, shots: int = 1, seed: int = DEFAULT_SEED) -> "NoiseModel":
        return cls(nbar=0.0, intensity_sigma=0.0, shots=shots, seed=seed)

    @property
    def is_noiseless(self) -> bool:
        return not np.any(self.nbar_array(1)) and self.intensity_sigma == 0

    def nbar_array(self, n_sites: int) -> np.ndarray:
        nbar = np.atleast_1d(np.asarray(self.nbar, dtype=float))
        if nbar.size == 1:
            return np.full(n_sites, float(nbar[0]))
        if nbar.size != n_sites:
            raise ValueError(f"nbar lists {nbar.size} sites, chain has {n_sites}")
        return nbar


def thermal_weights(nbar: float, cutoff: int) -> np.ndarray:
    """Bose-Einstein p(n) = nbar^n / (1+nbar)^(n+1), truncated at ``cutoff`` and renormalised."""
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    n = np.arange(cutoff + 1)
    if nbar == 0:
        w = (n == 0).astype(float)
    else:
        w = nbar ** n / (1 + nbar) ** (n + 1)
    return w / w.sum()


def thermal_tail_mass(nbar: float, cutoff: int) -> float:
    """Untruncated probability of more than ``cutoff`` phonons."""
    return float((nbar / (1 + nbar)) ** (cutoff + 1))


def sample_thermal_occupation(nbar: float, rng: np.random.Generator, cutoff: int = 2) -> int:
    # one uniform per draw keeps the stream aligned across cutoffs
    u = rng.random()
    cdf = np.cumsum(thermal_weights(nbar, cutoff))
    return int(min(np.searchsorted(cdf, u, side="right"), cutoff))


def sample_intensity_factor(sigma: float, rng: np.random.Generator) -> float:
    """Normal(1, sigma) truncated to positive values."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return 1.0
    while True:
        s = 1.0 + sigma * rng.standard_normal()
        if s > 0:
            return float(s)


def shot_rng(seed: int, shot: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(shot),)))


@dataclass(frozen=True)
class ShotDraw:
    thermal: tuple[int, ...]
    intensity: tuple[float, ...]


def draw_shot(noise: NoiseModel, shot: int, headroom: Sequence[int]) -> ShotDraw:
    """Random inputs of one shot; draw order is thermal per site, then intensity."""
    rng = shot_rng(noise.seed, shot)
    n_sites = len(headroom)
    nbar = noise.nbar_array(n_sites)
    thermal = tuple(sample_thermal_occupation(nb, rng, int(h)) for nb, h in zip(nbar, headroom))
    if noise.intensity_correlation == "common":
        intensity = (sample_intensity_factor(noise.intensity_sigma, rng),) * n_sites
    else:
        intensity = tuple(sample_intensity_factor(noise.intensity_sigma, rng) for _ in range(n_sites))
    return ShotDraw(thermal, intensity)


def run_shot(seq: PulseSequence, init: InitialStateSpec, params: JchParams,
             space: CompositeSpace, draw: ShotDraw) -> TrajectoryRecord:
    # pulse lengths stay calibrated on nominal params; the drawn factor scales amplitudes only
    return run_sequence(seq, init, params, space, thermal=draw.thermal, drive_scale=draw.intensity)


def _run_chunk(args) -> list[np.ndarray]:
    seq, init, params, space, noise, headroom, shots = args
    out = []
    for shot in shots:
        rec = run_shot(seq, init, params, space, draw_shot(noise, shot, headroom))
        out.append(np.stack([rec.observables[name] for name in OBSERVABLES]))
    return out


def check_truncation(noise: NoiseModel, space: CompositeSpace) -> float:
    tail = max(thermal_tail_mass(nb, space.fock_cutoff) for nb in noise.nbar_array(space.n_sites))
    if tail >= TAIL_MASS_LIMIT:
        log.warning("thermal tail beyond cutoff %d is %.2e (limit %.0e); raise fock_cutoff",
                    space.fock_cutoff, tail, TAIL_MASS_LIMIT)
    return tail


def ensemble_run(seq: PulseSequence, init: InitialStateSpec, params: JchParams, space: CompositeSpace,
                 noise: NoiseModel, workers: int = 1, keep_samples: bool = True) -> TrajectoryRecord:
    """Shot-averaged observables with per-time standard errors."""
    check_truncation(noise, space)
    headroom = init.thermal_headroom(space)
    if np.any(headroom < 0):
        raise ValueError(f"initial state {init.kind!r} does not fit in cutoff {space.fock_cutoff}")
    shots = list(range(noise.shots))
    workers = max(1, min(int(workers), len(shots)))
    if workers == 1:
        stacked = _run_chunk((seq, init, params, space, noise, headroom, shots))
    else:
        chunks = [shots[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(seq, init, params, space, noise, headroom, c)
                                               for c in chunks]))
        stacked = [None] * len(shots)
        for chunk, part in zip(chunks, parts):
            for shot, values in zip(chunk, part):
                stacked[shot] = values
    # (shots, n_obs, n_times, n_sites), always in shot order
    data = np.stack(stacked)
    mean = data.mean(axis=0)
    if noise.shots > 1:
        err = data.std(axis=0, ddof=1) / np.sqrt(noise.shots)
    else:
        err = np.zeros_like(mean)
    times = sequence_times(seq)
    return TrajectoryRecord(
        times,
        {name: mean[k] for k, name in enumerate(OBSERVABLES)},
        stderr={name: err[k] for k, name in enumerate(OBSERVABLES)},
        shots=noise.shots,
        samples={name: data[:, k] for k, name in enumerate(OBSERVABLES)} if keep_samples else None,
    )

