"""Piecewise-constant propagation of pulse sequences.

Every segment has a time-independent Hamiltonian, so the state is advanced
exactly through the spectral decomposition ``H = V diag(w) V^dag``:
``psi(t) = V exp(-2j pi w t 1e-3) V^dag psi(0)`` with ``t`` in us and ``w`` in kHz.
The output grid ``dt_out_us`` only controls where observables are recorded.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .hilbert import NORM_ATOL, CompositeSpace, OperatorMatrix, StateVector, is_hermitian
from .model import DEFAULT_CARRIER_RABI_KHZ, JchParams, build_drive_hamiltonian, hopping_hamiltonian
from .spectrum import jc_eigen

OBSERVABLES = ("p_e", "p_ntot_ge1", "p_ntot_ge2", "p_nph_ge1", "mean_ntot")

US_KHZ = 1e-3  # kHz * us
DEFAULT_DT_OUT_US = 1.0
DEFAULT_DURATION_US = 400.0


class NumericalError(RuntimeError):
    """A propagation result violated a numerical invariant."""


@dataclass(frozen=True)
class Drive:
    kind: str
    rabi_khz: float
    detuning_khz: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in ("carrier", "rsb"):
            raise ValueError(f"drive kind must be 'carrier' or 'rsb', got {self.kind!r}")
        if self.rabi_khz < 0:
            raise ValueError(f"rabi_khz must be non-negative, got {self.rabi_khz}")


@dataclass(frozen=True)
class PulseSegment:
    """One constant-Hamiltonian step: a drive (or None) per site, optional hopping."""

    duration_us: float
    drives: tuple[Drive | None, ...]
    include_hopping: bool = False
    label: str = ""

    def __post_init__(self):
        if not np.isfinite(self.duration_us) or self.duration_us < 0:
            raise ValueError(f"segment duration must be >= 0, got {self.duration_us}")
        object.__setattr__(self, "drives", tuple(self.drives))

    def hamiltonian(self, params: JchParams, space: CompositeSpace) -> OperatorMatrix:
        if len(self.drives) != space.n_sites:
            raise ValueError(f"segment has {len(self.drives)} drive slots for {space.n_sites} sites")
        h = np.zeros((space.dim, space.dim), dtype=complex)
        for site, drive in enumerate(self.drives, start=1):
            if drive is not None:
                h += build_drive_hamiltonian(site, drive.kind, drive.rabi_khz, drive.detuning_khz,
                                             space, drive.phase).entries
        if self.include_hopping:
            h += hopping_hamiltonian(params.k_khz, space).entries
        return OperatorMatrix(space, h, hermitian_hint=True)

    def scaled(self, factors: Sequence[float]) -> "PulseSegment":
        """Scale each site's drive amplitude (quasi-static intensity noise)."""
        drives = tuple(None if d is None else replace(d, rabi_khz=d.rabi_khz * f)
                       for d, f in zip(self.drives, factors))
        return replace(self, drives=drives)


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple[PulseSegment, ...]
    dt_out_us: float = DEFAULT_DT_OUT_US

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValueError("pulse sequence must contain at least one segment")
        if not self.dt_out_us > 0:
            raise ValueError(f"dt_out_us must be positive, got {self.dt_out_us}")

    @property
    def duration_us(self) -> float:
        return float(sum(s.duration_us for s in self.segments))

    def scaled(self, factors: Sequence[float]) -> "PulseSequence":
        return replace(self, segments=tuple(s.scaled(factors) for s in self.segments))


def simulation_segment(params: JchParams, duration_us: float = DEFAULT_DURATION_US) -> PulseSegment:
    """The quantum-simulation step: RSB drives on every site plus hopping.

    Its Hamiltonian equals ``build_jch_hamiltonian(params, space)``.
    """
    drives = tuple(Drive("rsb", 2 * g, d) for g, d in zip(params.g_khz, params.delta_khz))
    return PulseSegment(duration_us, drives, include_hopping=True, label="simulation")


def simulation_sequence(params: JchParams, duration_us: float = DEFAULT_DURATION_US,
                        dt_out_us: float = DEFAULT_DT_OUT_US) -> PulseSequence:
    return PulseSequence((simulation_segment(params, duration_us),), dt_out_us)


@dataclass(frozen=True)
class InitialStateSpec:
    """How the chain is initialised before the simulation clock starts.

    Ideal kinds build the state directly: ``ground``, ``bare`` (|n,s> per
    site), ``dressed`` (|p,+-> on ``site``) and ``superposition``
    ((|0,e> - i|1,g>)/sqrt2 on ``site``).  ``pulsed`` applies a carrier pi
    pulse followed by an RSB pi/2 pulse to ``site``.
    """

    kind: str = "superposition"
    site: int = 1
    p: int = 1
    branch: str = "minus"
    bare_states: tuple[tuple[int, int], ...] = ()
    carrier_rabi_khz: float = DEFAULT_CARRIER_RABI_KHZ
    rsb_rabi_khz: float | None = None
    prep_hopping: bool = True

    KINDS = ("ground", "bare", "dressed", "superposition", "pulsed")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown initial-state kind {self.kind!r}; expected one of {self.KINDS}")
        if self.branch not in ("minus", "plus"):
            raise ValueError(f"branch must be 'minus' or 'plus', got {self.branch!r}")
        object.__setattr__(self, "bare_states", tuple(tuple(s) for s in self.bare_states))

    @property
    def mode(self) -> str:
        return "pulsed" if self.kind == "pulsed" else "ideal"

    @classmethod
    def ground(cls) -> "InitialStateSpec":
        return cls("ground")

    @classmethod
    def bare(cls, states: Sequence[tuple[int, int]]) -> "InitialStateSpec":
        return cls("bare", bare_states=tuple(states))

    @classmethod
    def dressed(cls, site: int = 1, p: int = 1, branch: str = "minus") -> "InitialStateSpec":
        return cls("dressed", site=site, p=p, branch=branch)

    @classmethod
    def superposition(cls, site: int = 1) -> "InitialStateSpec":
        return cls("superposition", site=site)

    @classmethod
    def pulsed(cls, site: int = 1, **kwargs) -> "InitialStateSpec":
        return cls("pulsed", site=site, **kwargs)

    def phonon_demand(self, space: CompositeSpace) -> np.ndarray:
        """Phonons per site that preparation adds on top of the thermal occupation."""
        demand = np.zeros(space.n_sites, dtype=int)
        if self.kind == "bare":
            demand[:] = [n for n, _ in self._checked_bare(space)]
        elif self.kind == "dressed":
            demand[space.check_site(self.site)] = self.p
        elif self.kind in ("superposition", "pulsed"):
            demand[space.check_site(self.site)] = 1
        return demand

    def thermal_headroom(self, space: CompositeSpace) -> np.ndarray:
        return space.fock_cutoff - self.phonon_demand(space)

    def _checked_bare(self, space: CompositeSpace):
        if len(self.bare_states) != space.n_sites:
            raise ValueError(f"bare state lists {len(self.bare_states)} sites, space has {space.n_sites}")
        return self.bare_states


@dataclass(eq=False)
class TrajectoryRecord:
    """Observables on a time grid; arrays are shaped (n_times, n_sites).

    Ensemble records carry per-time standard errors and, optionally, the
    per-shot series stacked as (shots, n_times, n_sites).
    """

    times_us: np.ndarray
    observables: dict[str, np.ndarray]
    final_state: StateVector | None = None
    stderr: dict[str, np.ndarray] | None = None
    shots: int = 1
    samples: dict[str, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times_us = np.asarray(self.times_us, dtype=float)
        if self.times_us.ndim != 1 or np.any(np.diff(self.times_us) <= 0):
            raise ValueError("trajectory times must be a strictly increasing 1-D grid")

    @property
    def n_sites(self) -> int:
        return next(iter(self.observables.values())).shape[1]

    def series(self, name: str, site: int) -> np.ndarray:
        if name not in self.observables:
            raise KeyError(f"unknown observable {name!r}; have {sorted(self.observables)}")
        if not 1 <= site <= self.n_sites:
            raise IndexError(f"site {site} out of range 1..{self.n_sites}")
        return self.observables[name][:, site - 1]


@lru_cache(maxsize=16)
def observable_masks(space: CompositeSpace) -> np.ndarray:
    """Diagonals of every standard observable, shaped (n_obs, dim, n_sites)."""
    masks = np.zeros((len(OBSERVABLES), space.dim, space.n_sites))
    for pos in range(space.n_sites):
        site = pos + 1
        spin = space.spin_numbers(site)
        ph = space.phonon_numbers(site)
        tot = spin + ph
        masks[0, :, pos] = spin
        masks[1, :, pos] = tot >= 1
        masks[2, :, pos] = tot >= 2
        masks[3, :, pos] = ph >= 1
        masks[4, :, pos] = tot
    masks.setflags(write=False)
    return masks


def observe(space: CompositeSpace, amplitudes: np.ndarray) -> dict[str, np.ndarray]:
    """Standard observables for a stack of states shaped (n_times, dim)."""
    probs = np.abs(np.atleast_2d(amplitudes)) ** 2
    values = np.einsum("td,kds->kts", probs, observable_masks(space))
    return {name: values[k] for k, name in enumerate(OBSERVABLES)}


def output_grid(duration_us: float, dt_out_us: float) -> np.ndarray:
    """Samples at multiples of dt_out plus the segment end point."""
    if duration_us < 0:
        raise ValueError(f"duration must be >= 0, got {duration_us}")
    if not dt_out_us > 0:
        raise ValueError(f"dt_out must be positive, got {dt_out_us}")
    n = int(np.floor(duration_us / dt_out_us + 1e-9))
    times = dt_out_us * np.arange(n + 1)
    if duration_us - times[-1] > 1e-9 * dt_out_us:
        times = np.append(times, duration_us)
    return times


@dataclass(frozen=True, eq=False)
class Propagator:
    """Spectral decomposition of a hermitian Hamiltonian (kHz)."""

    energies: np.ndarray
    vectors: np.ndarray

    @classmethod
    def from_operator(cls, h: OperatorMatrix) -> "Propagator":
        mat = h.entries
        if not is_hermitian(mat):
            raise ValueError("propagation requires a hermitian Hamiltonian")
        w, v = np.linalg.eigh(mat)
        return cls(w, v)

    def evolve(self, amplitudes: np.ndarray, times_us) -> np.ndarray:
        """States at each time, shaped (n_times, dim); negative times run backwards."""
        t = np.atleast_1d(np.asarray(times_us, dtype=float))
        coeffs = self.vectors.conj().T @ amplitudes
        phases = np.exp(-2j * np.pi * US_KHZ * np.outer(t, self.energies))
        return (phases * coeffs) @ self.vectors.T


def evolve(psi: StateVector, h: OperatorMatrix, time_us: float) -> StateVector:
    """Apply exp(-2j pi H t) with H in kHz and t in us; any real t, including negative."""
    out = Propagator.from_operator(h).evolve(psi.amplitudes, [time_us])[0]
    return StateVector(psi.space, out)


def _check_norms(states: np.ndarray, start_norm: float) -> None:
    drift = np.max(np.abs(np.linalg.norm(states, axis=1) - start_norm))
    if drift > NORM_ATOL:
        raise NumericalError(f"norm drift {drift:.2e} exceeds {NORM_ATOL:.0e}")


def propagate_segment(psi: StateVector, h: OperatorMatrix, duration_us: float,
                      dt_out_us: float = DEFAULT_DT_OUT_US, t0_us: float = 0.0) -> TrajectoryRecord:
    if h.space != psi.space:
        raise ValueError("Hamiltonian and state live in different spaces")
    local = output_grid(duration_us, dt_out_us)
    states = Propagator.from_operator(h).evolve(psi.amplitudes, local)
    _check_norms(states, psi.norm)
    return TrajectoryRecord(t0_us + local, observe(psi.space, states),
                            final_state=StateVector(psi.space, states[-1]))


def sequence_times(seq: PulseSequence) -> np.ndarray:
    """Concatenated output grid of a sequence; segment boundaries appear once."""
    times, t0 = [], 0.0
    for k, segment in enumerate(seq.segments):
        local = output_grid(segment.duration_us, seq.dt_out_us)
        if k > 0:
            local = local[1:]
        times.append(t0 + local)
        t0 += segment.duration_us
    return np.concatenate(times)


def _apply_segment(amplitudes: np.ndarray, segment: PulseSegment, params: JchParams,
                   space: CompositeSpace) -> np.ndarray:
    if segment.duration_us == 0:
        return amplitudes
    prop = Propagator.from_operator(segment.hamiltonian(params, space))
    return prop.evolve(amplitudes, [segment.duration_us])[0]


def preparation_segments(spec: InitialStateSpec, params: JchParams,
                         space: CompositeSpace) -> tuple[PulseSegment, PulseSegment]:
    """Carrier pi then resonant RSB pi/2 on the target site."""
    pos = space.check_site(spec.site)
    rsb_rabi = 2 * params.g_khz[pos] if spec.rsb_rabi_khz is None else spec.rsb_rabi_khz
    if spec.carrier_rabi_khz <= 0 or rsb_rabi <= 0:
        raise ValueError("pulsed preparation needs positive carrier and RSB Rabi frequencies")

    def on_target(drive):
        slots = [None] * space.n_sites
        slots[pos] = drive
        return tuple(slots)

    t_pi = 1 / (2 * spec.carrier_rabi_khz * US_KHZ)
    t_half = 1 / (4 * rsb_rabi * US_KHZ)
    carrier = PulseSegment(t_pi, on_target(Drive("carrier", spec.carrier_rabi_khz)),
                           include_hopping=spec.prep_hopping, label="carrier_pi")
    rsb = PulseSegment(t_half, on_target(Drive("rsb", rsb_rabi)),
                       include_hopping=spec.prep_hopping, label="rsb_pi_half")
    return carrier, rsb


def prepare_initial(spec: InitialStateSpec, space: CompositeSpace, params: JchParams,
                    thermal: Sequence[int] | None = None, drive_scale: Sequence[float] | None = None
                    ) -> StateVector:
    """Build the initial state, optionally on top of per-site thermal phonons.

    ``thermal[i]`` extra phonons on site ``i+1`` shift that site's prepared
    ket up the Fock ladder (a dressed state moves to the p + n manifold).
    ``drive_scale`` rescales the preparation pulses of a pulsed spec.
    """
    n_th = np.zeros(space.n_sites, dtype=int) if thermal is None else np.asarray(thermal, dtype=int)
    if n_th.shape != (space.n_sites,) or np.any(n_th < 0):
        raise ValueError(f"thermal occupation must be {space.n_sites} non-negative integers")
    if params.n_sites != space.n_sites:
        raise ValueError(f"params describe {params.n_sites} sites, space has {space.n_sites}")
    if np.any(spec.phonon_demand(space) + n_th > space.fock_cutoff):
        raise ValueError(f"initial state {spec.kind!r} needs more phonons than cutoff {space.fock_cutoff}")

    ground = [(int(n), 0) for n in n_th]

    if spec.kind == "ground":
        psi = StateVector.basis(space, ground).amplitudes
    elif spec.kind == "bare":
        states = [(n + int(m), int(s)) for (n, s), m in zip(spec._checked_bare(space), n_th)]
        psi = StateVector.basis(space, states).amplitudes
    elif spec.kind == "superposition":
        pos = space.check_site(spec.site)
        n = int(n_th[pos])
        psi = (_with_site(space, ground, pos, (n, 1)) - 1j * _with_site(space, ground, pos, (n + 1, 0))) / np.sqrt(2)
    elif spec.kind == "dressed":
        pos = space.check_site(spec.site)
        p = spec.p + int(n_th[pos])
        minus, plus = jc_eigen(params.delta_khz[pos], params.g_khz[pos], p)
        c_g, c_e = (minus if spec.branch == "minus" else plus).vector
        psi = c_g * _with_site(space, ground, pos, (p, 0)) + c_e * _with_site(space, ground, pos, (p - 1, 1))
    else:
        psi = StateVector.basis(space, ground).amplitudes
        for seg in preparation_segments(spec, params, space):
            if drive_scale is not None:
                seg = seg.scaled(drive_scale)
            psi = _apply_segment(psi, seg, params, space)
    return StateVector(space, psi)


def _with_site(space: CompositeSpace, states, pos: int, ket: tuple[int, int]) -> np.ndarray:
    states = list(states)
    states[pos] = ket
    return StateVector.basis(space, states).amplitudes


def run_sequence(seq: PulseSequence, init: InitialStateSpec | StateVector, params: JchParams,
                 space: CompositeSpace, thermal: Sequence[int] | None = None,
                 drive_scale: Sequence[float] | None = None) -> TrajectoryRecord:
    """Propagate through every segment on one continuous time axis starting at 0."""
    if isinstance(init, StateVector):
        psi = init
    else:
        psi = prepare_initial(init, space, params, thermal, drive_scale)
    if drive_scale is not None:
        seq = seq.scaled(drive_scale)
    start_norm = psi.norm
    amps = psi.amplitudes
    times, chunks = [], []
    t0 = 0.0
    for k, segment in enumerate(seq.segments):
        local = output_grid(segment.duration_us, seq.dt_out_us)
        if k > 0:
            local = local[1:]
        if segment.duration_us > 0:
            prop = Propagator.from_operator(segment.hamiltonian(params, space))
            states = prop.evolve(amps, local)
            amps = prop.evolve(amps, [segment.duration_us])[0]
        else:
            states = np.repeat(amps[None, :], len(local), axis=0)
        if len(local):
            times.append(t0 + local)
            chunks.append(states)
        t0 += segment.duration_us
    states = np.concatenate(chunks)
    _check_norms(states, start_norm)
    return TrajectoryRecord(np.concatenate(times), observe(space, states),
                            final_state=StateVector(space, amps))
