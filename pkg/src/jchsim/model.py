"""JCH and drive Hamiltonians, hopping rates from chain geometry.

Units: every frequency is an ordinary frequency in kHz (angular / 2pi) and
every time is in microseconds, so a Hamiltonian ``H`` evolves as
``exp(-2j*pi*H*t*1e-3)``.  Hamiltonians are written in the frame rotating at the
common vibrational frequency, which drops ``omega*(a^dag a + sigma^+ sigma^-)``
from every site; this is harmless because the JCH Hamiltonian conserves the
total excitation number.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import constants

from .hilbert import CompositeSpace, OperatorMatrix, site_operators

DEFAULT_G_KHZ = 11.8
DEFAULT_K12_KHZ = 5.9
DEFAULT_NU_KHZ = 2740.0
DEFAULT_DISTANCE_UM = 18.0
DEFAULT_MASS_AMU = 40.0
DEFAULT_CARRIER_RABI_KHZ = 600.0
DEFAULT_RSB_RABI_KHZ = 2 * DEFAULT_G_KHZ

FRAME_CONVENTION = {
    "tag": "omega_rotating",
    "description": ("All sites rotate at the bare vibrational frequency; site-dependent "
                    "frequency corrections and the laser/atomic frequencies are absorbed "
                    "into the per-site detuning."),
}


def hopping_rate(d_um: float, nu_khz: float, mass_amu: float) -> float:
    """Coulomb phonon hopping rate k/2pi in kHz.

    Evaluates ``e^2 / (4 pi eps0 m d^3 omega)`` with ``omega = 2 pi nu`` and
    returns the result divided by 2pi.
    """
    for name, value in (("d_um", d_um), ("nu_khz", nu_khz), ("mass_amu", mass_amu)):
        if not np.isfinite(value) or value <= 0:
            raise ValueError(f"{name} must be positive and finite, got {value!r}")
    coulomb = constants.e ** 2 / (4 * np.pi * constants.epsilon_0)
    mass = mass_amu * constants.atomic_mass
    d = d_um * 1e-6
    omega = 2 * np.pi * nu_khz * 1e3
    k_angular = coulomb / (mass * d ** 3 * omega)
    return k_angular / (2 * np.pi) / 1e3


@dataclass(frozen=True)
class ChainGeometry:
    mass_amu: float = DEFAULT_MASS_AMU
    nu_khz: float = DEFAULT_NU_KHZ
    positions_um: tuple[float, ...] = (0.0, DEFAULT_DISTANCE_UM)

    def __post_init__(self):
        if self.mass_amu <= 0 or self.nu_khz <= 0:
            raise ValueError("mass_amu and nu_khz must be positive")
        pos = tuple(float(x) for x in self.positions_um)
        object.__setattr__(self, "positions_um", pos)
        if len(set(pos)) != len(pos):
            raise ValueError("ion positions must be distinct (distances strictly positive)")

    @property
    def n_sites(self) -> int:
        return len(self.positions_um)

    def distances_um(self) -> np.ndarray:
        x = np.asarray(self.positions_um)
        return np.abs(x[:, None] - x[None, :])

    def hopping_matrix(self) -> np.ndarray:
        d = self.distances_um()
        k = np.zeros_like(d)
        for i in range(self.n_sites):
            for j in range(i + 1, self.n_sites):
                k[i, j] = k[j, i] = hopping_rate(d[i, j], self.nu_khz, self.mass_amu)
        return k


def corrected_site_frequencies(nu_khz: float, k_khz: np.ndarray) -> np.ndarray:
    """omega_i = nu - sum_{j != i} k_ij / 2, all in kHz."""
    k = _check_hopping(k_khz)
    off_diag = k - np.diag(np.diag(k))
    return nu_khz - off_diag.sum(axis=1) / 2


def _check_hopping(k_khz) -> np.ndarray:
    k = np.atleast_2d(np.asarray(k_khz, dtype=float))
    if k.shape[0] != k.shape[1]:
        raise ValueError(f"hopping matrix must be square, got {k.shape}")
    if not np.all(np.isfinite(k)):
        raise ValueError("hopping matrix has non-finite entries")
    if not np.allclose(k, k.T, rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(k))))):
        raise ValueError("hopping matrix must be symmetric")
    return k


@dataclass(frozen=True, eq=False)
class JchParams:
    """Per-site JC couplings, detunings and the hopping matrix (all kHz)."""

    g_khz: np.ndarray
    delta_khz: np.ndarray
    k_khz: np.ndarray
    nu_khz: float = DEFAULT_NU_KHZ
    omega_khz: np.ndarray = field(default=None)

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.g_khz, dtype=float)).copy()
        delta = np.atleast_1d(np.asarray(self.delta_khz, dtype=float)).copy()
        k = _check_hopping(self.k_khz).copy()
        if not (len(g) == len(delta) == k.shape[0]):
            raise ValueError(f"inconsistent site counts: g {len(g)}, delta {len(delta)}, k {k.shape[0]}")
        if np.any(np.diag(k) != 0):
            raise ValueError("hopping matrix diagonal must be zero")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(delta))):
            raise ValueError("couplings and detunings must be finite")
        omega = corrected_site_frequencies(self.nu_khz, k) if self.omega_khz is None \
            else np.asarray(self.omega_khz, dtype=float).copy()
        for arr in (g, delta, k, omega):
            arr.setflags(write=False)
        object.__setattr__(self, "g_khz", g)
        object.__setattr__(self, "delta_khz", delta)
        object.__setattr__(self, "k_khz", k)
        object.__setattr__(self, "omega_khz", omega)

    @property
    def n_sites(self) -> int:
        return len(self.g_khz)

    @classmethod
    def two_ion(cls, g_khz: float | Sequence[float] = DEFAULT_G_KHZ, delta2_khz: float = 0.0,
                k12_khz: float = DEFAULT_K12_KHZ, delta1_khz: float = 0.0) -> "JchParams":
        g = np.broadcast_to(np.asarray(g_khz, dtype=float), (2,))
        return cls(g, [delta1_khz, delta2_khz], [[0.0, k12_khz], [k12_khz, 0.0]])

    @classmethod
    def from_geometry(cls, geometry: ChainGeometry, g_khz, delta_khz) -> "JchParams":
        n = geometry.n_sites
        return cls(np.broadcast_to(np.asarray(g_khz, dtype=float), (n,)),
                   np.broadcast_to(np.asarray(delta_khz, dtype=float), (n,)),
                   geometry.hopping_matrix(), nu_khz=geometry.nu_khz)

    def with_detuning(self, site: int, delta_khz: float) -> "JchParams":
        delta = self.delta_khz.copy()
        delta[site - 1] = delta_khz
        return replace(self, delta_khz=delta, omega_khz=self.omega_khz)

    def with_coupling(self, site: int, g_khz: float) -> "JchParams":
        g = self.g_khz.copy()
        g[site - 1] = g_khz
        return replace(self, g_khz=g, omega_khz=self.omega_khz)

    def scaled_couplings(self, factors) -> "JchParams":
        """Multiply every g_i by a scalar or per-site factor."""
        return replace(self, g_khz=self.g_khz * np.asarray(factors, dtype=float),
                       omega_khz=self.omega_khz)

    def to_dict(self) -> dict:
        return {
            "g_khz": self.g_khz.tolist(),
            "delta_khz": self.delta_khz.tolist(),
            "k_khz": self.k_khz.tolist(),
            "nu_khz": self.nu_khz,
            "omega_khz": self.omega_khz.tolist(),
        }


def hopping_hamiltonian(k_khz: np.ndarray, space: CompositeSpace) -> OperatorMatrix:
    """sum_{i<j} (k_ij/2)(a_i a_j^dag + a_i^dag a_j)."""
    k = _check_hopping(k_khz)
    if k.shape[0] != space.n_sites:
        raise ValueError(f"hopping matrix is {k.shape[0]}-site, space has {space.n_sites} sites")
    h = np.zeros((space.dim, space.dim), dtype=complex)
    destroy = [site_operators(space, i + 1)[0] for i in range(space.n_sites)]
    for i in range(space.n_sites):
        for j in range(i + 1, space.n_sites):
            if k[i, j] == 0:
                continue
            term = destroy[i] @ destroy[j].conj().T
            h += (k[i, j] / 2) * (term + term.conj().T)
    return OperatorMatrix(space, h, hermitian_hint=True)


def build_jch_hamiltonian(params: JchParams, space: CompositeSpace) -> OperatorMatrix:
    """Rotating-frame JCH Hamiltonian in kHz.

    ``sum_i Delta_i s+s- + g_i (a_i s+_i + h.c.) + sum_{i<j} (k_ij/2)(a_i a_j^dag + h.c.)``
    """
    if params.n_sites != space.n_sites:
        raise ValueError(f"params describe {params.n_sites} sites, space has {space.n_sites}")
    h = hopping_hamiltonian(params.k_khz, space).entries.copy()
    for i in range(space.n_sites):
        a, sm = site_operators(space, i + 1)
        sp = sm.conj().T
        h += params.delta_khz[i] * (sp @ sm)
        h += params.g_khz[i] * (a @ sp + a.conj().T @ sm)
    return OperatorMatrix(space, h, hermitian_hint=True)


def build_drive_hamiltonian(site: int, kind: str, rabi_khz: float, detuning_khz: float,
                            space: CompositeSpace, phase: float = 0.0) -> OperatorMatrix:
    """Single-site laser drive.

    ``carrier``: (Omega/2)(e^{i phi} s+ + h.c.) + Delta s+s-
    ``rsb``:     (Omega/2)(e^{i phi} a s+ + h.c.) + Delta s+s-

    A resonant carrier with Rabi frequency Omega (kHz) flips the spin in
    ``1e3/(2 Omega)`` us; a resonant RSB drive on |1,g> cycles P(e) with
    period ``1e3/Omega`` us.
    """
    if rabi_khz < 0:
        raise ValueError(f"rabi frequency must be non-negative, got {rabi_khz}")
    a, sm = site_operators(space, site)
    sp = sm.conj().T
    if kind == "carrier":
        raising = sp
    elif kind == "rsb":
        raising = a @ sp
    else:
        raise ValueError(f"unknown drive kind {kind!r}; expected 'carrier' or 'rsb'")
    coupling = (rabi_khz / 2) * np.exp(1j * phase) * raising
    h = coupling + coupling.conj().T + detuning_khz * (sp @ sm)
    return OperatorMatrix(space, h, hermitian_hint=True)
