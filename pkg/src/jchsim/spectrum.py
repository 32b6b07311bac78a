"""Single-site Jaynes-Cummings dressed states.

Within the p-excitation manifold {|p,g>, |p-1,e>} the rotating-frame JC block
is ``[[0, g sqrt(p)], [g sqrt(p), Delta]]``.  Energies are quoted relative to
the bare |p,g> level (p*omega in the lab frame), so

    E_pm = Delta/2 +- Omega_p/2,   Omega_p = sqrt(Delta^2 + 4 g^2 p).

Dressed vectors are real with a non-negative |p,g> coefficient.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

BRANCHES = ("minus", "plus")


def _check_p(p: int) -> int:
    if int(p) != p or p < 1:
        raise ValueError(f"excitation number p must be an integer >= 1, got {p!r}")
    return int(p)


def generalized_rabi(delta_khz: float, g_khz: float, p: int = 1) -> float:
    p = _check_p(p)
    return float(np.sqrt(delta_khz ** 2 + 4 * g_khz ** 2 * p))


@dataclass(frozen=True)
class DressedEigenpair:
    p: int
    branch: str
    energy_khz: float
    vector: tuple[float, float]  # amplitudes on (|p,g>, |p-1,e>)


def _mixing_vectors(coupling: float, delta_khz: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """(minus, plus) eigenvectors from the mixing angle phi = atan2(2c, Delta).

    The angle form stays orthonormal even when the coupling underflows.
    """
    if coupling == 0.0:
        # bare levels; |p-1,e> is the lower one only for negative detuning
        return ((0.0, 1.0), (1.0, 0.0)) if delta_khz < 0 else ((1.0, 0.0), (0.0, 1.0))
    half = 0.5 * np.arctan2(2 * coupling, delta_khz)
    c, s = float(np.cos(half)), float(np.sin(half))
    return (c, -s), (s, c)


def jc_eigen(delta_khz: float, g_khz: float, p: int = 1) -> tuple[DressedEigenpair, DressedEigenpair]:
    """Return the (minus, plus) dressed eigenpairs of the p-excitation JC block."""
    p = _check_p(p)
    if g_khz < 0:
        raise ValueError(f"coupling must be non-negative, got {g_khz}")
    omega = generalized_rabi(delta_khz, g_khz, p)
    v_minus, v_plus = _mixing_vectors(g_khz * np.sqrt(p), delta_khz)
    return (DressedEigenpair(p, "minus", float(delta_khz / 2 - omega / 2), v_minus),
            DressedEigenpair(p, "plus", float(delta_khz / 2 + omega / 2), v_plus))


def dressed_energy(delta_khz: float, g_khz: float, branch: str, p: int = 1) -> float:
    minus, plus = jc_eigen(delta_khz, g_khz, p)
    return _pick(minus, plus, branch).energy_khz


def _pick(minus: DressedEigenpair, plus: DressedEigenpair, branch: str) -> DressedEigenpair:
    if branch == "minus":
        return minus
    if branch == "plus":
        return plus
    raise ValueError(f"branch must be 'minus' or 'plus', got {branch!r}")


@dataclass(frozen=True)
class GapRow:
    delta2_khz: float
    e_minus2_khz: float
    e_plus2_khz: float
    gap1_khz: float
    gap2_khz: float


def gap_table(delta_list: Iterable[float], g_khz: float, reference_branch: str,
              delta1_khz: float = 0.0, g1_khz: float | None = None) -> list[GapRow]:
    """Ion-2 dressed energies and their gaps to Ion 1's reference level.

    ``gap1 = E_ref - E_{1,-,2}`` and ``gap2 = E_{1,+,2} - E_ref`` where
    ``E_ref`` is Ion 1's energy on ``reference_branch``.
    """
    deltas = list(delta_list)
    if not deltas:
        raise ValueError("delta_list must be non-empty")
    g1 = g_khz if g1_khz is None else g1_khz
    e_ref = dressed_energy(delta1_khz, g1, reference_branch)
    rows = []
    for d in deltas:
        minus, plus = jc_eigen(d, g_khz)
        rows.append(GapRow(float(d), minus.energy_khz, plus.energy_khz,
                           e_ref - minus.energy_khz, plus.energy_khz - e_ref))
    return rows


def spectrum_curve(deltas: Iterable[float], g_khz: float, p: int = 1) -> np.ndarray:
    """Rows of (delta, E_minus, E_plus) for plotting the avoided crossing."""
    out = []
    for d in deltas:
        minus, plus = jc_eigen(d, g_khz, p)
        out.append((float(d), minus.energy_khz, plus.energy_khz))
    return np.array(out, dtype=float).reshape(-1, 3)
