"""Truncated Hilbert space and operator algebra for an N-site ion chain.

Each site carries a two-level internal state and one truncated phonon mode.
The local basis index is ``s * (n_max + 1) + n`` with ``s = 0`` for |g> and
``s = 1`` for |e> (spin major, phonon minor).  Global indices put site 1 in
the outermost (most significant) position, which is exactly the ordering
produced by ``np.kron(op_site1, op_site2, ...)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

HERMITIAN_RTOL = 1e-12
NORM_ATOL = 1e-9
IMAG_ATOL = 1e-10


@dataclass(frozen=True)
class CompositeSpace:
    """Product space of ``n_sites`` identical (spin x Fock) factors."""

    n_sites: int
    fock_cutoff: int = 2

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ValueError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 0:
            raise ValueError(f"fock_cutoff must be a non-negative integer, got {self.fock_cutoff!r}")

    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1

    @property
    def local_dim(self) -> int:
        return 2 * self.n_fock

    @property
    def dim(self) -> int:
        return self.local_dim ** self.n_sites

    def check_site(self, site: int) -> int:
        """Validate a 1-based site index and return its 0-based position."""
        if int(site) != site or not 1 <= site <= self.n_sites:
            raise IndexError(f"site {site!r} out of range 1..{self.n_sites}")
        return int(site) - 1

    def local_index(self, spin: int, phonons: int) -> int:
        if spin not in (0, 1):
            raise ValueError(f"spin must be 0 (g) or 1 (e), got {spin!r}")
        if not 0 <= phonons <= self.fock_cutoff:
            raise ValueError(f"phonon number {phonons} outside 0..{self.fock_cutoff}")
        return spin * self.n_fock + phonons

    def encode(self, local: Sequence[int]) -> int:
        """Global basis index of a tuple of local indices (site 1 first)."""
        if len(local) != self.n_sites:
            raise ValueError(f"expected {self.n_sites} local indices, got {len(local)}")
        index = 0
        for ell in local:
            if not 0 <= ell < self.local_dim:
                raise ValueError(f"local index {ell} outside 0..{self.local_dim - 1}")
            index = index * self.local_dim + int(ell)
        return index

    def decode(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dim:
            raise ValueError(f"global index {index} outside 0..{self.dim - 1}")
        digits = []
        for _ in range(self.n_sites):
            index, ell = divmod(index, self.local_dim)
            digits.append(ell)
        return tuple(reversed(digits))

    def basis_index(self, states: Sequence[tuple[int, int]]) -> int:
        """Global index of a product of ``(phonons, spin)`` kets, i.e. |n, s>."""
        return self.encode([self.local_index(s, n) for n, s in states])

    @cached_property
    def local_labels(self) -> np.ndarray:
        """Array of shape (dim, n_sites, 2) holding (spin, phonons) per site."""
        idx = np.arange(self.dim)
        out = np.empty((self.dim, self.n_sites, 2), dtype=int)
        for pos in range(self.n_sites):
            stride = self.local_dim ** (self.n_sites - 1 - pos)
            ell = (idx // stride) % self.local_dim
            out[:, pos, 0] = ell // self.n_fock
            out[:, pos, 1] = ell % self.n_fock
        return out

    def spin_numbers(self, site: int) -> np.ndarray:
        return self.local_labels[:, self.check_site(site), 0]

    def phonon_numbers(self, site: int) -> np.ndarray:
        return self.local_labels[:, self.check_site(site), 1]

    def polariton_numbers(self, site: int) -> np.ndarray:
        pos = self.check_site(site)
        return self.local_labels[:, pos, 0] + self.local_labels[:, pos, 1]

    def total_excitations(self) -> np.ndarray:
        return self.local_labels.sum(axis=(1, 2))


@dataclass(frozen=True, eq=False)
class StateVector:
    space: CompositeSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.space.dim,):
            raise ValueError(f"state has shape {amps.shape}, space needs ({self.space.dim},)")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def is_normalized(self, atol: float = NORM_ATOL) -> bool:
        return abs(self.norm ** 2 - 1.0) <= atol

    @classmethod
    def basis(cls, space: CompositeSpace, states: Sequence[tuple[int, int]]) -> "StateVector":
        """Product basis state from ``(phonons, spin)`` per site."""
        amps = np.zeros(space.dim, dtype=complex)
        amps[space.basis_index(states)] = 1.0
        return cls(space, amps)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    space: CompositeSpace
    entries: np.ndarray
    hermitian_hint: bool = field(default=False)

    def __post_init__(self):
        mat = np.asarray(self.entries, dtype=complex)
        if mat.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"operator has shape {mat.shape}, space needs {self.space.dim}x{self.space.dim}")
        if self.hermitian_hint and not is_hermitian(mat):
            raise ValueError("operator flagged hermitian but M != M^dagger within tolerance")
        mat.setflags(write=False)
        object.__setattr__(self, "entries", mat)

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _same_space(self.space, other.space)
        return OperatorMatrix(self.space, self.entries + other.entries,
                              self.hermitian_hint and other.hermitian_hint)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        _same_space(self.space, other.space)
        return OperatorMatrix(self.space, self.entries @ other.entries)

    def scaled(self, factor: float) -> "OperatorMatrix":
        return OperatorMatrix(self.space, factor * self.entries,
                              self.hermitian_hint and np.isreal(factor))

    @property
    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(self.space, self.entries.conj().T, self.hermitian_hint)

    def apply(self, psi: StateVector) -> StateVector:
        _same_space(self.space, psi.space)
        return StateVector(self.space, self.entries @ psi.amplitudes)


def _same_space(a: CompositeSpace, b: CompositeSpace) -> None:
    if a != b:
        raise ValueError(f"space mismatch: {a} vs {b}")


def is_hermitian(mat: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    scale = float(np.max(np.abs(mat))) if mat.size else 0.0
    if scale == 0.0:
        return True
    return float(np.max(np.abs(mat - mat.conj().T))) <= rtol * scale


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    """Max-entry magnitude of [a, b]."""
    return float(np.max(np.abs(a @ b - b @ a)))


def make_local_ops(cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """Phonon annihilation and spin lowering operators on one site.

    Both are ``2(cutoff+1)``-square and act as identity on the other factor.
    """
    if int(cutoff) != cutoff or cutoff < 0:
        raise ValueError(f"cutoff must be a non-negative integer, got {cutoff!r}")
    n_fock = int(cutoff) + 1
    a = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), k=1)
    sigma_minus = np.array([[0.0, 1.0], [0.0, 0.0]])  # |g><e| in (g, e) order
    destroy = np.kron(np.eye(2), a).astype(complex)
    spin_lower = np.kron(sigma_minus, np.eye(n_fock)).astype(complex)
    return destroy, spin_lower


def embed_site_operator(op: np.ndarray, site: int, space: CompositeSpace,
                        hermitian_hint: bool = False) -> OperatorMatrix:
    op = np.asarray(op, dtype=complex)
    if op.shape != (space.local_dim, space.local_dim):
        raise ValueError(f"local operator has shape {op.shape}, expected local dimension {space.local_dim}")
    pos = space.check_site(site)
    left = np.eye(space.local_dim ** pos)
    right = np.eye(space.local_dim ** (space.n_sites - 1 - pos))
    return OperatorMatrix(space, np.kron(np.kron(left, op), right), hermitian_hint)


def site_operators(space: CompositeSpace, site: int) -> tuple[np.ndarray, np.ndarray]:
    """Embedded (a_i, sigma^-_i) as plain arrays."""
    destroy, lower = make_local_ops(space.fock_cutoff)
    return (embed_site_operator(destroy, site, space).entries,
            embed_site_operator(lower, site, space).entries)


def diagonal_operator(space: CompositeSpace, diag: np.ndarray) -> OperatorMatrix:
    return OperatorMatrix(space, np.diag(np.asarray(diag, dtype=complex)), hermitian_hint=True)


def number_operator(space: CompositeSpace, site: int, kind: str = "polariton") -> OperatorMatrix:
    """N_tot,i = a^dag a + sigma^+ sigma^- (``polariton``) or a^dag a (``phonon``)."""
    return diagonal_operator(space, _site_counts(space, site, kind))


def total_number_operator(space: CompositeSpace) -> OperatorMatrix:
    return diagonal_operator(space, space.total_excitations())


def projector_ge(site: int, kind: str, threshold: int, space: CompositeSpace) -> OperatorMatrix:
    """Projector onto basis states whose site-local count is at least ``threshold``."""
    if int(threshold) != threshold or threshold < 1:
        raise ValueError(f"threshold must be a positive integer, got {threshold!r}")
    return diagonal_operator(space, (_site_counts(space, site, kind) >= threshold).astype(float))


def _site_counts(space: CompositeSpace, site: int, kind: str) -> np.ndarray:
    if kind == "polariton":
        return space.polariton_numbers(site)
    if kind == "phonon":
        return space.phonon_numbers(site)
    if kind == "spin":
        return space.spin_numbers(site)
    raise ValueError(f"unknown count kind {kind!r}; expected 'polariton', 'phonon' or 'spin'")


def expectation(op: OperatorMatrix, psi: StateVector) -> float:
    """Real expectation value <psi|M|psi> of a hermitian operator."""
    if not op.hermitian_hint:
        raise ValueError("expectation requires an operator flagged hermitian")
    _same_space(op.space, psi.space)
    value = np.vdot(psi.amplitudes, op.entries @ psi.amplitudes)
    if abs(value.imag) > IMAG_ATOL:
        raise ArithmeticError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)
