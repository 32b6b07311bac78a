import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jchsim.hilbert import CompositeSpace, commutator_norm, is_hermitian, site_operators, total_number_operator
from jchsim.model import (ChainGeometry, JchParams, build_drive_hamiltonian, build_jch_hamiltonian,
                          corrected_site_frequencies, hopping_hamiltonian, hopping_rate)

# CODATA 2018 values, typed in independently of scipy.constants
E_CHARGE = 1.602176634e-19
EPS0 = 8.8541878128e-12
AMU = 1.66053906660e-27

# frozen: e^2 / (4 pi eps0 m d^3 2 pi nu) / 2 pi for d = 18 um, nu = 2740 kHz, 40 amu
K_18UM_KHZ = 5.50586


def _hopping_by_hand(d_um, nu_khz, mass_amu):
    omega = 2 * np.pi * nu_khz * 1e3
    k = E_CHARGE ** 2 / (4 * np.pi * EPS0 * mass_amu * AMU * (d_um * 1e-6) ** 3 * omega)
    return k / (2 * np.pi) / 1e3


def test_hopping_rate_matches_hand_formula():
    got = hopping_rate(18.0, 2740.0, 40.0)
    assert got == pytest.approx(_hopping_by_hand(18.0, 2740.0, 40.0), rel=1e-8)
    assert got == pytest.approx(K_18UM_KHZ, abs=1e-5)


@given(st.floats(2.0, 200.0), st.floats(100.0, 1e4), st.floats(1.0, 200.0))
def test_hopping_rate_scaling(d, nu, m):
    k = hopping_rate(d, nu, m)
    assert k == pytest.approx(_hopping_by_hand(d, nu, m), rel=1e-8)
    assert hopping_rate(2 * d, nu, m) == pytest.approx(k / 8, rel=1e-12)


@pytest.mark.parametrize("bad", [(0, 2740, 40), (18, -1, 40), (18, 2740, float("nan"))])
def test_hopping_rate_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        hopping_rate(*bad)


def test_chain_geometry():
    geo = ChainGeometry(positions_um=(0.0, 18.0, 36.0))
    k = geo.hopping_matrix()
    assert k[0, 1] == pytest.approx(K_18UM_KHZ, abs=1e-5)
    assert k[0, 2] == pytest.approx(k[0, 1] / 8)
    np.testing.assert_allclose(k, k.T)
    with pytest.raises(ValueError):
        ChainGeometry(positions_um=(0.0, 0.0))
    freqs = corrected_site_frequencies(2740.0, k)
    assert freqs[1] == pytest.approx(2740.0 - k[0, 1])


def test_params_validation_and_copies():
    p = JchParams.two_ion(delta2_khz=-24)
    q = p.with_detuning(2, 10).with_coupling(1, 0.0)
    assert p.delta_khz[1] == -24 and q.delta_khz[1] == 10 and q.g_khz[0] == 0.0 and p.g_khz[0] == 11.8
    with pytest.raises(ValueError):
        p.g_khz[0] = 1.0
    with pytest.raises(ValueError):
        JchParams([1.0], [0.0, 0.0], [[0.0]])
    with pytest.raises(ValueError):
        JchParams([1.0, 1.0], [0.0, 0.0], [[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        JchParams([1.0, 1.0], [0.0, 0.0], [[1.0, 1.0], [1.0, 0.0]])
    assert p.to_dict()["k_khz"] == [[0.0, 5.9], [5.9, 0.0]]
    np.testing.assert_allclose(p.scaled_couplings(2.0).g_khz, [23.6, 23.6])


def test_two_site_hamiltonian_matches_hand_built_terms():
    space = CompositeSpace(2, 2)
    p = JchParams([11.8, 10.0], [0.0, -24.0], [[0.0, 5.9], [5.9, 0.0]])
    a1, s1 = site_operators(space, 1)
    a2, s2 = site_operators(space, 2)
    dag = lambda m: m.conj().T
    expected = (0.0 * dag(s1) @ s1 - 24.0 * dag(s2) @ s2
                + 11.8 * (a1 @ dag(s1) + dag(a1) @ s1)
                + 10.0 * (a2 @ dag(s2) + dag(a2) @ s2)
                + 5.9 / 2 * (a1 @ dag(a2) + dag(a1) @ a2))
    np.testing.assert_allclose(build_jch_hamiltonian(p, space).entries, expected, atol=1e-14)


def test_single_excitation_matrix_elements():
    space = CompositeSpace(2, 2)
    p = JchParams.two_ion(delta2_khz=-24)
    h = build_jch_hamiltonian(p, space).entries
    i1g = space.basis_index([(1, 0), (0, 0)])
    i0e = space.basis_index([(0, 1), (0, 0)])
    j1g = space.basis_index([(0, 0), (1, 0)])
    j0e = space.basis_index([(0, 0), (0, 1)])
    assert h[i1g, i0e] == pytest.approx(11.8)
    assert h[i1g, j1g] == pytest.approx(5.9 / 2)
    assert h[j0e, j0e] == pytest.approx(-24.0)
    assert h[j1g, j0e] == pytest.approx(11.8)
    # two phonons: <2g| a^dag sigma^- |1e> = sqrt(2) g
    assert h[space.basis_index([(2, 0), (0, 0)]), space.basis_index([(1, 1), (0, 0)])] == pytest.approx(11.8 * np.sqrt(2))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3), st.lists(st.floats(-500, 500), min_size=3, max_size=3),
       st.floats(0, 20), st.floats(0, 20))
def test_hamiltonian_hermitian_and_conserves_excitations(g, delta, k12, k23):
    space = CompositeSpace(3, 1)
    k = np.array([[0, k12, 0], [k12, 0, k23], [0, k23, 0]], dtype=float)
    h = build_jch_hamiltonian(JchParams(g, delta, k), space).entries
    assert is_hermitian(h)
    scale = max(1.0, float(np.max(np.abs(h))))
    assert commutator_norm(h, total_number_operator(space).entries) <= 1e-12 * scale


def test_drive_hamiltonians():
    space = CompositeSpace(1, 2)
    carrier = build_drive_hamiltonian(1, "carrier", 600.0, 0.0, space).entries
    g0, e0 = space.basis_index([(0, 0)]), space.basis_index([(0, 1)])
    assert carrier[e0, g0] == pytest.approx(300.0)
    rsb = build_drive_hamiltonian(1, "rsb", 23.6, 5.0, space, phase=np.pi / 2).entries
    g1 = space.basis_index([(1, 0)])
    assert rsb[e0, g1] == pytest.approx(11.8j)
    assert rsb[e0, e0] == pytest.approx(5.0)
    # resonant RSB at 2g on one site reproduces the JC term
    jc = build_jch_hamiltonian(JchParams([11.8], [0.0], [[0.0]]), space).entries
    np.testing.assert_allclose(build_drive_hamiltonian(1, "rsb", 23.6, 0.0, space).entries, jc, atol=1e-14)
    with pytest.raises(ValueError):
        build_drive_hamiltonian(1, "bsb", 1.0, 0.0, space)
    with pytest.raises(ValueError):
        build_drive_hamiltonian(1, "rsb", -1.0, 0.0, space)


def test_hopping_hamiltonian_shape_check():
    with pytest.raises(ValueError):
        hopping_hamiltonian(np.zeros((3, 3)), CompositeSpace(2, 1))
