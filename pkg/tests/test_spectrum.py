import numpy as np
import pytest
from hypothesis import given, strategies as st

from jchsim.spectrum import dressed_energy, gap_table, generalized_rabi, jc_eigen, spectrum_curve

from test_acceptance import TABLE_MINUS, TABLE_PLUS

detunings = st.floats(-1000, 1000, allow_nan=False)
couplings = st.floats(0, 100, allow_nan=False)


def _block(delta, g, p):
    c = g * np.sqrt(p)
    return np.array([[0.0, c], [c, delta]])


@given(detunings, couplings, st.integers(1, 4))
def test_eigenpairs_solve_the_block(delta, g, p):
    minus, plus = jc_eigen(delta, g, p)
    evals = np.linalg.eigvalsh(_block(delta, g, p))
    scale = max(1.0, abs(delta), g)
    assert minus.energy_khz == pytest.approx(evals[0], abs=1e-12 * scale)
    assert plus.energy_khz == pytest.approx(evals[1], abs=1e-12 * scale)
    assert minus.energy_khz <= plus.energy_khz
    m = _block(delta, g, p)
    for pair in (minus, plus):
        v = np.array(pair.vector)
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert pair.vector[0] >= 0
        np.testing.assert_allclose(m @ v, pair.energy_khz * v, atol=1e-9 * scale)
    assert abs(np.dot(minus.vector, plus.vector)) <= 1e-9


@given(detunings, couplings, st.integers(1, 3))
def test_mirror_symmetry(delta, g, p):
    m_pos, p_pos = jc_eigen(delta, g, p)
    m_neg, p_neg = jc_eigen(-delta, g, p)
    scale = max(1.0, abs(delta), g)
    assert m_neg.energy_khz == pytest.approx(-p_pos.energy_khz, abs=1e-12 * scale)
    assert p_neg.energy_khz == pytest.approx(-m_pos.energy_khz, abs=1e-12 * scale)


def test_resonant_closed_form():
    minus, plus = jc_eigen(0.0, 11.8)
    assert (minus.energy_khz, plus.energy_khz) == (-11.8, 11.8)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(minus.vector, (s, -s))
    np.testing.assert_allclose(plus.vector, (s, s))
    assert generalized_rabi(0.0, 11.8, 2) == pytest.approx(2 * 11.8 * np.sqrt(2))
    assert dressed_energy(-24.0, 11.8, "minus") == pytest.approx(-12 - np.sqrt(144 + 11.8 ** 2))


def test_uncoupled_limit():
    minus, plus = jc_eigen(0.0, 0.0)
    assert minus.energy_khz == plus.energy_khz == 0.0
    assert abs(np.dot(minus.vector, plus.vector)) == 0.0
    minus, plus = jc_eigen(-5.0, 0.0)
    assert minus.vector == (0.0, 1.0) and plus.vector == (1.0, 0.0)


def test_gap_table_definitions():
    (row,) = gap_table([-24.0], 11.8, "minus")
    assert row.gap1_khz == pytest.approx(-11.8 - row.e_minus2_khz)
    assert row.gap2_khz == pytest.approx(row.e_plus2_khz + 11.8)
    (row,) = gap_table([24.0], 11.8, "plus")
    assert row.gap1_khz == pytest.approx(11.8 - row.e_minus2_khz)
    with pytest.raises(ValueError):
        gap_table([], 11.8, "minus")
    with pytest.raises(ValueError):
        gap_table([1.0], 11.8, "middle")


def test_smaller_gap_peaks_at_minus_24():
    rows = gap_table([-30, -28, -26, -24, -22, -20, -15], 11.8, "minus")
    low = {r.delta2_khz: min(r.gap1_khz, r.gap2_khz) for r in rows}
    assert max(low, key=low.get) == -24


def test_tables_reproduced_with_fitted_coupling():
    # the tabulated energies are consistent with g = 11.75 kHz rather than 11.8
    for table, branch in ((TABLE_MINUS, "minus"), (TABLE_PLUS, "plus")):
        for ref, row in zip(table, gap_table([r[0] for r in table], 11.75, branch)):
            assert abs(row.e_minus2_khz - ref[1]) <= 0.05
            assert abs(row.e_plus2_khz - ref[2]) <= 0.05
            assert abs(row.gap1_khz - ref[3]) <= 0.1
            assert abs(row.gap2_khz - ref[4]) <= 0.1


def test_spectrum_curve_shape():
    curve = spectrum_curve(np.linspace(-50, 50, 11), 11.8)
    assert curve.shape == (11, 3)
    assert np.all(curve[:, 1] <= curve[:, 2])
    assert spectrum_curve([], 11.8).shape == (0, 3)
    with pytest.raises(ValueError):
        jc_eigen(0.0, 1.0, p=0)
