import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polariton_engine.quantum_core import (
    HilbertSpace, annihilation_op, check_density_matrix, eig_hermitian, expectation, ket2dm,
    populations, qubit_ops, tensor, thermal_field_dm,
)


def test_annihilation_commutator_below_cutoff():
    a = annihilation_op(5)
    comm = a @ a.conj().T - a.conj().T @ a
    np.testing.assert_allclose(np.diag(comm)[:-1], 1.0)
    assert comm[-1, -1] == pytest.approx(-5.0)


def test_annihilation_rejects_zero_cutoff():
    with pytest.raises(ValueError):
        annihilation_op(0)


def test_qubit_ops_conventions():
    sz, sp, sm = qubit_ops(1, 1)
    np.testing.assert_array_equal(np.diag(sz).real, [1, -1])
    e, g = np.eye(2)
    np.testing.assert_array_equal(sp @ g, e)
    np.testing.assert_array_equal(sm @ e, g)
    with pytest.raises(IndexError):
        qubit_ops(2, 3)


def test_two_qubit_ops_act_on_their_own_factor():
    s1 = qubit_ops(2, 1)[0]
    s2 = qubit_ops(2, 2)[0]
    np.testing.assert_array_equal(s1 @ s2, s2 @ s1)
    np.testing.assert_array_equal(s1, tensor(np.diag([1, -1]), np.eye(2)))


def test_index_layout():
    sp = HilbertSpace(1, 3)
    assert sp.dim == 8
    assert sp.index("e", 0) == 0
    assert sp.index("g", 1) == 5
    sp2 = HilbertSpace(2, 1)
    assert sp2.index("ge", 0) == 4
    assert sp2.index((1, 1), 1) == 7
    with pytest.raises(ValueError):
        sp.index("e", 4)


def test_excitation_number_commutes_with_coupling():
    sp = HilbertSpace(2, 3)
    N = sp.excitation_number()
    sz, spl, smn = sp.collective()
    a = sp.a()
    V = a @ spl + a.conj().T @ smn
    np.testing.assert_allclose(N @ V - V @ N, 0, atol=1e-12)


def test_eig_hermitian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**31))
def test_eig_hermitian_reconstructs(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    A = X + X.conj().T
    w, V = eig_hermitian(A)
    assert np.all(np.diff(w) >= 0)
    np.testing.assert_allclose(V @ np.diag(w) @ V.conj().T, A, atol=1e-10)
    pivots = V[np.argmax(np.abs(V), axis=0), np.arange(n)]
    np.testing.assert_allclose(pivots.imag, 0, atol=1e-12)
    assert np.all(pivots.real > 0)


def test_expectation_and_populations_agree_for_pure_and_mixed():
    sp = HilbertSpace(1, 2)
    psi = (sp.basis("e", 0) + 1j * sp.basis("g", 1)) / np.sqrt(2)
    sz = sp.sigma()[0]
    assert expectation(sz, psi) == pytest.approx(0.0)
    assert expectation(sz, ket2dm(psi)) == pytest.approx(0.0)
    P = np.stack([sp.basis("e", 0), sp.basis("g", 1)])
    np.testing.assert_allclose(populations(psi, P), [0.5, 0.5])
    np.testing.assert_allclose(populations(ket2dm(psi), P), [0.5, 0.5])
    with pytest.raises(ValueError):
        expectation(np.eye(3), psi)


@given(st.floats(0, 5))
def test_thermal_field_dm_is_valid(n_bar):
    rho = thermal_field_dm(HilbertSpace(1, 6), n_bar)
    check_density_matrix(rho)


def test_check_density_matrix_flags_bad_trace():
    with pytest.raises(ValueError):
        check_density_matrix(np.eye(2) * 0.6)
