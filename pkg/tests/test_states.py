import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrgxy.qrg import CouplingPoint, extract_doublet, flow_coefficients
from qrgxy.spinlib import pauli
from qrgxy.states import (
    TwoQubitState,
    closed_form_mismatch,
    corner_pairs,
    correlation_vector,
    pair_state,
    pauli_correlations,
    reduced_state,
    rho12,
    rho12_closed,
    rho23,
    rho23_closed,
    single_site_states,
)

XX = np.kron(pauli("x").entries, pauli("x").entries)
YY = np.kron(pauli("y").entries, pauli("y").entries)


@pytest.mark.parametrize("step", [0, 1, 2])
@pytest.mark.parametrize("gamma", np.linspace(-1, 1, 21))
def test_closed_forms_match_partial_trace(gamma, step):
    d = flow_coefficients(float(gamma), step)
    mm = closed_form_mismatch(d)
    assert mm["rho12"] < 1e-10
    assert mm["rho23"] < 1e-10


@given(st.floats(-1, 1))
def test_pair_states_are_x_states(gamma):
    d = extract_doublet(CouplingPoint(1.0, gamma))
    assert rho12(d).x_structure
    assert rho23(d).x_structure


@given(st.floats(-1, 1))
def test_correlation_polynomials_match_pauli_expectations(gamma):
    d = extract_doublet(CouplingPoint(1.0, gamma))
    cv = correlation_vector(rho12(d), "rho12", d)
    correlation_vector(rho23(d), "rho23", d)
    # the center site is always maximally mixed
    assert cv.x1 == pytest.approx(0.0, abs=1e-12)
    a, _, _ = pauli_correlations(rho23(d))
    assert cv.x2 == pytest.approx(a[2], abs=1e-12)


def test_correlation_vector_rejects_unknown_pair():
    d = extract_doublet(CouplingPoint(1.0, 0.2))
    with pytest.raises(ValueError):
        correlation_vector(rho12(d), "rho99", d)
    with pytest.raises(ValueError):
        reduced_state(d, "rho99")


def test_all_corner_pairs_are_equivalent():
    d = extract_doublet(CouplingPoint(1.0, 0.31))
    ref = rho23(d).matrix
    for i, j in corner_pairs():
        assert np.allclose(pair_state(d, i, j).matrix, ref, atol=1e-13)
    center = rho12(d).matrix
    for j in (3, 4, 5):
        assert np.allclose(pair_state(d, 1, j).matrix, center, atol=1e-13)
    assert len(corner_pairs()) == 6


def test_single_site_states():
    d = extract_doublet(CouplingPoint(1.0, -0.4))
    singles = single_site_states(d)
    assert np.allclose(singles[1].matrix, np.eye(2) / 2, atol=1e-13)
    for k in (3, 4, 5):
        assert np.allclose(singles[k].matrix, singles[2].matrix, atol=1e-13)


def test_ising_limits():
    d = extract_doublet(CouplingPoint(1.0, 1.0))
    assert np.allclose(rho12(d).matrix, (np.eye(4) - XX) / 4, atol=1e-12)
    assert np.allclose(rho23(d).matrix, (np.eye(4) + XX) / 4, atol=1e-12)
    d = extract_doublet(CouplingPoint(1.0, -1.0))
    assert np.allclose(rho12(d).matrix, (np.eye(4) - YY) / 4, atol=1e-12)
    assert np.allclose(rho23(d).matrix, (np.eye(4) + YY) / 4, atol=1e-12)


def test_closed_form_states_are_valid():
    d = extract_doublet(CouplingPoint(1.0, 0.6))
    for s in (rho12_closed(d), rho23_closed(d)):
        assert np.trace(s.matrix).real == pytest.approx(1.0)
        assert np.linalg.eigvalsh(s.matrix)[0] > -1e-12


def test_swapped_exchanges_qubits():
    d = extract_doublet(CouplingPoint(1.0, 0.2))
    s = rho12(d)
    t = s.swapped()
    assert np.allclose(t.matrix, pair_state(d, 2, 1).matrix, atol=1e-13)
    assert t.rho.qubit_labels == (2, 1)
    assert np.allclose(t.swapped().matrix, s.matrix)


def test_two_qubit_state_rejects_other_sizes():
    with pytest.raises(ValueError):
        TwoQubitState.from_array(np.eye(2) / 2, ("a",))
