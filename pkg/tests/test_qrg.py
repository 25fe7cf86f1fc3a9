import math
import pickle

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrgxy import qrg
from qrgxy.qrg import (
    CLASS_SIZES,
    CouplingPoint,
    DoubletCoefficients,
    FlowSingularityError,
    block_hamiltonian,
    doublet_vectors,
    effective_size,
    extract_doublet,
    parity_operator,
    projected_bond,
    pauli_coefficients,
    renormalize_closed,
    renormalize_projector,
    run_flow,
)
from qrgxy.spinlib import kron, pauli

gammas = st.floats(-0.99, 0.99, allow_nan=False)

# frozen from the closed-form and projector paths, which agree to 1e-15
FROZEN_J_HALF = 0.7395055308318924
FROZEN_GAMMA_HALF = 0.9998752753089905


def test_block_hamiltonian_hermitian_and_parity_symmetric():
    h = block_hamiltonian(CouplingPoint(1.0, 0.3)).entries
    p = parity_operator().entries
    assert np.allclose(h, h.conj().T)
    assert np.allclose(h @ p, p @ h)


@pytest.mark.parametrize("gamma, e0", [(0.0, -math.sqrt(1.5)), (1.0, -2.0), (-1.0, -2.0)])
def test_ground_energy_analytic(gamma, e0):
    # XX star: sqrt(1.5); Ising star: (1/2) X1 sum Xm has ground energy -2
    w = np.linalg.eigvalsh(block_hamiltonian(CouplingPoint(1.0, gamma)).entries)
    assert w[0] == pytest.approx(e0, abs=1e-12)
    assert w[1] == pytest.approx(e0, abs=1e-12)


@given(gammas)
def test_doublet_is_normalized_and_related_by_global_flip(gamma):
    d = extract_doublet(CouplingPoint(1.0, gamma))
    d.check()
    flip = kron(*([pauli("x").entries] * 5)).real
    overlap = d.phi0_prime() @ flip @ d.phi0()
    assert abs(overlap) == pytest.approx(1.0, abs=1e-9)
    # gauge: the first class with a non-negligible amplitude is positive in each sector
    g = d.as_array()
    for block in (g[:5], g[5:]):
        lead = block[np.abs(block) > 1e-12][0]
        assert lead > 0


def test_doublet_vectors_are_eigenvectors():
    c = CouplingPoint(1.0, 0.37)
    levels, odd, even = doublet_vectors(c)
    e0 = levels[0]
    assert levels[1] == pytest.approx(e0, abs=1e-12) and levels[2] > e0 + 1e-3
    h = block_hamiltonian(c).entries.real
    assert np.allclose(h @ odd, e0 * odd)
    assert np.allclose(h @ even, e0 * even)
    assert abs(odd @ even) < 1e-12


def test_isotropic_point_coefficients():
    d = extract_doublet(CouplingPoint(1.0, 0.0))
    assert d.g1 == pytest.approx(0, abs=1e-12)
    assert d.g3 == pytest.approx(0, abs=1e-12)
    assert d.g5 == pytest.approx(0, abs=1e-12)


def test_class_sizes():
    assert CLASS_SIZES.tolist() == [4, 4, 1, 6, 1, 1, 6, 1, 4, 4]


def test_coefficients_validation():
    with pytest.raises(ValueError):
        DoubletCoefficients.from_array([0.1] * 9)
    with pytest.raises(ValueError):
        DoubletCoefficients.from_array([0.1] * 10).check()


def test_coupling_point_rejects_non_finite():
    with pytest.raises(ValueError):
        CouplingPoint(float("nan"), 0.0)
    with pytest.raises(ValueError):
        CouplingPoint(1.0, float("inf"))


def test_fixed_points():
    c0 = CouplingPoint(1.0, 0.0)
    r0 = renormalize_closed(c0, extract_doublet(c0))
    assert r0.gamma == pytest.approx(0.0, abs=1e-15)
    assert r0.J == pytest.approx(0.375, abs=1e-12)
    for g in (1.0, -1.0):
        c = CouplingPoint(1.0, g)
        r = renormalize_closed(c, extract_doublet(c))
        assert r.gamma == pytest.approx(g, abs=1e-12)
        assert r.J == pytest.approx(1.0, abs=1e-12)


def test_relevant_direction_slope():
    # the linearized flow at the XX point multiplies gamma by 11 per step
    eps = 1e-7
    c = CouplingPoint(1.0, eps)
    r = renormalize_closed(c, extract_doublet(c))
    assert r.gamma / eps == pytest.approx(11.0, rel=1e-6)


def test_frozen_flow_values():
    c = CouplingPoint(1.0, 0.5)
    r = renormalize_closed(c, extract_doublet(c))
    assert r.J == pytest.approx(FROZEN_J_HALF, abs=1e-12)
    assert r.gamma == pytest.approx(FROZEN_GAMMA_HALF, abs=1e-12)


@pytest.mark.parametrize("gamma", np.linspace(-1, 1, 11))
def test_closed_form_matches_projector(gamma):
    c = CouplingPoint(1.0, float(gamma))
    a = renormalize_closed(c, extract_doublet(c))
    b = renormalize_projector(c)
    assert a.J == pytest.approx(b.J, abs=1e-10)
    assert a.gamma == pytest.approx(b.gamma, abs=1e-10)


def test_projected_hamiltonian_has_only_xy_terms():
    coeffs = pauli_coefficients(projected_bond(CouplingPoint(1.0, 0.2), include_blocks=False))
    for key, v in coeffs.items():
        if key not in ("xx", "yy"):
            assert abs(v) < 1e-12, key


@given(gammas)
def test_flow_is_odd_in_gamma(gamma):
    cp, cm = CouplingPoint(1.0, gamma), CouplingPoint(1.0, -gamma)
    rp = renormalize_closed(cp, extract_doublet(cp))
    rm = renormalize_closed(cm, extract_doublet(cm))
    assert rm.gamma == pytest.approx(-rp.gamma, abs=1e-12)
    assert rm.J == pytest.approx(rp.J, abs=1e-12)


@given(gammas, st.floats(-5, 5).filter(lambda j: abs(j) > 1e-3))
def test_flow_scales_with_j(gamma, j):
    c1 = CouplingPoint(1.0, gamma)
    cj = CouplingPoint(j, gamma)
    r1 = renormalize_closed(c1, extract_doublet(c1))
    rj = renormalize_closed(cj, extract_doublet(cj))
    assert rj.J == pytest.approx(j * r1.J, rel=1e-9, abs=1e-12)
    assert rj.gamma == pytest.approx(r1.gamma, abs=1e-9)


def test_run_flow_records_steps():
    trace = run_flow(CouplingPoint(-2.0, 0.1), 3)
    assert len(trace) == 4 and not trace.truncated
    assert trace.effective_size == [5, 25, 125, 625]
    assert trace.j_sign_changes == ()
    assert all(s.coupling.J < 0 for s in trace.steps)
    assert abs(trace[3].coupling.gamma) > abs(trace[1].coupling.gamma)
    with pytest.raises(ValueError):
        run_flow(CouplingPoint(1.0, 0.1), qrg.MAX_STEPS + 1)


def test_flow_converges_to_ising():
    trace = run_flow(CouplingPoint(1.0, 0.3), 4)
    assert trace[4].coupling.gamma == pytest.approx(1.0, abs=1e-9)


def test_effective_size():
    assert [effective_size(k) for k in range(4)] == [5, 25, 125, 625]


def test_flow_singularity_pickles_with_context():
    err = FlowSingularityError("boom", gamma=0.25, step=3)
    back = pickle.loads(pickle.dumps(err))
    assert (back.gamma, back.step, str(back)) == (0.25, 3, "boom")


def test_run_flow_reports_step_of_singularity(monkeypatch):
    def bad(c, d):
        raise FlowSingularityError("denominator vanished", gamma=c.gamma)

    monkeypatch.setattr(qrg, "renormalize_closed", bad)
    with pytest.raises(FlowSingularityError) as info:
        run_flow(CouplingPoint(1.0, 0.4), 2)
    assert info.value.step == 0
