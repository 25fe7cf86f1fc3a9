import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from qrgxy import measures as M
from qrgxy.measures import DiscordSettings, panel
from qrgxy.qrg import CouplingPoint, extract_doublet, flow_coefficients
from qrgxy.spinlib import pauli
from qrgxy.states import rho12, rho23
from qrgxy.validation import random_pure, random_state

SIG = [pauli(a).entries for a in "xyz"]
BELL = np.outer([1, 0, 0, 1], [1, 0, 0, 1]) / 2


def bell_diagonal(c):
    return (np.eye(4) + sum(ci * np.kron(s, s) for ci, s in zip(c, SIG))) / 4


def bell_diagonal_discord(c):
    """Closed form for Bell-diagonal states: I(rho) minus the classical correlation."""
    c1, c2, c3 = c
    lam = np.array(
        [1 - c1 - c2 - c3, 1 - c1 + c2 + c3, 1 + c1 - c2 + c3, 1 + c1 + c2 - c3]
    ) / 4
    lam = lam[lam > 0]
    info = 2 + float(np.sum(lam * np.log2(lam)))
    cm = max(abs(c1), abs(c2), abs(c3))
    classical = sum((1 + s * cm) / 2 * math.log2(1 + s * cm) for s in (1, -1) if 1 + s * cm > 0)
    return info - classical


def werner(p):
    return p * BELL + (1 - p) * np.eye(4) / 4


@pytest.mark.parametrize(
    "fn, expected",
    [
        (M.negativity, 0.5),
        (M.concurrence, 1.0),
        (M.quantum_discord, 1.0),
        (M.mid, 1.0),
        (M.min_nonlocality, 1.0),
        (M.min_nonlocality_hs, 0.5),
        (M.gqd, 0.5),
        (M.gqd_search, 0.5),
        (M.chsh_max, 2 * math.sqrt(2)),
        (M.chsh_direct, 2 * math.sqrt(2)),
    ],
)
def test_bell_state_values(fn, expected):
    assert fn(BELL) == pytest.approx(expected, abs=1e-8)


@given(st.floats(0, 1))
def test_werner_state_formulas(p):
    rho = werner(p)
    assert M.negativity(rho) == pytest.approx(max(0.0, (3 * p - 1) / 4), abs=1e-10)
    assert M.concurrence(rho) == pytest.approx(max(0.0, (3 * p - 1) / 2), abs=1e-10)
    assert M.gqd(rho) == pytest.approx(p * p / 2, abs=1e-12)
    assert M.min_nonlocality(rho) == pytest.approx(p, abs=1e-8)
    assert M.chsh_max(rho) == pytest.approx(2 * math.sqrt(2) * p, abs=1e-12)


@given(st.tuples(*[st.floats(-1, 1)] * 3))
def test_discord_matches_bell_diagonal_formula(c):
    rho = bell_diagonal(c)
    assume(np.linalg.eigvalsh(rho)[0] > 1e-9)
    assert M.quantum_discord(rho) == pytest.approx(bell_diagonal_discord(c), abs=1e-7)


def test_discord_refinement_beats_dense_grid(rng):
    for _ in range(3):
        s = random_state(rng)
        res = M.discord_search(s)
        _, _, f = M.discord_objective_grid(s, 512, 512)
        ra, rb = M.marginals(s)
        brute = M.von_neumann_entropy(rb) - M.von_neumann_entropy(s) + float(f.min())
        assert res.value <= brute + 1e-10
        assert res.value == pytest.approx(brute, abs=1e-4)
        assert res.value <= res.grid_value + 1e-12


def test_discord_without_refinement_reports_grid_value():
    s = bell_diagonal((0.3, -0.2, 0.1))
    res = M.discord_search(s, DiscordSettings(refine=False))
    assert res.value == res.grid_value and not res.degraded


@given(st.integers(0, 10_000))
def test_pure_state_discord_is_entanglement_entropy(seed):
    psi = random_pure(np.random.default_rng(seed))
    rho = np.outer(psi, psi.conj())
    ra, _ = M.marginals(rho)
    ent = M.von_neumann_entropy(ra)
    assert M.quantum_discord(rho) == pytest.approx(ent, abs=1e-7)
    assert M.concurrence(rho) == pytest.approx(M.concurrence_pure(psi), abs=1e-8)
    assert M.negativity(rho) == pytest.approx(M.negativity_pure(psi), abs=1e-10)


@given(st.integers(0, 10_000))
def test_local_unitary_invariance(seed):
    r = np.random.default_rng(seed)
    rho = random_state(r)
    u = np.kron(unitary_group.rvs(2, random_state=r), unitary_group.rvs(2, random_state=r))
    rot = u @ rho @ u.conj().T
    for fn in (M.negativity, M.concurrence, M.gqd, M.chsh_max, M.min_nonlocality):
        assert fn(rot) == pytest.approx(fn(rho), abs=1e-7), fn.__name__
    assert M.quantum_discord(rot) == pytest.approx(M.quantum_discord(rho), abs=1e-6)


@given(st.integers(0, 10_000))
def test_generic_paths_agree_on_random_states(seed):
    rho = random_state(np.random.default_rng(seed))
    assert M.negativity(rho) == pytest.approx(M.negativity_spectral(rho), abs=1e-12)
    assert M.gqd(rho) == pytest.approx(M.gqd_search(rho), abs=1e-8)
    assert M.chsh_direct(rho) == pytest.approx(M.chsh_max(rho), abs=1e-8)
    assert M.concurrence(rho) == pytest.approx(M.concurrence_eigvals(rho), abs=1e-6)


@given(st.integers(0, 10_000))
def test_x_state_closed_forms(seed):
    x = M.x_part(random_state(np.random.default_rng(seed)))
    assert M.concurrence(x) == pytest.approx(M.concurrence_x(x), abs=1e-9)
    assert M.negativity(x) == pytest.approx(M.negativity_x(x), abs=1e-12)


def test_product_states_carry_no_quantum_correlations(rng):
    for _ in range(5):
        a, b = random_state(rng)[:2, :2], random_state(rng)[2:, 2:]
        a, b = a / np.trace(a), b / np.trace(b)
        rho = np.kron(a, b)
        p = panel(rho)
        for mid_ in ("ne", "qd", "mid", "min", "gqd", "c"):
            assert abs(p.value(mid_)) < 1e-8, mid_
        assert p.chsh_max <= 2.0 + 1e-12


@pytest.mark.parametrize("step", [0, 2])
@pytest.mark.parametrize("gamma", [-0.7, -0.05, 0.0, 0.3, 0.95])
def test_closed_forms_agree_on_flow_states(gamma, step):
    d = flow_coefficients(gamma, step)
    for which, s in (("rho12", rho12(d)), ("rho23", rho23(d))):
        p = panel(s, d, which)
        assert p.discrepancies == []
        for name in ("negativity", "min_nonlocality", "gqd", "chsh_max", "concurrence"):
            assert p.provenance[name] == M.BOTH_AGREE, name
        assert p.provenance["discord"] == M.GENERIC
        assert p.check_ranges() == []


def test_min_closed_form_is_trace_norm_not_hilbert_schmidt():
    d = extract_doublet(CouplingPoint(1.0, 0.4))
    for which, s in (("rho12", rho12(d)), ("rho23", rho23(d))):
        closed = M.min_nonlocality_closed(d, which)
        assert M.min_nonlocality(s) == pytest.approx(closed, abs=1e-8)
    # at the Ising point the two norms differ by a fixed factor
    d = extract_doublet(CouplingPoint(1.0, 1.0))
    assert M.min_nonlocality(rho12(d)) == pytest.approx(1.0, abs=1e-8)
    assert M.min_nonlocality_hs(rho12(d)) == pytest.approx(0.25, abs=1e-8)


def test_panel_records_discrepancy(monkeypatch):
    d = extract_doublet(CouplingPoint(1.0, 0.4))
    monkeypatch.setattr(M, "negativity_closed", lambda d, w: 0.42)
    p = panel(rho12(d), d, "rho12", measures=("ne",))
    assert p.provenance["negativity"] == M.GENERIC
    assert p.discrepancies == [("negativity", p.negativity, 0.42)]


def test_panel_selection_and_unknown_measure():
    p = panel(BELL, measures=("c", "ne"))
    assert p.discord is None and p.concurrence == pytest.approx(1.0)
    assert p.provenance["concurrence"] == M.GENERIC
    with pytest.raises(KeyError):
        panel(BELL, measures=("zz",))


def test_check_ranges_flags_bad_values():
    p = M.MeasurePanel(negativity=0.7, chsh_max=float("nan"), gqd=0.1)
    assert sorted(p.check_ranges()) == ["chsh_max=nan", "negativity=0.7"]


def test_concurrence_rejects_non_physical_input():
    with pytest.raises(ValueError):
        M.concurrence(np.diag([0.6, 0.4, -0.2, 0.2]))


def test_measurement_basis_projectors():
    b = M.MeasurementBasis(0.3, 1.1)
    p0, p1 = b.projectors()
    assert np.allclose(p0 + p1, np.eye(2))
    assert np.allclose(p0 @ p0, p0)
    assert np.linalg.norm(b.direction()) == pytest.approx(1.0)
