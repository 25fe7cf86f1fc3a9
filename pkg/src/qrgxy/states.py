"""Ground-state density matrix of a block and its one- and two-site reductions.

Reduced states are computed two ways: by partial trace of ``|phi0><phi0|``
(authoritative) and by the closed-form polynomial entries in the doublet
coefficients. 4x4 matrices use the basis order uu, ud, du, dd.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qrg import BLOCK_SITES, CORNERS, DoubletCoefficients
from .spinlib import DEFAULT_TOL, DensityMatrix, partial_trace, pauli

X_TOL = 1e-12
CROSS_CHECK_TOL = 1e-8

# positions that must vanish in an X-state (0-based)
_NON_X = [(0, 1), (0, 2), (1, 0), (2, 0), (1, 3), (3, 1), (2, 3), (3, 2)]

CENTER_CORNER = "center_corner"
CORNER_CORNER = "corner_corner"


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    rho: DensityMatrix
    x_structure: bool

    @classmethod
    def from_density(cls, rho: DensityMatrix) -> "TwoQubitState":
        if rho.dim != 4:
            raise ValueError("TwoQubitState needs a 4x4 density matrix")
        m = rho.matrix
        return cls(rho, bool(all(abs(m[i, j]) < X_TOL for i, j in _NON_X)))

    @classmethod
    def from_array(cls, m, labels=("A", "B"), tolerance: float = DEFAULT_TOL) -> "TwoQubitState":
        return cls.from_density(DensityMatrix.from_array(m, labels, tolerance))

    @property
    def matrix(self) -> np.ndarray:
        return self.rho.matrix

    def swapped(self) -> "TwoQubitState":
        """Same state with the two qubits exchanged."""
        m = self.matrix.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)
        a, b = self.rho.qubit_labels
        return TwoQubitState.from_array(m, (b, a), self.rho.tolerance)


@dataclass(frozen=True)
class CorrelationVector:
    t1: float
    t2: float
    t3: float
    l1: float
    l2: float
    l3: float
    x1: float
    x2: float

    def center_corner(self) -> tuple[float, float, float, float]:
        return self.t1, self.t2, self.t3, self.x1

    def corner_corner(self) -> tuple[float, float, float, float]:
        return self.l1, self.l2, self.l3, self.x2


def ground_state(d: DoubletCoefficients) -> DensityMatrix:
    """Pure block ground state |phi0><phi0| on sites 1..5."""
    return DensityMatrix.from_ket(d.phi0(), BLOCK_SITES)


def pair_state(d: DoubletCoefficients, i: int, j: int) -> TwoQubitState:
    """Reduced state of sites (i, j), qubit i first."""
    return TwoQubitState.from_density(partial_trace(ground_state(d), [i, j]))


def rho12(d: DoubletCoefficients) -> TwoQubitState:
    return pair_state(d, 1, 2)


def rho23(d: DoubletCoefficients) -> TwoQubitState:
    return pair_state(d, 2, 3)


def reduced_state(d: DoubletCoefficients, which: str) -> TwoQubitState:
    if which in ("rho12", CENTER_CORNER):
        return rho12(d)
    if which in ("rho23", CORNER_CORNER):
        return rho23(d)
    raise ValueError(f"unknown pair {which!r}")


def rho12_closed(d: DoubletCoefficients) -> TwoQubitState:
    g1, g2, g3, g4, g5 = d.as_array()[:5]
    a = 3 * g1 * g4 + g2 * g5
    b = g1 * g3 + 3 * g2 * g4
    m = np.array(
        [
            [3 * g1**2 + g2**2, 0, 0, a],
            [0, g1**2 + 3 * g2**2, b, 0],
            [0, b, g3**2 + 3 * g4**2, 0],
            [a, 0, 0, 3 * g4**2 + g5**2],
        ]
    )
    return TwoQubitState.from_array(m, (1, 2))


def rho23_closed(d: DoubletCoefficients) -> TwoQubitState:
    g1, g2, g3, g4, g5 = d.as_array()[:5]
    a = 2 * g1 * g2 + g3 * g4 + g4 * g5
    c = g1**2 + g2**2 + 2 * g4**2
    m = np.array(
        [
            [2 * g1**2 + g3**2 + g4**2, 0, 0, a],
            [0, c, c, 0],
            [0, c, c, 0],
            [a, 0, 0, 2 * g2**2 + g4**2 + g5**2],
        ]
    )
    return TwoQubitState.from_array(m, (2, 3))


def closed_form_mismatch(d: DoubletCoefficients) -> dict[str, float]:
    """Max entrywise deviation of each closed-form pair state from its partial trace."""
    return {
        "rho12": float(np.max(np.abs(rho12_closed(d).matrix - rho12(d).matrix))),
        "rho23": float(np.max(np.abs(rho23_closed(d).matrix - rho23(d).matrix))),
    }


def closed_correlations(d: DoubletCoefficients) -> CorrelationVector:
    g1, g2, g3, g4, g5 = d.as_array()[:5]
    return CorrelationVector(
        t1=2 * g1 * g3 + 6 * g4 * (g1 + g2) + 2 * g2 * g5,
        t2=2 * g1 * g3 + 6 * g4 * (g2 - g1) - 2 * g2 * g5,
        t3=2 * g1**2 - 2 * g2**2 - g3**2 + g5**2,
        l1=2 * (g1 + g2) ** 2 + 2 * g4 * (g3 + g5) + 4 * g4**2,
        l2=2 * (g1 - g2) ** 2 - 2 * g4 * (g3 + g5) + 4 * g4**2,
        l3=g3**2 - 2 * g4**2 + g5**2,
        x1=4 * g1**2 + 4 * g2**2 - g3**2 - 6 * g4**2 - g5**2,
        x2=2 * g1**2 - 2 * g2**2 + g3**2 - g5**2,
    )


def pauli_correlations(s: TwoQubitState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bloch vectors a, b and correlation matrix T_ij = Tr(rho sigma_i x sigma_j)."""
    m = s.matrix
    sig = [pauli(k).entries for k in "xyz"]
    eye = np.eye(2)
    a = np.array([np.trace(m @ np.kron(p, eye)).real for p in sig])
    b = np.array([np.trace(m @ np.kron(eye, p)).real for p in sig])
    t = np.array([[np.trace(m @ np.kron(p, q)).real for q in sig] for p in sig])
    return a, b, t


def correlation_vector(s: TwoQubitState, which: str, d: DoubletCoefficients) -> CorrelationVector:
    """Closed-form correlation polynomials, cross-checked against the Pauli expectations of ``s``.

    The polynomials coincide with the diagonal of T and the z Bloch component
    of the first qubit (conversion constant 1); off-diagonal T entries vanish.
    """
    cv = closed_correlations(d)
    a, _, t = pauli_correlations(s)
    if which in ("rho12", CENTER_CORNER):
        closed = cv.center_corner()
    elif which in ("rho23", CORNER_CORNER):
        closed = cv.corner_corner()
    else:
        raise ValueError(f"unknown pair {which!r}")
    numeric = (t[0, 0], t[1, 1], t[2, 2], a[2])
    err = max(abs(p - q) for p, q in zip(closed, numeric))
    off = np.max(np.abs(t - np.diag(np.diag(t))))
    if err > CROSS_CHECK_TOL or off > CROSS_CHECK_TOL:
        raise ValueError(
            f"correlation polynomials disagree with Pauli expectations "
            f"(diag err {err:.2e}, off-diag {off:.2e})"
        )
    return cv


def single_site_states(d: DoubletCoefficients) -> dict[int, DensityMatrix]:
    rho = ground_state(d)
    return {site: partial_trace(rho, [site]) for site in BLOCK_SITES}


def corner_pairs() -> list[tuple[int, int]]:
    return [(i, j) for k, i in enumerate(CORNERS) for j in CORNERS[k + 1:]]
