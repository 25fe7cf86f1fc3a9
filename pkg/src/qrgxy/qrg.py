"""Five-site block renormalization of the square-lattice XY model.

A block is a central site 1 bonded to four corner sites 2..5. Its ground
level is a doublet split across the two sigma^z-parity sectors: ``phi0``
(odd number of down spins) and ``phi0'`` (even). Each parity sector
state is fixed by five real amplitudes shared across spin-flip pattern
classes, giving ten coefficients g1..g10 in total.

Pattern classes, keyed by (site 1 down?, number of down corners)::

    phi0 :  g1 (up, 1)  g2 (up, 3)  g3 (down, 0)  g4 (down, 2)  g5 (down, 4)
    phi0':  g6 (up, 0)  g7 (up, 2)  g8 (up, 4)    g9 (down, 1)  g10 (down, 3)
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .spinlib import DenseOperator, eig_hermitian, embed, kron, pauli

BLOCK_SITES = (1, 2, 3, 4, 5)
CORNERS = (2, 3, 4, 5)
MAX_STEPS = 12

DEGENERACY_TOL = 1e-10
CLASS_SPREAD_TOL = 1e-8
SINGULAR_DENOMINATOR = 1e-14

# (site-1 down, corner downs) -> index into g1..g10 (0-based)
_ODD_CLASSES = {(0, 1): 0, (0, 3): 1, (1, 0): 2, (1, 2): 3, (1, 4): 4}
_EVEN_CLASSES = {(0, 0): 5, (0, 2): 6, (0, 4): 7, (1, 1): 8, (1, 3): 9}


class DoubletError(RuntimeError):
    """The block spectrum does not have the expected doublet structure."""


class FlowSingularityError(ArithmeticError):
    def __init__(self, message: str, gamma: float | None = None, step: int | None = None):
        super().__init__(message)
        self.message = message
        self.gamma = gamma
        self.step = step

    def __reduce__(self):
        # keep gamma and step when the error crosses a process boundary
        return (type(self), (self.message, self.gamma, self.step))


@dataclass(frozen=True)
class CouplingPoint:
    J: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.J) and math.isfinite(self.gamma)):
            raise ValueError(f"non-finite coupling (J={self.J}, gamma={self.gamma})")


def _pattern_table():
    """Basis index -> (odd class, even class); one of the two is None."""
    table = []
    for bits in itertools.product((0, 1), repeat=5):
        key = (bits[0], sum(bits[1:]))
        table.append((_ODD_CLASSES.get(key), _EVEN_CLASSES.get(key)))
    return table


_PATTERNS = _pattern_table()
# 32x10 incidence matrix: column k marks the basis states carrying amplitude g_{k+1}
CLASS_MATRIX = np.zeros((32, 10))
for _idx, (_odd, _even) in enumerate(_PATTERNS):
    CLASS_MATRIX[_idx, _odd if _odd is not None else _even] = 1.0
CLASS_SIZES = CLASS_MATRIX.sum(axis=0).astype(int)
PARITY_ODD = np.array([odd is not None for odd, _ in _PATTERNS])


@dataclass(frozen=True)
class DoubletCoefficients:
    g1: float
    g2: float
    g3: float
    g4: float
    g5: float
    g6: float
    g7: float
    g8: float
    g9: float
    g10: float

    @classmethod
    def from_array(cls, values) -> "DoubletCoefficients":
        values = [float(v) for v in values]
        if len(values) != 10:
            raise ValueError("need exactly ten coefficients")
        return cls(*values)

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.g1, self.g2, self.g3, self.g4, self.g5,
             self.g6, self.g7, self.g8, self.g9, self.g10]
        )

    def norms(self) -> tuple[float, float]:
        g = self.as_array()
        w = CLASS_SIZES * g**2
        return float(w[:5].sum()), float(w[5:].sum())

    def check(self, tol: float = 1e-9) -> None:
        n0, n1 = self.norms()
        if abs(n0 - 1) > tol or abs(n1 - 1) > tol:
            raise ValueError(f"doublet coefficients not normalized ({n0!r}, {n1!r})")

    def phi0(self) -> np.ndarray:
        g = self.as_array().copy()
        g[5:] = 0.0
        return CLASS_MATRIX @ g

    def phi0_prime(self) -> np.ndarray:
        g = self.as_array().copy()
        g[:5] = 0.0
        return CLASS_MATRIX @ g


@dataclass(frozen=True)
class FlowStep:
    index: int
    coupling: CouplingPoint
    coefficients: DoubletCoefficients | None

    @property
    def effective_size(self) -> int:
        return effective_size(self.index)


@dataclass(frozen=True)
class FlowTrace:
    steps: tuple[FlowStep, ...]
    truncated: bool = False
    reason: str = ""
    j_sign_changes: tuple[int, ...] = field(default=())

    @property
    def effective_size(self) -> list[int]:
        return [s.effective_size for s in self.steps]

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, k: int) -> FlowStep:
        return self.steps[k]


def effective_size(step: int) -> int:
    """Sites represented by one effective spin after ``step`` renormalizations of 5-site blocks."""
    return 5 ** (step + 1)


@lru_cache(maxsize=None)
def _star_bonds() -> tuple[np.ndarray, np.ndarray]:
    """sum_m X1 Xm and sum_m Y1 Ym over the corners."""
    x, y = pauli("x"), pauli("y")
    x1, y1 = embed(x, 1, BLOCK_SITES).entries, embed(y, 1, BLOCK_SITES).entries
    sxx = sum(x1 @ embed(x, m, BLOCK_SITES).entries for m in CORNERS)
    syy = sum(y1 @ embed(y, m, BLOCK_SITES).entries for m in CORNERS)
    sxx.setflags(write=False)
    syy.setflags(write=False)
    return sxx, syy


def block_hamiltonian(c: CouplingPoint) -> DenseOperator:
    """(J/4) sum_m [(1+g) X1 Xm + (1-g) Y1 Ym], m over the four corners."""
    sxx, syy = _star_bonds()
    h = 0.25 * c.J * ((1 + c.gamma) * sxx + (1 - c.gamma) * syy)
    return DenseOperator(h, BLOCK_SITES, hermitian=True)


@lru_cache(maxsize=None)
def parity_operator() -> DenseOperator:
    z = pauli("z").entries
    return DenseOperator(kron(*([z] * 5)), BLOCK_SITES, hermitian=True)


def _real_gauge(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    v = v * (abs(v[k]) / v[k])
    if np.max(np.abs(v.imag)) > 1e-9:
        raise DoubletError("sector ground state is not real up to a global phase")
    return v.real


def _class_amplitudes(v: np.ndarray, columns: range) -> np.ndarray:
    out = []
    for k in columns:
        members = v[CLASS_MATRIX[:, k] > 0]
        if np.ptp(members) > CLASS_SPREAD_TOL:
            raise DoubletError(
                f"amplitudes in class g{k + 1} differ by {np.ptp(members):.2e}"
            )
        out.append(members.mean())
    out = np.array(out)
    # reference component g1 (g6) made non-negative; fall back to the first nonzero class
    ref = next((a for a in out if abs(a) > 1e-12), 1.0)
    return out if ref > 0 else -out


def doublet_vectors(c: CouplingPoint) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lowest block eigenvalues and the parity-resolved doublet (phi0, phi0')."""
    if c.J == 0:
        raise DoubletError("J = 0: the block spectrum is fully degenerate")
    w, v = eig_hermitian(block_hamiltonian(c))
    e0 = w[0]
    if abs(w[1] - w[0]) > DEGENERACY_TOL * max(1.0, abs(e0)):
        raise DoubletError(f"lowest level is not two-fold (splitting {w[1] - w[0]:.2e})")
    if abs(w[2] - w[1]) < 1e-8:
        raise DoubletError("accidental extra degeneracy above the ground doublet")
    sub = v[:, :2]
    par = sub.conj().T @ parity_operator().entries @ sub
    pw, pv = np.linalg.eigh(0.5 * (par + par.conj().T))
    if not (abs(pw[0] + 1) < 1e-8 and abs(pw[1] - 1) < 1e-8):
        raise DoubletError(f"doublet is not split across parity sectors (parities {pw})")
    rotated = sub @ pv
    odd = _real_gauge(rotated[:, 0])
    even = _real_gauge(rotated[:, 1])
    return w[:3], odd, even


def extract_doublet(c: CouplingPoint) -> DoubletCoefficients:
    """Read g1..g10 off the numerically diagonalized block Hamiltonian."""
    _, odd, even = doublet_vectors(c)
    if np.max(np.abs(odd[~PARITY_ODD])) > 1e-9 or np.max(np.abs(even[PARITY_ODD])) > 1e-9:
        raise DoubletError("parity projection leaked into the wrong sector")
    g = np.concatenate([_class_amplitudes(odd, range(0, 5)), _class_amplitudes(even, range(5, 10))])
    d = DoubletCoefficients.from_array(g)
    d.check()
    return d


def _flow_polynomials(d: DoubletCoefficients, gamma: float) -> tuple[float, float]:
    """Numerator and denominator of the renormalized anisotropy, fully expanded.

    The denominator is also the factor J'/J.
    """
    g1, g2, g3, g4, g5, g6, g7, g8, g9, g10 = d.as_array()
    G = gamma
    den = (
        g10**2 * (9 * g4**2 + 6 * G * g4 * g5 + g5**2)
        + 9 * g2**2 * g7**2
        + g1**2 * (g6**2 + 6 * G * g6 * g7 + 9 * g7**2)
        + 6 * G * g2**2 * g7 * g8
        + g2**2 * g8**2
        + 6 * G * g2 * g3 * g7 * g9
        + 18 * g2 * g4 * g7 * g9
        + 2 * g2 * g3 * g8 * g9
        + 6 * G * g2 * g4 * g8 * g9
        + g3**2 * g9**2
        + 6 * G * g3 * g4 * g9**2
        + 9 * g4**2 * g9**2
        + 2 * g1 * (
            g2 * (3 * g7 * (3 * G * g7 + g8) + g6 * (3 * g7 + G * g8))
            + (G * g3 * g6 + 3 * g4 * g6 + 3 * g3 * g7 + 9 * G * g4 * g7) * g9
        )
        + 2 * g10 * (
            g1 * (g5 * g6 + 9 * g4 * g7)
            + G * (9 * g2 * g4 * g7 + 3 * g1 * (g4 * g6 + g5 * g7) + g2 * g5 * g8
                   + 9 * g4**2 * g9 + g3 * g5 * g9)
            + 3 * (g2 * (g5 * g7 + g4 * g8) + g4 * (g3 + g5) * g9)
        )
    )
    num = (
        2 * (3 * g10 * g4 + 3 * g1 * g7 + g2 * g8 + g3 * g9)
        * (g10 * g5 + g1 * g6 + 3 * g2 * g7 + 3 * g4 * g9)
        + G * (
            g10**2 * (9 * g4**2 + g5**2)
            + 9 * g2**2 * g7**2
            + g1**2 * (g6**2 + 9 * g7**2)
            + g2**2 * g8**2
            + 18 * g2 * g4 * g7 * g9
            + 2 * g2 * g3 * g8 * g9
            + g3**2 * g9**2
            + 9 * g4**2 * g9**2
            + 6 * g1 * (g2 * g7 * (g6 + g8) + (g4 * g6 + g3 * g7) * g9)
            + 2 * g10 * (g1 * (g5 * g6 + 9 * g4 * g7)
                         + 3 * (g2 * (g5 * g7 + g4 * g8) + g4 * (g3 + g5) * g9))
        )
    )
    return float(num), float(den)


def renormalize_closed(c: CouplingPoint, d: DoubletCoefficients) -> CouplingPoint:
    """Renormalized (J', gamma') from the expanded closed-form polynomials."""
    num, den = _flow_polynomials(d, c.gamma)
    if abs(den) < SINGULAR_DENOMINATOR:
        raise FlowSingularityError(
            f"renormalization denominator {den:.3e} vanishes at gamma={c.gamma!r}",
            gamma=c.gamma,
        )
    return CouplingPoint(c.J * den, num / den)


def _two_block_projector(c: CouplingPoint) -> np.ndarray:
    _, odd, even = doublet_vectors(c)
    p0 = np.column_stack([odd, even]).astype(complex)  # |phi0><up| + |phi0'><down|
    return np.kron(p0, p0)


def projected_bond(c: CouplingPoint, include_blocks: bool = True) -> np.ndarray:
    """P^dag (H_B + H_B + one inter-block bond) P on two blocks, as a 4x4 matrix.

    The bond joins corner 2 of the left block to corner 3 of the right block.
    The 1024-dim two-block operator is built explicitly and applied to P.
    """
    x, y = pauli("x"), pauli("y")
    x2, y2 = embed(x, 2, BLOCK_SITES).entries, embed(y, 2, BLOCK_SITES).entries
    x3, y3 = embed(x, 3, BLOCK_SITES).entries, embed(y, 3, BLOCK_SITES).entries
    h = 0.25 * c.J * ((1 + c.gamma) * np.kron(x2, x3) + (1 - c.gamma) * np.kron(y2, y3))
    if include_blocks:
        hb = block_hamiltonian(c).entries
        eye = np.eye(32)
        h = h + np.kron(hb, eye) + np.kron(eye, hb)
    p = _two_block_projector(c)
    return p.conj().T @ (h @ p)


def pauli_coefficients(m: np.ndarray) -> dict[str, complex]:
    """Expansion coefficients of a two-qubit operator in the Pauli product basis."""
    labels = ("identity", "x", "y", "z")
    short = "ixyz"
    out = {}
    for (a, la), (b, lb) in itertools.product(zip(short, labels), repeat=2):
        basis = np.kron(pauli(la).entries, pauli(lb).entries)
        out[a + b] = complex(np.trace(basis @ m) / 4)
    return out


def renormalize_projector(c: CouplingPoint, tol: float = 1e-9) -> CouplingPoint:
    """Renormalized couplings read off the projected two-block Hamiltonian."""
    coeffs = pauli_coefficients(projected_bond(c))
    cxx, cyy = coeffs["xx"].real, coeffs["yy"].real
    scale = max(abs(cxx), abs(cyy), abs(c.J), 1e-300)
    stray = {k: v for k, v in coeffs.items() if k not in ("ii", "xx", "yy") and abs(v) > tol * scale}
    if stray or abs(coeffs["xx"].imag) > tol * scale or abs(coeffs["yy"].imag) > tol * scale:
        raise DoubletError(f"projected Hamiltonian has non-XY terms: {stray}")
    total = cxx + cyy
    if abs(total) < SINGULAR_DENOMINATOR * scale:
        raise FlowSingularityError(
            f"projected coupling vanishes at gamma={c.gamma!r}", gamma=c.gamma
        )
    # (J'/4)(1+g') XX + (J'/4)(1-g') YY
    return CouplingPoint(2.0 * total, (cxx - cyy) / total)


def run_flow(c0: CouplingPoint, n_steps: int) -> FlowTrace:
    """Iterate extract -> renormalize, keeping every intermediate coupling and doublet."""
    if not 0 <= n_steps <= MAX_STEPS:
        raise ValueError(f"n_steps must lie in [0, {MAX_STEPS}]")
    steps = []
    c = c0
    sign_changes = []
    for k in range(n_steps + 1):
        try:
            d = extract_doublet(c)
        except DoubletError as exc:
            steps.append(FlowStep(k, c, None))
            return FlowTrace(tuple(steps), True, f"step {k}: {exc}", tuple(sign_changes))
        steps.append(FlowStep(k, c, d))
        if k == n_steps:
            break
        try:
            nxt = renormalize_closed(c, d)
        except FlowSingularityError as exc:
            exc.step = k
            raise
        except ValueError as exc:
            return FlowTrace(tuple(steps), True, f"step {k}: {exc}", tuple(sign_changes))
        if np.sign(nxt.J) != np.sign(c.J):
            sign_changes.append(k + 1)
        c = nxt
    return FlowTrace(tuple(steps), False, "", tuple(sign_changes))


def flow_coefficients(gamma0: float, step: int, j0: float = 1.0) -> DoubletCoefficients:
    """Doublet coefficients after ``step`` renormalizations starting from (j0, gamma0)."""
    trace = run_flow(CouplingPoint(j0, gamma0), step)
    if trace.truncated or trace[step].coefficients is None:
        raise FlowSingularityError(f"flow truncated: {trace.reason}", gamma=gamma0, step=step)
    return trace[step].coefficients
