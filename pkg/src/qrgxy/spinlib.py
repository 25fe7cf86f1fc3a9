"""Dense operator algebra on small qubit registers.

Everything here is dense complex numpy; the largest operator in the package
is 32x32 (one five-site block), so there is nothing to gain from sparse
storage. Kronecker products always follow the order of ``qubit_labels``.
Basis state ``|0>`` is spin up (sigma^z = +1), ``|1>`` is spin down.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9

Site = Hashable

_PAULI = {
    "identity": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class StateValidationError(ValueError):
    """Raised when a matrix fails density-matrix validation."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Complex square matrix acting on a labelled qubit register."""

    entries: np.ndarray
    qubit_labels: tuple = field(default=())
    hermitian: bool = False

    def __post_init__(self):
        m = _frozen(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        labels = tuple(self.qubit_labels)
        if not labels:
            n = int(round(np.log2(m.shape[0])))
            labels = tuple(range(1, n + 1))
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate qubit labels {labels}")
        if m.shape[0] != 2 ** len(labels):
            raise ValueError(f"dim {m.shape[0]} does not match {len(labels)} qubit labels")
        if self.hermitian and np.max(np.abs(m - m.conj().T), initial=0.0) >= 1e-12:
            raise ValueError("operator flagged Hermitian is not Hermitian")
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "qubit_labels", labels)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_labels)

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        _check_same_register(self, other)
        return DenseOperator(self.entries @ other.entries, self.qubit_labels)

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        _check_same_register(self, other)
        return DenseOperator(
            self.entries + other.entries, self.qubit_labels, self.hermitian and other.hermitian
        )

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        _check_same_register(self, other)
        return DenseOperator(
            self.entries - other.entries, self.qubit_labels, self.hermitian and other.hermitian
        )

    def __mul__(self, scalar) -> "DenseOperator":
        herm = self.hermitian and np.isreal(scalar)
        return DenseOperator(self.entries * scalar, self.qubit_labels, bool(herm))

    __rmul__ = __mul__

    def dagger(self) -> "DenseOperator":
        return DenseOperator(self.entries.conj().T, self.qubit_labels, self.hermitian)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def is_hermitian(self, tol: float = DEFAULT_TOL) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0) < tol)


def _check_same_register(a: DenseOperator, b: DenseOperator) -> None:
    if a.qubit_labels != b.qubit_labels:
        raise ValueError(f"register mismatch: {a.qubit_labels} vs {b.qubit_labels}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated quantum state: unit trace, Hermitian, positive semidefinite."""

    op: DenseOperator
    tolerance: float = DEFAULT_TOL

    def __post_init__(self):
        m = self.op.entries
        tol = self.tolerance
        tr = np.trace(m)
        if abs(tr - 1.0) > tol:
            raise StateValidationError(f"trace {tr.real:.3e}{tr.imag:+.3e}j differs from 1")
        herm_err = np.max(np.abs(m - m.conj().T))
        if herm_err > tol:
            raise StateValidationError(f"not Hermitian (max |A - A^dag| = {herm_err:.3e})")
        lo = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
        if lo < -tol:
            raise StateValidationError(f"not positive semidefinite (min eigenvalue {lo:.3e})")

    @classmethod
    def from_array(cls, rho, labels: Sequence[Site] = (), tolerance: float = DEFAULT_TOL):
        return cls(DenseOperator(np.asarray(rho, dtype=complex), tuple(labels)), tolerance)

    @classmethod
    def from_ket(cls, psi, labels: Sequence[Site] = (), tolerance: float = DEFAULT_TOL):
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        return cls.from_array(np.outer(psi, psi.conj()), labels, tolerance)

    @property
    def matrix(self) -> np.ndarray:
        return self.op.entries

    @property
    def qubit_labels(self) -> tuple:
        return self.op.qubit_labels

    @property
    def dim(self) -> int:
        return self.op.dim

    def purity(self) -> float:
        m = self.matrix
        return float(np.real(np.trace(m @ m)))


def pauli(axis: str) -> DenseOperator:
    """Single-qubit Pauli matrix; ``axis`` is one of x, y, z, identity (or i)."""
    key = "identity" if axis in ("i", "I", "identity") else axis.lower()
    try:
        return DenseOperator(_PAULI[key], (0,), hermitian=True)
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}") from None


def kron(*ops: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def embed(op: DenseOperator | np.ndarray, site: Site, register: Sequence[Site]) -> DenseOperator:
    """Place a single-qubit operator on ``site`` of ``register``, identity elsewhere."""
    register = tuple(register)
    if site not in register:
        raise KeyError(f"site {site!r} not in register {register}")
    m = op.entries if isinstance(op, DenseOperator) else np.asarray(op, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError("embed expects a single-qubit operator")
    herm = bool(np.allclose(m, m.conj().T, atol=1e-14, rtol=0))
    factors = [m if s == site else _PAULI["identity"] for s in register]
    return DenseOperator(kron(*factors), register, hermitian=herm)


def eig_hermitian(op: DenseOperator | np.ndarray, tol: float = 1e-10):
    """Eigendecomposition of a Hermitian operator.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and
    eigenvectors as orthonormal columns.
    """
    m = op.entries if isinstance(op, DenseOperator) else np.asarray(op, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if np.max(np.abs(m - m.conj().T), initial=0.0) > tol * scale:
        raise ValueError("eig_hermitian requires a Hermitian operator")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w, v


def partial_trace(
    rho: DensityMatrix, keep: Sequence[Site], tolerance: float | None = None
) -> DensityMatrix:
    """Reduce ``rho`` to the sites in ``keep``.

    The kept sites appear in the order given by ``keep``, so
    ``partial_trace(rho, [2, 1])`` is the (2, 1) reduced state, not (1, 2).
    """
    keep = list(keep)
    if not keep:
        raise ValueError("keep must name at least one site")
    labels = rho.qubit_labels
    unknown = [s for s in keep if s not in labels]
    if unknown:
        raise KeyError(f"unknown sites {unknown} (register {labels})")
    if len(set(keep)) != len(keep):
        raise ValueError("duplicate sites in keep")
    reduced = reduce_array(rho.matrix, labels, keep)
    tol = rho.tolerance if tolerance is None else tolerance
    return DensityMatrix(DenseOperator(reduced, tuple(keep)), tol)


def reduce_array(m: np.ndarray, labels: Sequence[Site], keep: Sequence[Site]) -> np.ndarray:
    """Partial trace on a raw matrix; works for any (not only positive) operator."""
    labels = list(labels)
    n = len(labels)
    idx = [labels.index(s) for s in keep]
    rest = [i for i in range(n) if i not in idx]
    t = m.reshape([2] * (2 * n))
    perm = idx + rest + [n + i for i in idx] + [n + i for i in rest]
    k, r = 2 ** len(idx), 2 ** len(rest)
    t = t.transpose(perm).reshape(k, r, k, r)
    return np.einsum("arbr->ab", t)


def partial_transpose(m: np.ndarray, sites: Sequence[int], n_qubits: int) -> np.ndarray:
    """Transpose the tensor factors at positions ``sites`` (0-based)."""
    t = np.asarray(m).reshape([2] * (2 * n_qubits))
    perm = list(range(2 * n_qubits))
    for s in sites:
        perm[s], perm[n_qubits + s] = perm[n_qubits + s], perm[s]
    return t.transpose(perm).reshape(2**n_qubits, 2**n_qubits)


def trace_norm(op: DenseOperator | np.ndarray) -> float:
    """Sum of singular values."""
    m = op.entries if isinstance(op, DenseOperator) else np.asarray(op)
    if np.allclose(m, m.conj().T, atol=1e-13, rtol=0):
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))
