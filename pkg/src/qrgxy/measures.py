"""Two-qubit correlation and nonlocality measures.

Every measure has a definition-level ("generic") implementation that works on
any two-qubit state; that value is authoritative. For the block pair states
there are also closed forms in the doublet coefficients, which ``panel``
evaluates alongside and compares.

Conventions: entropies in bits; qubit A is the first tensor factor. Discord
measures B, MIN and geometric discord measure A.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import entr

from .qrg import DoubletCoefficients
from .spinlib import partial_transpose, trace_norm
from .states import CENTER_CORNER, CORNER_CORNER, TwoQubitState, closed_correlations, pauli_correlations

MEASURES = ("ne", "qd", "mid", "min", "gqd", "chsh", "c")
MEASURE_NAMES = {
    "ne": "negativity",
    "qd": "discord",
    "mid": "mid",
    "min": "min_nonlocality",
    "gqd": "gqd",
    "chsh": "chsh_max",
    "c": "concurrence",
}

CLOSED_FORM, GENERIC, BOTH_AGREE = "closed_form", "generic", "both_agree"

# closed-form CHSH expressions omit the factor 2 of 2*sqrt(u1 + u2); measured by the dual path
CHSH_CONVENTION = 2.0
DUAL_PATH_TOL = 1e-6
CLAMP = 1e-12
DEGENERATE_MARGINAL = 1e-9
_LN2 = math.log(2.0)

_SIGMA = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)
_YY = np.kron(_SIGMA[1], _SIGMA[1])


def _mat(s) -> np.ndarray:
    if isinstance(s, TwoQubitState):
        return s.matrix
    if hasattr(s, "matrix"):
        return s.matrix
    return np.asarray(s, dtype=complex)


def _clamp(value: float, lo: float | None = 0.0, hi: float | None = None) -> float:
    if lo is not None and lo - CLAMP <= value < lo:
        value = lo
    if hi is not None and hi < value <= hi + CLAMP:
        value = hi
    return float(value)


def _which(which: str) -> str:
    if which in ("rho12", CENTER_CORNER):
        return "rho12"
    if which in ("rho23", CORNER_CORNER):
        return "rho23"
    raise ValueError(f"unknown pair {which!r}")


# ---------------------------------------------------------------- entropy


def _shannon_bits(p: np.ndarray) -> np.ndarray:
    """-sum p log2 p along the last axis, with 0 log 0 = 0 and tiny negatives clipped."""
    return entr(np.clip(np.real(p), 0.0, None)).sum(axis=-1) / _LN2


def von_neumann_entropy(rho) -> float:
    m = _mat(rho)
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return float(_shannon_bits(w))


def marginals(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = m.reshape(2, 2, 2, 2)
    return np.einsum("ajbj->ab", t), np.einsum("iaib->ab", t)


def mutual_information(rho) -> float:
    m = _mat(rho)
    ra, rb = marginals(m)
    return von_neumann_entropy(ra) + von_neumann_entropy(rb) - von_neumann_entropy(m)


# ---------------------------------------------------------------- negativity


def negativity(s) -> float:
    """(||rho^T_A||_1 - 1) / 2."""
    pt = partial_transpose(_mat(s), [0], 2)
    return _clamp((trace_norm(pt) - 1.0) / 2.0, 0.0, 0.5)


def negativity_spectral(s) -> float:
    """Negativity from the smallest eigenvalue of the partial transpose.

    For two qubits rho^T_A has at most one negative eigenvalue, so this is an
    independent route to the same number.
    """
    pt = partial_transpose(_mat(s), [0], 2)
    lo = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))[0]
    return _clamp(max(0.0, -lo), 0.0, 0.5)


def x_part(m) -> np.ndarray:
    """Keep only diagonal and anti-diagonal entries: (rho + ZZ rho ZZ) / 2, again a state."""
    m = np.array(_mat(m), dtype=complex)
    mask = np.zeros((4, 4), bool)
    mask[np.arange(4), np.arange(4)] = True
    mask[np.arange(4), 3 - np.arange(4)] = True
    return np.where(mask, m, 0.0)


def negativity_x(s) -> float:
    """Closed form for X-states: minus the smaller eigenvalue of each 2x2 block of rho^T_A."""
    m = _mat(s)
    r = np.real(np.diag(m))
    lows = [
        0.5 * (r[0] + r[3]) - math.hypot(0.5 * (r[0] - r[3]), abs(m[1, 2])),
        0.5 * (r[1] + r[2]) - math.hypot(0.5 * (r[1] - r[2]), abs(m[0, 3])),
    ]
    return _clamp(max(0.0, -min(lows)), 0.0, 0.5)


def _schmidt(psi) -> np.ndarray:
    return np.linalg.svd(np.asarray(psi, dtype=complex).reshape(2, 2), compute_uv=False)


def negativity_pure(psi) -> float:
    """Pure states: product of the two Schmidt coefficients."""
    a, b = _schmidt(psi)
    return float(a * b)


def negativity_closed_raw(d: DoubletCoefficients, which: str) -> float:
    g1, g2, g3, g4, g5 = d.as_array()[:5]
    if _which(which) == "rho12":
        root = (
            9 * g1**4 + 6 * g1**2 * g2**2 + 4 * g1**2 * g3**2 - 18 * g1**2 * g4**2
            - 6 * g1**2 * g5**2 + 24 * g1 * g2 * g3 * g4 + g2**4 + 30 * g2**2 * g4**2
            - 2 * g2**2 * g5**2 + 9 * g4**4 + 6 * g4**2 * g5**2 + g5**4
        )
        return math.sqrt(max(root, 0.0)) / 2 - (g2**2 + 3 * g4**2 + g5**2 + 3 * g1**2) / 2
    root = (
        8 * g1**4 + 4 * g1**2 * g3**2 + 16 * g1**2 * g4**2 - 4 * g1**2 * g5**2 + 8 * g2**4
        - 4 * g2**2 * g3**2 + 16 * g2**2 * g4**2 + 4 * g2**2 * g5**2 + g3**4
        - 2 * g3**2 * g5**2 + 16 * g4**4 + g5**4
    )
    return math.sqrt(max(root, 0.0)) / 2 - (g1**2 + g2**2 + g3**2 / 2 + g4**2 + g5**2 / 2)


def negativity_closed(d: DoubletCoefficients, which: str) -> float:
    """Closed-form negativity; a negative raw value means separable and is clamped to 0."""
    return max(0.0, negativity_closed_raw(d, which))


# ---------------------------------------------------------------- concurrence


def _spin_flip(m: np.ndarray) -> np.ndarray:
    return _YY @ m.conj() @ _YY


def concurrence_eigvals(s) -> float:
    """Wootters concurrence from the eigenvalues of rho (sigma_y sigma_y) rho* (sigma_y sigma_y).

    Loses accuracy (about sqrt(eps)) when a lambda_i is near zero; kept as an oracle.
    """
    m = _mat(s)
    ev = np.linalg.eigvals(m @ _spin_flip(m))
    lam = np.sort(np.sqrt(np.clip(ev.real, 0.0, None)))[::-1]
    return _clamp(max(0.0, lam[0] - lam[1:].sum()), 0.0, 1.0)


def _sqrtm_psd(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def concurrence(s) -> float:
    """Wootters concurrence.

    The lambda_i are taken as singular values of sqrt(rho) sqrt(rho~) rather
    than square roots of eigenvalues of rho rho~, which keeps full precision
    when one of them is close to zero.
    """
    m = _mat(s)
    ev = np.linalg.eigvals(m @ _spin_flip(m))
    if np.min(ev.real) < -1e-10:
        raise ValueError(f"spin-flipped product has eigenvalue {np.min(ev.real):.3e} < 0")
    lam = np.linalg.svd(_sqrtm_psd(m) @ _sqrtm_psd(_spin_flip(m)), compute_uv=False)
    return _clamp(max(0.0, lam[0] - lam[1:].sum()), 0.0, 1.0)


def concurrence_pure(psi) -> float:
    """Pure states: |<psi| sigma_y sigma_y |psi*>|."""
    psi = np.asarray(psi, dtype=complex).reshape(4)
    return float(abs(psi @ _YY @ psi))


def concurrence_x(s) -> float:
    """Closed form for X-states: 2 max(0, |r14| - sqrt(r22 r33), |r23| - sqrt(r11 r44))."""
    m = _mat(s)
    r = np.real(np.diag(m)).clip(0.0)
    c = 2 * max(
        0.0,
        abs(m[0, 3]) - math.sqrt(r[1] * r[2]),
        abs(m[1, 2]) - math.sqrt(r[0] * r[3]),
    )
    return _clamp(c, 0.0, 1.0)


# ---------------------------------------------------------------- discord


@dataclass(frozen=True)
class MeasurementBasis:
    """Rank-1 projective qubit measurement along the Bloch direction (theta, phi)."""

    theta: float
    phi: float

    def direction(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        ns = np.einsum("i,ijk->jk", self.direction(), _SIGMA)
        eye = np.eye(2)
        return 0.5 * (eye + ns), 0.5 * (eye - ns)


@dataclass(frozen=True)
class DiscordSettings:
    grid_theta: int = 64
    grid_phi: int = 64
    refine: bool = True
    ftol: float = 1e-10
    xtol: float = 1e-8


@dataclass(frozen=True)
class DiscordResult:
    value: float
    grid_value: float
    basis: MeasurementBasis
    degraded: bool = False


def _directions(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def _conditional_entropy(m: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """S(A | {Pi_n^B}) for each measurement direction n (shape (..., 3))."""
    t = m.reshape(2, 2, 2, 2)
    rho_a = np.einsum("ajbj->ab", t)
    # M_j = Tr_B[(I x sigma_j) rho]; the post-measurement A blocks are (rho_A +- n.M) / 2
    mj = np.einsum("jkl,albk->jab", _SIGMA, t)
    da = directions @ mj[:, 0, 0].real
    db = directions @ mj[:, 1, 1].real
    dc = directions @ mj[:, 0, 1]
    out = 0.0
    for sign in (1.0, -1.0):
        a = 0.5 * (rho_a[0, 0].real + sign * da)
        b = 0.5 * (rho_a[1, 1].real + sign * db)
        c = np.abs(0.5 * (rho_a[0, 1] + sign * dc))
        mean = 0.5 * (a + b)
        rad = np.hypot(0.5 * (a - b), c)
        lam = np.stack([mean - rad, mean + rad], axis=-1)
        out = out + _shannon_bits(lam) - _shannon_bits((a + b)[..., None])
    return out


def _h2(x: float) -> float:
    return -x * math.log2(x) if x > 0 else 0.0


def _conditional_entropy_scalar(m: np.ndarray):
    """Scalar version of ``_conditional_entropy`` for the local optimizer (plain floats)."""
    t = m.reshape(2, 2, 2, 2)
    ra = np.einsum("ajbj->ab", t)
    mj = np.einsum("jkl,albk->jab", _SIGMA, t)
    a0, b0, c0 = ra[0, 0].real, ra[1, 1].real, complex(ra[0, 1])
    am = [x.real for x in mj[:, 0, 0]]
    bm = [x.real for x in mj[:, 1, 1]]
    cm = [complex(x) for x in mj[:, 0, 1]]

    def f(x) -> float:
        st = math.sin(x[0])
        n = (st * math.cos(x[1]), st * math.sin(x[1]), math.cos(x[0]))
        da = sum(ni * v for ni, v in zip(n, am))
        db = sum(ni * v for ni, v in zip(n, bm))
        dc = sum(ni * v for ni, v in zip(n, cm))
        out = 0.0
        for sign in (1.0, -1.0):
            a = 0.5 * (a0 + sign * da)
            b = 0.5 * (b0 + sign * db)
            c = abs(0.5 * (c0 + sign * dc))
            mean = 0.5 * (a + b)
            rad = math.hypot(0.5 * (a - b), c)
            p = a + b
            out += _h2(mean - rad) + _h2(mean + rad) - _h2(p)
        return out

    return f


def discord_objective_grid(s, n_theta: int, n_phi: int):
    """Conditional entropy on a (theta, phi) grid over the upper Bloch hemisphere.

    n and -n give the same measurement, so theta in [0, pi/2] covers every basis.
    """
    th = np.linspace(0.0, 0.5 * np.pi, n_theta)
    ph = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    return tt, pp, _conditional_entropy(_mat(s), _directions(tt, pp))


def discord_search(s, settings: DiscordSettings | None = None) -> DiscordResult:
    settings = settings or DiscordSettings()
    m = _mat(s)
    ra, rb = marginals(m)
    base = von_neumann_entropy(rb) - von_neumann_entropy(m)
    tt, pp, f = discord_objective_grid(m, settings.grid_theta, settings.grid_phi)
    i = np.unravel_index(np.argmin(f), f.shape)
    best, th, ph = float(f[i]), float(tt[i]), float(pp[i])
    grid_best = best
    degraded = False
    if settings.refine:

        obj = _conditional_entropy_scalar(m)

        res = minimize(
            obj, x0=[th, ph], method="Nelder-Mead",
            options={"xatol": settings.xtol, "fatol": settings.ftol, "maxiter": 4000},
        )
        degraded = not res.success
        if res.fun < best:
            best, th, ph = float(res.fun), float(res.x[0]), float(res.x[1])
    value = _clamp(base + best, 0.0)
    return DiscordResult(value, _clamp(base + grid_best, 0.0), MeasurementBasis(th, ph), degraded)


def quantum_discord(s, settings: DiscordSettings | None = None) -> float:
    """I(rho) - J(rho) with projective measurements on qubit B."""
    return discord_search(s, settings).value


# ---------------------------------------------------------------- MID


def _eigenbasis(r: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (r + r.conj().T))
    if abs(w[1] - w[0]) < CLAMP:
        return np.eye(2, dtype=complex)
    return v


def dephase(m: np.ndarray, basis_a: np.ndarray, basis_b: np.ndarray) -> np.ndarray:
    u = np.kron(basis_a, basis_b)
    diag = np.real(np.diag(u.conj().T @ m @ u))
    return (u * diag) @ u.conj().T


def mid(s) -> float:
    """Measurement-induced disturbance in the marginal eigenbases (sigma^z basis if degenerate)."""
    m = _mat(s)
    ra, rb = marginals(m)
    classical = dephase(m, _eigenbasis(ra), _eigenbasis(rb))
    return _clamp(mutual_information(m) - mutual_information(classical), 0.0)


# ---------------------------------------------------------------- MIN


def _disturbance(m: np.ndarray, directions: np.ndarray, norm: str) -> np.ndarray:
    """Norm of rho - Pi_n^A(rho) for a stack of directions n (shape (..., 3)).

    Pi_n^A(rho) = (rho + N rho N) / 2 with N = (n . sigma) x I.
    """
    ns = np.einsum("...i,ijk->...jk", directions, _SIGMA)
    big = np.einsum("...ab,cd->...acbd", ns, np.eye(2)).reshape(ns.shape[:-2] + (4, 4))
    diff = 0.5 * (m - big @ m @ big)
    w = np.linalg.eigvalsh(diff)
    if norm == "trace":
        return np.abs(w).sum(axis=-1)
    return (w * w).sum(axis=-1)


def _sphere_search(m: np.ndarray, norm: str, sign: float, n_grid: int, xtol: float, ftol: float):
    """Optimize sign * disturbance over the Bloch hemisphere: grid, then Nelder-Mead."""
    th = np.linspace(0.0, 0.5 * np.pi, n_grid)
    ph = np.linspace(0.0, 2 * np.pi, 2 * n_grid, endpoint=False)
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    f = sign * _disturbance(m, _directions(tt, pp), norm)
    i = np.unravel_index(np.argmin(f), f.shape)
    res = minimize(
        lambda x: sign * float(_disturbance(m, _directions(x[0], x[1]), norm)),
        x0=[tt[i], pp[i]], method="Nelder-Mead", options={"xatol": xtol, "fatol": ftol},
    )
    return sign * min(float(f[i]), float(res.fun))


def _min_search(m: np.ndarray, norm: str, n_grid: int = 32) -> float:
    ra, _ = marginals(m)
    w, v = np.linalg.eigh(0.5 * (ra + ra.conj().T))
    if w[1] - w[0] > DEGENERATE_MARGINAL:
        # only the eigenbasis of rho_A leaves rho_A invariant
        vec = v[:, 1]
        n = np.real([vec.conj() @ sig @ vec for sig in _SIGMA])
        return float(_disturbance(m, n, norm))
    return _sphere_search(m, norm, -1.0, n_grid, 1e-9, 1e-13)


def min_nonlocality(s) -> float:
    """Trace-norm measurement-induced nonlocality, maximized over admissible bases on A."""
    return _clamp(_min_search(_mat(s), "trace"), 0.0)


def min_nonlocality_hs(s) -> float:
    """Hilbert-Schmidt (squared norm) variant, for comparison with the trace-norm value."""
    return _clamp(_min_search(_mat(s), "hs"), 0.0)


def min_nonlocality_closed(d: DoubletCoefficients, which: str) -> float:
    cv = closed_correlations(d)
    if _which(which) == "rho12":
        return max(abs(cv.t1), abs(cv.t2), abs(cv.t3))
    return (abs(cv.l1 - cv.l2) + abs(cv.l1 + cv.l2)) / 2


# ---------------------------------------------------------------- geometric discord


def gqd(s) -> float:
    """Hilbert-Schmidt geometric discord with A measured: (|x|^2 + |T|^2 - k_max) / 4."""
    a, _, t = pauli_correlations(s if isinstance(s, TwoQubitState) else TwoQubitState.from_array(_mat(s)))
    k = np.outer(a, a) + t @ t.T
    kmax = np.linalg.eigvalsh(k)[-1]
    return _clamp((a @ a + np.sum(t * t) - kmax) / 4.0, 0.0)


def gqd_search(s, n_grid: int = 48) -> float:
    """min over bases on A of ||rho - Pi^A(rho)||_HS^2; the dephased state is the closest classical-quantum state."""
    return _clamp(_sphere_search(_mat(s), "hs", 1.0, n_grid, 1e-10, 1e-15), 0.0)


def gqd_closed(d: DoubletCoefficients, which: str) -> float:
    cv = closed_correlations(d)
    if _which(which) == "rho12":
        a, b, c, x = cv.center_corner()
    else:
        a, b, c, x = cv.corner_corner()
    sq = (a * a, b * b, c * c + x * x)
    return (sum(sq) - max(sq)) / 4


# ---------------------------------------------------------------- CHSH


def chsh_max(s) -> float:
    """Horodecki maximum 2 sqrt(u1 + u2), u1, u2 the two largest eigenvalues of T^T T."""
    _, _, t = pauli_correlations(s if isinstance(s, TwoQubitState) else TwoQubitState.from_array(_mat(s)))
    u = np.linalg.eigvalsh(t.T @ t)
    return _clamp(2.0 * math.sqrt(max(u[-1] + u[-2], 0.0)), 0.0, 2 * math.sqrt(2))


def chsh_direct(s, starts: int = 8, seed: int = 0) -> float:
    """Maximize Tr(rho B_CHSH) over the four unit vectors a, a', b, b' directly."""
    _, _, t = pauli_correlations(s if isinstance(s, TwoQubitState) else TwoQubitState.from_array(_mat(s)))
    rng = np.random.default_rng(seed)

    def value(x):
        a, a2, b, b2 = (_directions(x[2 * k], x[2 * k + 1]) for k in range(4))
        return a @ t @ (b + b2) + a2 @ t @ (b - b2)

    best = -np.inf
    for _ in range(starts):
        x0 = rng.uniform(0, 2 * np.pi, 8)
        res = minimize(lambda x: -value(x), x0, method="BFGS", options={"gtol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def chsh_closed(d: DoubletCoefficients, which: str) -> float:
    cv = closed_correlations(d)
    if _which(which) == "rho12":
        sq = (cv.t1**2, cv.t2**2, cv.t3**2)
    else:
        sq = (cv.l1**2, cv.l2**2, cv.l3**2)
    return math.sqrt(max(sum(sq) - min(sq), 0.0))


# ---------------------------------------------------------------- panel


@dataclass
class MeasurePanel:
    negativity: float | None = None
    discord: float | None = None
    mid: float | None = None
    min_nonlocality: float | None = None
    gqd: float | None = None
    chsh_max: float | None = None
    concurrence: float | None = None
    provenance: dict[str, str] = field(default_factory=dict)
    discrepancies: list[tuple[str, float, float]] = field(default_factory=list)
    degraded: dict[str, bool] = field(default_factory=dict)

    def value(self, measure_id: str) -> float | None:
        return getattr(self, MEASURE_NAMES[measure_id])

    def check_ranges(self, tol: float = 1e-9) -> list[str]:
        bad = []
        rules = {
            "negativity": (0.0, 0.5),
            "concurrence": (0.0, 1.0),
            "discord": (-tol, None),
            "gqd": (-tol, None),
            "mid": (-tol, None),
            "min_nonlocality": (-tol, None),
            "chsh_max": (0.0, 2 * math.sqrt(2) + tol),
        }
        for name, (lo, hi) in rules.items():
            v = getattr(self, name)
            if v is None:
                continue
            if not math.isfinite(v) or (lo is not None and v < lo) or (hi is not None and v > hi):
                bad.append(f"{name}={v!r}")
        return bad


def _closed_value(measure_id: str, d: DoubletCoefficients, which: str) -> float | None:
    if measure_id == "ne":
        return negativity_closed(d, which)
    if measure_id == "min":
        return min_nonlocality_closed(d, which)
    if measure_id == "gqd":
        return gqd_closed(d, which)
    if measure_id == "chsh":
        return CHSH_CONVENTION * chsh_closed(d, which)
    return None


def panel(
    s,
    d: DoubletCoefficients | None = None,
    which: str | None = None,
    measures=MEASURES,
    discord_settings: DiscordSettings | None = None,
    tol: float = DUAL_PATH_TOL,
) -> MeasurePanel:
    """Evaluate the selected measures; closed forms run alongside when ``d`` and ``which`` are given."""
    out = MeasurePanel()
    x_state = isinstance(s, TwoQubitState) and s.x_structure
    for mid_ in measures:
        name = MEASURE_NAMES[mid_]
        if mid_ == "ne":
            value = negativity(s)
        elif mid_ == "qd":
            res = discord_search(s, discord_settings)
            value = res.value
            out.degraded[name] = res.degraded
        elif mid_ == "mid":
            value = mid(s)
        elif mid_ == "min":
            value = min_nonlocality(s)
        elif mid_ == "gqd":
            value = gqd(s)
        elif mid_ == "chsh":
            value = chsh_max(s)
        elif mid_ == "c":
            value = concurrence(s)
        else:
            raise ValueError(f"unknown measure {mid_!r}")
        closed = None
        if d is not None and which is not None:
            closed = _closed_value(mid_, d, which)
        if closed is None and mid_ == "c" and x_state:
            closed = concurrence_x(s)
        if closed is None:
            out.provenance[name] = GENERIC
        elif abs(closed - value) <= tol:
            out.provenance[name] = BOTH_AGREE
        else:
            out.provenance[name] = GENERIC
            out.discrepancies.append((name, value, closed))
        setattr(out, name, value)
    return out
