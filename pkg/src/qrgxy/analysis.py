"""Derivatives of measures along the flow, extremum tracking, scaling fits and monogamy.

A measure "along the flow" is Q_k(gamma0): start from (j0, gamma0), renormalize
k times, take the pair state of the resulting doublet and evaluate Q on it.
All derivatives are central differences of fresh flow evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import measures as ms
from .qrg import BLOCK_SITES, DoubletCoefficients, effective_size, flow_coefficients
from .spinlib import DensityMatrix
from .states import pair_state, reduced_state, single_site_states

DEFAULT_FD_STEP = 1e-4
EXTREMUM_XTOL = 1e-6
SCALING_STEPS = (1, 2, 3, 4)
DET_TOL = 1e-12
SAME_STATE_TOL = 1e-13

_GENERIC: dict[str, Callable] = {
    "ne": ms.negativity,
    "mid": ms.mid,
    "min": ms.min_nonlocality,
    "gqd": ms.gqd,
    "chsh": ms.chsh_max,
    "c": ms.concurrence,
}


def measure_function(measure_id: str, settings: ms.DiscordSettings | None = None) -> Callable:
    """Generic (authoritative) evaluator for one measure id."""
    if measure_id == "qd":
        return lambda s: ms.quantum_discord(s, settings)
    try:
        return _GENERIC[measure_id]
    except KeyError:
        raise ValueError(f"unknown measure {measure_id!r}") from None


def measure_along_flow(
    measure_id: str,
    gamma0: float,
    qrg_step: int,
    state: str = "rho12",
    j0: float = 1.0,
    settings: ms.DiscordSettings | None = None,
) -> float:
    d = flow_coefficients(gamma0, qrg_step, j0)
    return float(measure_function(measure_id, settings)(reduced_state(d, state)))


def _values_at(
    measure_ids: Sequence[str], gamma0: float, qrg_step: int, state: str, j0: float, settings
) -> np.ndarray:
    try:
        s = reduced_state(flow_coefficients(gamma0, qrg_step, j0), state)
        return np.array([measure_function(m, settings)(s) for m in measure_ids], dtype=float)
    except (ArithmeticError, ValueError):
        return np.full(len(measure_ids), np.nan)


# ---------------------------------------------------------------- derivatives


@dataclass(frozen=True, eq=False)
class DerivativeCurve:
    gamma_grid: np.ndarray
    values: np.ndarray
    measure_id: str
    qrg_step: int
    fd_step: float
    state: str = "rho12"
    j0: float = 1.0
    relative_step: float | None = None
    singular: np.ndarray | None = None
    richardson_error: np.ndarray | None = None
    settings: ms.DiscordSettings | None = None

    def __post_init__(self):
        g = np.asarray(self.gamma_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape or g.ndim != 1:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if np.any(np.diff(g) <= 0):
            raise ValueError("gamma grid must be strictly increasing")
        sing = np.zeros(g.shape, bool) if self.singular is None else np.asarray(self.singular, bool)
        sing = sing | ~np.isfinite(v)
        object.__setattr__(self, "gamma_grid", g)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "singular", sing)

    def step_at(self, gamma: float) -> float:
        return _fd_step(gamma, self.fd_step, self.relative_step)

    def derivative_at(self, gamma: float) -> float:
        """Central difference at an arbitrary gamma with this curve's stencil rule."""
        h = self.step_at(gamma)
        hi = _values_at([self.measure_id], gamma + h, self.qrg_step, self.state, self.j0, self.settings)
        lo = _values_at([self.measure_id], gamma - h, self.qrg_step, self.state, self.j0, self.settings)
        return float((hi[0] - lo[0]) / (2 * h))


def _fd_step(gamma: float, h: float, relative: float | None) -> float:
    if relative is None or gamma == 0.0:
        return h
    return min(h, relative * abs(gamma))


def derivative_curves(
    measure_ids: Sequence[str],
    qrg_step: int,
    grid,
    h: float = DEFAULT_FD_STEP,
    state: str = "rho12",
    j0: float = 1.0,
    relative_step: float | None = None,
    richardson: bool = False,
    settings: ms.DiscordSettings | None = None,
) -> dict[str, DerivativeCurve]:
    """dQ/dgamma0 for several measures sharing the same stencil evaluations.

    With ``relative_step`` the stencil shrinks to ``min(h, relative_step*|gamma|)``
    so that extrema lying closer to 0 than h are still resolved.
    Points within 2h of 0 are flagged singular in the fixed-step mode.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    grid = np.asarray(grid, dtype=float)
    if grid.size and (grid.min() <= -1 + h or grid.max() >= 1 - h):
        raise ValueError(f"grid must lie strictly inside (-1+h, 1-h) with h={h}")
    n, k = grid.size, len(measure_ids)
    vals = np.empty((k, n))
    rich = np.empty((k, n)) if richardson else None
    for i, g in enumerate(grid):
        hh = _fd_step(g, h, relative_step)
        args = (qrg_step, state, j0, settings)
        d1 = (_values_at(measure_ids, g + hh, *args) - _values_at(measure_ids, g - hh, *args)) / (2 * hh)
        vals[:, i] = d1
        if richardson:
            half = 0.5 * hh
            d2 = (_values_at(measure_ids, g + half, *args) - _values_at(measure_ids, g - half, *args)) / hh
            rich[:, i] = np.abs(d1 - d2)
    if relative_step is None:
        singular = np.abs(grid) < 2 * h
    else:
        singular = grid == 0.0
    return {
        m: DerivativeCurve(
            grid, vals[j], m, qrg_step, h, state, j0, relative_step, singular,
            None if rich is None else rich[j], settings,
        )
        for j, m in enumerate(measure_ids)
    }


def derivative_curve(
    measure_id: str, qrg_step: int, grid, h: float = DEFAULT_FD_STEP, **kwargs
) -> DerivativeCurve:
    return derivative_curves([measure_id], qrg_step, grid, h, **kwargs)[measure_id]


def antisymmetry_error(curve: DerivativeCurve) -> float:
    """max |f(g) + f(-g)| over grid points whose mirror image is also on the grid."""
    g, v = curve.gamma_grid, curve.values
    ok = ~curve.singular
    lookup = {round(x, 12): i for i, x in enumerate(g)}
    worst = 0.0
    for i, x in enumerate(g):
        j = lookup.get(round(-x, 12))
        if j is None or not (ok[i] and ok[j]):
            continue
        worst = max(worst, abs(v[i] + v[j]))
    return worst


# ---------------------------------------------------------------- extrema


@dataclass(frozen=True)
class Extremum:
    gamma_at_max: float
    max_value: float
    gamma_at_min: float
    min_value: float
    bracketed_max: bool = True
    bracketed_min: bool = True

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.gamma_at_max, self.max_value, self.gamma_at_min, self.min_value

    @property
    def magnitude(self) -> float:
        return max(abs(self.max_value), abs(self.min_value))


def _refine(curve: DerivativeCurve, idx: np.ndarray, i: int, sign: float, xtol: float):
    """Golden-section refinement of sign*f around valid index position i."""
    g, v = curve.gamma_grid, curve.values
    a, b, c = g[idx[i - 1]], g[idx[i]], g[idx[i + 1]]
    fb = sign * v[idx[i]]

    def obj(x):
        return -sign * curve.derivative_at(float(x))

    rel = xtol * min(1.0, 0.5 / max(abs(b), 1e-300))
    try:
        res = minimize_scalar(obj, bracket=(a, b, c), method="golden", tol=rel)
    except ValueError:
        return float(b), float(v[idx[i]])
    if not (np.isfinite(res.fun) and a <= res.x <= c) or -res.fun < fb:
        return float(b), float(v[idx[i]])
    return float(res.x), float(sign * -res.fun)


def extremum(curve: DerivativeCurve, refine: bool = True, xtol: float = EXTREMUM_XTOL) -> Extremum:
    """Largest and smallest derivative value, refined off-grid by golden-section search.

    Singular points are skipped. An extremum is unbracketed when it sits at the
    first or last usable point, or next to a skipped one; it is then reported
    at its grid value without refinement.
    """
    idx = np.flatnonzero(~curve.singular)
    if idx.size < 5:
        raise ValueError("extremum needs at least 5 usable grid points")
    v = curve.values[idx]
    out = []
    for sign in (1.0, -1.0):
        i = int(np.argmax(sign * v))
        inner = 0 < i < idx.size - 1 and idx[i + 1] - idx[i - 1] == 2
        if inner and refine:
            x, f = _refine(curve, idx, i, sign, xtol)
        else:
            x, f = float(curve.gamma_grid[idx[i]]), float(v[i])
        out.append((x, f, bool(inner)))
    (xmax, fmax, bmax), (xmin, fmin, bmin) = out
    return Extremum(xmax, fmax, xmin, fmin, bmax, bmin)


def scaling_grid(n_per_side: int = 36, lo: float = 1e-9, hi: float = 0.9) -> np.ndarray:
    """Symmetric grid, log-spaced in |gamma|, dense enough to bracket peaks at any step."""
    pos = np.geomspace(lo, hi, n_per_side)
    return np.concatenate([-pos[::-1], pos])


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True)
class ScalingFit:
    points: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    r_squared: float

    @property
    def theta(self) -> float:
        return self.slope


def scaling_fit(extrema: Sequence[float], sizes: Sequence[float]) -> ScalingFit:
    """Least-squares line through (ln N, ln |extremum|)."""
    if len(extrema) != len(sizes):
        raise ValueError("extrema and sizes differ in length")
    pts = [
        (math.log(n), math.log(abs(e)))
        for e, n in zip(extrema, sizes)
        if e is not None and math.isfinite(e) and e != 0 and n > 0
    ]
    if len(pts) < 3:
        raise ValueError(f"scaling fit needs at least 3 finite points, got {len(pts)}")
    x, y = np.array(pts).T
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return ScalingFit(tuple(pts), float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)))


@dataclass(frozen=True)
class ScalingResult:
    measure_id: str
    state: str
    steps: tuple[int, ...]
    extrema: tuple[Extremum, ...]
    fit: ScalingFit


def scaling_analysis(
    measure_ids: Sequence[str],
    state: str = "rho12",
    steps: Sequence[int] = SCALING_STEPS,
    h: float = DEFAULT_FD_STEP,
    relative_step: float = 1e-3,
    j0: float = 1.0,
    grid=None,
    settings: ms.DiscordSettings | None = None,
) -> dict[str, ScalingResult]:
    """Extremum magnitude per step and the ln-ln fit against N = 5^(step+1)."""
    grid = scaling_grid() if grid is None else np.asarray(grid, dtype=float)
    per_measure: dict[str, list[Extremum]] = {m: [] for m in measure_ids}
    for k in steps:
        curves = derivative_curves(
            measure_ids, k, grid, h, state=state, j0=j0,
            relative_step=relative_step, settings=settings,
        )
        for m in measure_ids:
            per_measure[m].append(extremum(curves[m]))
    sizes = [effective_size(k) for k in steps]
    out = {}
    for m, ext in per_measure.items():
        fit = scaling_fit([e.magnitude for e in ext], sizes)
        out[m] = ScalingResult(m, state, tuple(steps), tuple(ext), fit)
    return out


# ---------------------------------------------------------------- monogamy


@dataclass(frozen=True)
class MonogamyScore:
    delta1: float
    delta2: float
    Delta1: float
    Delta2: float
    gamma: float = float("nan")
    qrg_step: int = 0


def one_site_concurrence(rho: DensityMatrix) -> float:
    """Concurrence of a pure state between one site and the rest: 2*sqrt(det rho_i)."""
    det = float(np.linalg.det(rho.matrix).real)
    if det < -DET_TOL:
        raise ValueError(f"negative one-site determinant {det:.3e}")
    return 2.0 * math.sqrt(max(det, 0.0))


def _pair_values(d: DoubletCoefficients, pairs, fn: Callable) -> list[float]:
    """fn on each pair state; numerically identical states reuse the earlier value."""
    seen: list[tuple[np.ndarray, float]] = []
    out = []
    for i, j in pairs:
        m = pair_state(d, i, j)
        hit = next((v for mm, v in seen if np.max(np.abs(mm - m.matrix)) < SAME_STATE_TOL), None)
        if hit is None:
            hit = float(fn(m))
            seen.append((m.matrix, hit))
        out.append(hit)
    return out


def _others(i: int) -> list[tuple[int, int]]:
    return [(i, j) for j in BLOCK_SITES if j != i]


def monogamy_concurrence(d: DoubletCoefficients) -> tuple[float, float]:
    """(delta1, delta2): C_{i|rest}^2 minus the squared pairwise concurrences, i = 1 and 2."""
    singles = single_site_states(d)
    out = []
    for i in (1, 2):
        whole = one_site_concurrence(singles[i]) ** 2
        pairs = _pair_values(d, _others(i), ms.concurrence)
        out.append(whole - sum(c * c for c in pairs))
    return out[0], out[1]


def monogamy_discord(
    d: DoubletCoefficients, settings: ms.DiscordSettings | None = None
) -> tuple[float, float]:
    """(Delta1, Delta2): S(rho_i)^2 minus squared pairwise discords QD_ij (measuring j)."""
    singles = single_site_states(d)
    out = []
    for i in (1, 2):
        whole = ms.von_neumann_entropy(singles[i].matrix) ** 2
        pairs = _pair_values(d, _others(i), lambda s: ms.quantum_discord(s, settings))
        out.append(whole - sum(q * q for q in pairs))
    return out[0], out[1]


def monogamy_score(
    gamma0: float, qrg_step: int, j0: float = 1.0, settings: ms.DiscordSettings | None = None
) -> MonogamyScore:
    d = flow_coefficients(gamma0, qrg_step, j0)
    d1, d2 = monogamy_concurrence(d)
    a1, a2 = monogamy_discord(d, settings)
    return MonogamyScore(d1, d2, a1, a2, float(gamma0), int(qrg_step))


# ---------------------------------------------------------------- crossings


@dataclass(frozen=True)
class CrossingReport:
    """Grid points where all curves meet, with plateau regions kept apart."""

    meeting_points: tuple[float, ...]
    spread: np.ndarray = field(repr=False)
    tol: float = 0.0


def mutual_crossings(grid, curves: Sequence, tol: float = 1e-9, interior: bool = True) -> CrossingReport:
    """Isolated grid points where every curve takes the same value.

    A point counts when the spread (max - min across curves) is within ``tol``
    there but exceeds ``tol`` at both neighbours; stretches where the curves
    coincide identically (plateaus, e.g. all zero) are not crossings. With
    ``interior`` the first and last grid points are never reported.
    """
    g = np.asarray(grid, dtype=float)
    c = np.asarray(curves, dtype=float)
    spread = c.max(axis=0) - c.min(axis=0)
    scale = 1.0 + np.max(np.abs(c), axis=0)
    close = spread <= tol * scale
    hits = []
    for i in range(g.size):
        if not close[i]:
            continue
        at_edge = i == 0 or i == g.size - 1
        if at_edge:
            if interior:
                continue
            nb = [i + 1] if i == 0 else [i - 1]
        else:
            nb = [i - 1, i + 1]
        if all(not close[j] for j in nb):
            hits.append(float(g[i]))
    return CrossingReport(tuple(hits), spread, tol)


def sign_change_crossings(grid, a, b, tol: float = 1e-10) -> list[float]:
    """Zeros of a - b located by sign change, linearly interpolated between grid points.

    Differences within ``tol`` count as zero and are skipped, so curves that
    coincide over a stretch (up to rounding) do not produce spurious crossings.
    """
    g = np.asarray(grid, dtype=float)
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    live = np.flatnonzero(np.abs(diff) > tol)
    out = []
    for i, j in zip(live[:-1], live[1:]):
        f0, f1 = diff[i], diff[j]
        if f0 * f1 < 0 and j == i + 1:
            out.append(float(g[i] - f0 * (g[j] - g[i]) / (f1 - f0)))
    return out


def grid_resolution(grid) -> float:
    return float(np.max(np.diff(np.asarray(grid, dtype=float))))
