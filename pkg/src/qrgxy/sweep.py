"""Grid sweeps over the initial anisotropy, optionally fanned out to worker processes.

Each grid point is an independent task that runs its own flow; results come
back in submission order and are then sorted, so the output does not depend
on the number of workers.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Iterable, Sequence

import numpy as np

from . import measures as ms
from .analysis import monogamy_concurrence, monogamy_discord
from .qrg import CouplingPoint, effective_size, run_flow
from .states import reduced_state

STATES = ("rho12", "rho23")
FLOW_FIELDS = ("gamma0", "qrg_step", "J", "gamma") + tuple(f"g{i}" for i in range(1, 11)) + ("N",)


def default_jobs() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def parallel_map(fn: Callable, items: Sequence, jobs: int | None = None) -> list:
    """Ordered map; ``jobs`` <= 1 runs in-process."""
    items = list(items)
    jobs = default_jobs() if jobs is None else jobs
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


@dataclass(frozen=True)
class ResultRow:
    qrg_step: int
    gamma: float
    state: str
    measure: str
    value: float
    provenance: str
    wall_time_ms: float | None = None

    def sort_key(self):
        return (self.qrg_step, self.state, self.measure, self.gamma)


@dataclass(frozen=True)
class Discrepancy:
    qrg_step: int
    gamma: float
    state: str
    measure: str
    generic: float
    closed_form: float

    def sort_key(self):
        return (self.qrg_step, self.state, self.measure, self.gamma)


@dataclass(frozen=True)
class FlowRow:
    gamma0: float
    qrg_step: int
    J: float
    gamma: float
    g: tuple[float, ...]
    N: int


@dataclass(frozen=True)
class MonogamyRow:
    qrg_step: int
    gamma: float
    delta1: float
    delta2: float
    Delta1: float
    Delta2: float
    provenance: str


def _measure_point(gamma0: float, steps, states, measures, j0, settings, timings):
    trace = run_flow(CouplingPoint(j0, gamma0), max(steps))
    rows, bad = [], []
    for k in steps:
        d = trace[k].coefficients if k < len(trace) else None
        for st in states:
            if d is None:
                rows += [ResultRow(k, gamma0, st, m, math.nan, "truncated") for m in measures]
                continue
            s = reduced_state(d, st)
            for m in measures:
                t0 = time.perf_counter()
                p = ms.panel(s, d, st, (m,), settings)
                elapsed = (time.perf_counter() - t0) * 1e3 if timings else None
                name = ms.MEASURE_NAMES[m]
                prov = p.provenance[name]
                if p.degraded.get(name):
                    prov += ";degraded"
                rows.append(ResultRow(k, gamma0, st, m, float(p.value(m)), prov, elapsed))
                for _, generic, closed in p.discrepancies:
                    bad.append(Discrepancy(k, gamma0, st, m, float(generic), float(closed)))
    return rows, bad


def measure_rows(
    gammas: Iterable[float],
    steps: Sequence[int],
    states: Sequence[str] = STATES,
    measures: Sequence[str] = ms.MEASURES,
    j0: float = 1.0,
    jobs: int | None = 1,
    settings: ms.DiscordSettings | None = None,
    timings: bool = False,
) -> tuple[list[ResultRow], list[Discrepancy]]:
    """One row per (step, gamma, state, measure), sorted by (step, state, measure, gamma)."""
    task = partial(
        _measure_point, steps=tuple(steps), states=tuple(states), measures=tuple(measures),
        j0=j0, settings=settings, timings=timings,
    )
    out = parallel_map(task, [float(g) for g in gammas], jobs)
    rows = sorted((r for rs, _ in out for r in rs), key=ResultRow.sort_key)
    bad = sorted((b for _, bs in out for b in bs), key=Discrepancy.sort_key)
    return rows, bad


def _flow_point(gamma0: float, n_steps: int, j0: float) -> list[FlowRow]:
    trace = run_flow(CouplingPoint(j0, gamma0), n_steps)
    rows = []
    for k in range(n_steps + 1):
        if k < len(trace) and trace[k].coefficients is not None:
            st = trace[k]
            g = tuple(float(x) for x in st.coefficients.as_array())
            rows.append(FlowRow(gamma0, k, st.coupling.J, st.coupling.gamma, g, effective_size(k)))
        else:
            rows.append(FlowRow(gamma0, k, math.nan, math.nan, (math.nan,) * 10, effective_size(k)))
    return rows


def flow_rows(gammas: Iterable[float], n_steps: int, j0: float = 1.0, jobs: int | None = 1) -> list[FlowRow]:
    out = parallel_map(partial(_flow_point, n_steps=n_steps, j0=j0), [float(g) for g in gammas], jobs)
    return sorted((r for rs in out for r in rs), key=lambda r: (r.qrg_step, r.gamma0))


def _monogamy_point(gamma0: float, steps, j0, settings) -> list[MonogamyRow]:
    trace = run_flow(CouplingPoint(j0, gamma0), max(steps))
    rows = []
    for k in steps:
        d = trace[k].coefficients if k < len(trace) else None
        if d is None:
            rows.append(MonogamyRow(k, gamma0, *([math.nan] * 4), "truncated"))
            continue
        d1, d2 = monogamy_concurrence(d)
        a1, a2 = monogamy_discord(d, settings)
        rows.append(MonogamyRow(k, gamma0, d1, d2, a1, a2, "generic"))
    return rows


def monogamy_rows(
    gammas: Iterable[float],
    steps: Sequence[int],
    j0: float = 1.0,
    jobs: int | None = 1,
    settings: ms.DiscordSettings | None = None,
) -> list[MonogamyRow]:
    task = partial(_monogamy_point, steps=tuple(steps), j0=j0, settings=settings)
    out = parallel_map(task, [float(g) for g in gammas], jobs)
    return sorted((r for rs in out for r in rs), key=lambda r: (r.qrg_step, r.gamma))


def to_table(rows: Sequence[ResultRow], step: int, state: str, measure: str) -> tuple[np.ndarray, np.ndarray]:
    """(gamma, value) arrays for one curve."""
    sel = [r for r in rows if r.qrg_step == step and r.state == state and r.measure == measure]
    return np.array([r.gamma for r in sel]), np.array([r.value for r in sel])
