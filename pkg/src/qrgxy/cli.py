"""Command-line front end: ``qrgxy {flow,measures,derivative,scaling,monogamy,validate}``.

Exit codes: 0 success, 1 dual-path disagreement (validate), 2 configuration
error, 3 flow singularity, 4 too few finite extrema for a scaling fit.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, fields, replace
from functools import partial
from pathlib import Path

import numpy as np

from . import analysis as an
from . import measures as ms
from . import records
from . import sweep
from .qrg import MAX_STEPS, FlowSingularityError, effective_size
from .validation import dual_path_report, write_report

EXIT_OK, EXIT_DISAGREE, EXIT_CONFIG, EXIT_SINGULAR, EXIT_FIT = 0, 1, 2, 3, 4

MEASURE_COLUMNS = {
    "qrg_step": int, "gamma": float, "state": str, "measure": str,
    "value": float, "provenance": str, "wall_time_ms": "float?",
}
DISCREPANCY_COLUMNS = {
    "qrg_step": int, "gamma": float, "state": str, "measure": str,
    "generic": float, "closed_form": float,
}
FLOW_COLUMNS = {
    "gamma0": float, "qrg_step": int, "J": float, "gamma": float,
    **{f"g{i}": float for i in range(1, 11)}, "N": int,
}
DERIVATIVE_COLUMNS = {
    "qrg_step": int, "state": str, "measure": str, "gamma": float, "value": float,
    "fd_step": float, "singular": bool, "richardson_error": "float?",
}
EXTREMA_COLUMNS = {
    "qrg_step": int, "state": str, "measure": str,
    "gamma_at_max": float, "max_value": float, "gamma_at_min": float, "min_value": float,
    "bracketed_max": bool, "bracketed_min": bool,
}
SCALING_FIT_COLUMNS = {
    "state": str, "measure": str, "theta": float, "intercept": float,
    "r_squared": float, "n_points": int,
}
SCALING_POINT_COLUMNS = {
    "state": str, "measure": str, "qrg_step": int, "N": int,
    "ln_N": float, "ln_extremum": float, "gamma_at_extremum": float,
}
MONOGAMY_COLUMNS = {
    "qrg_step": int, "gamma": float, "delta1": float, "delta2": float,
    "Delta1": float, "Delta2": float, "provenance": str,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    j0: float = 1.0
    gamma_min: float = -1.0
    gamma_max: float = 1.0
    grid_points: int = 201
    qrg_steps: int = 4
    fd_step: float = 1e-4
    measures: tuple[str, ...] = ms.MEASURES
    states: tuple[str, ...] = sweep.STATES
    output_dir: str = "out"
    format: str = "csv"
    seed: int = 0
    jobs: int = 0
    timings: bool = False

    def validate(self) -> "RunConfig":
        if not (math.isfinite(self.j0) and self.j0 != 0):
            raise ConfigError("j0 must be finite and nonzero")
        if not (math.isfinite(self.gamma_min) and math.isfinite(self.gamma_max)):
            raise ConfigError("gamma bounds must be finite")
        if not self.gamma_min < self.gamma_max:
            raise ConfigError("gamma_min must be smaller than gamma_max")
        if self.grid_points < 2:
            raise ConfigError("grid needs at least 2 points")
        if not 0 <= self.qrg_steps <= MAX_STEPS:
            raise ConfigError(f"steps must lie in [0, {MAX_STEPS}]")
        if not (math.isfinite(self.fd_step) and 0 < self.fd_step < 0.5):
            raise ConfigError("fd_step must lie in (0, 0.5)")
        bad = [m for m in self.measures if m not in ms.MEASURES]
        if bad or not self.measures:
            raise ConfigError(f"unknown or empty measure list {bad or list(self.measures)}")
        if not self.states or any(s not in sweep.STATES for s in self.states):
            raise ConfigError(f"unknown state selection {self.states}")
        if self.format not in records.FORMATS:
            raise ConfigError(f"format must be one of {records.FORMATS}")
        if self.jobs < 0:
            raise ConfigError("jobs must be non-negative (0 means all available cores)")
        return self

    @property
    def workers(self) -> int:
        return self.jobs or sweep.default_jobs()

    def grid(self) -> np.ndarray:
        return np.linspace(self.gamma_min, self.gamma_max, self.grid_points)

    def path(self, stem: str) -> Path:
        return Path(self.output_dir) / f"{stem}.{self.format}"


# config keys accepted in files and their RunConfig field names
_KEYS = {
    "j0": "j0", "gamma_min": "gamma_min", "gamma_max": "gamma_max",
    "grid": "grid_points", "grid_points": "grid_points",
    "steps": "qrg_steps", "qrg_steps": "qrg_steps", "fd_step": "fd_step",
    "measures": "measures", "state": "states", "format": "format",
    "out": "output_dir", "output_dir": "output_dir",
    "jobs": "jobs", "seed": "seed", "timings": "timings",
}


def _parse_measures(text: str) -> tuple[str, ...]:
    return tuple(m.strip() for m in text.split(",") if m.strip())


def _parse_states(text: str) -> tuple[str, ...]:
    return sweep.STATES if text == "both" else (text,)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _convert(field_name: str, raw: str):
    try:
        if field_name == "measures":
            return _parse_measures(raw)
        if field_name == "states":
            return _parse_states(raw)
        if field_name == "timings":
            return _parse_bool(raw)
        kind = {f.name: f.type for f in fields(RunConfig)}[field_name]
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {field_name}: {raw!r} ({exc})") from None


def read_config_file(path: str | Path) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        out[_KEYS[key]] = _convert(_KEYS[key], raw)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qrgxy", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--j0", type=str)
    common.add_argument("--gamma-min", type=str)
    common.add_argument("--gamma-max", type=str)
    common.add_argument("--grid", type=str, help="number of grid points")
    common.add_argument("--steps", type=str, help="number of QRG steps")
    common.add_argument("--fd-step", type=str)
    common.add_argument("--measures", type=str, help="comma list of " + ",".join(ms.MEASURES))
    common.add_argument("--state", choices=("rho12", "rho23", "both"))
    common.add_argument("--format", choices=records.FORMATS)
    common.add_argument("--out", type=str)
    common.add_argument("--jobs", type=str, help="worker processes (default: available cores)")
    common.add_argument("--seed", type=str)
    common.add_argument("--timings", action="store_true", default=None,
                        help="record wall_time_ms (makes output non-reproducible)")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("flow", "coupling flow and doublet coefficients per step"),
        ("measures", "measure panel for each state, step and grid point"),
        ("derivative", "first derivatives and their extrema"),
        ("scaling", "ln-ln fit of derivative extrema against N"),
        ("monogamy", "monogamy residuals for concurrence and discord"),
        ("validate", "closed-form versus generic agreement report"),
    ]:
        sub.add_parser(name, parents=[common], help=help_)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    values = {}
    if ns.config:
        values.update(read_config_file(ns.config))
    flag_map = {
        "j0": "j0", "gamma_min": "gamma_min", "gamma_max": "gamma_max", "grid": "grid_points",
        "steps": "qrg_steps", "fd_step": "fd_step", "measures": "measures", "state": "states",
        "format": "format", "out": "output_dir", "jobs": "jobs", "seed": "seed",
    }
    for flag, name in flag_map.items():
        raw = getattr(ns, flag)
        if raw is not None:
            values[name] = _convert(name, raw)
    if ns.timings:
        values["timings"] = True
    return replace(RunConfig(), **values).validate()


# ---------------------------------------------------------------- commands


def cmd_flow(cfg: RunConfig) -> int:
    rows = sweep.flow_rows(cfg.grid(), cfg.qrg_steps, cfg.j0, cfg.workers)
    recs = [
        {"gamma0": r.gamma0, "qrg_step": r.qrg_step, "J": r.J, "gamma": r.gamma,
         **{f"g{i + 1}": v for i, v in enumerate(r.g)}, "N": r.N}
        for r in rows
    ]
    path = records.write_table(cfg.path("flow"), list(FLOW_COLUMNS), recs, cfg.format)
    print(f"wrote {len(recs)} rows to {path}")
    return EXIT_OK


def cmd_measures(cfg: RunConfig) -> int:
    rows, bad = sweep.measure_rows(
        cfg.grid(), range(cfg.qrg_steps + 1), cfg.states, cfg.measures, cfg.j0,
        cfg.workers, timings=cfg.timings,
    )
    recs = [
        {"qrg_step": r.qrg_step, "gamma": r.gamma, "state": r.state, "measure": r.measure,
         "value": r.value, "provenance": r.provenance, "wall_time_ms": r.wall_time_ms}
        for r in rows
    ]
    path = records.write_table(cfg.path("measures"), list(MEASURE_COLUMNS), recs, cfg.format)
    disc = [
        {"qrg_step": b.qrg_step, "gamma": b.gamma, "state": b.state, "measure": b.measure,
         "generic": b.generic, "closed_form": b.closed_form}
        for b in bad
    ]
    dpath = records.write_table(
        cfg.path("measures_discrepancies"), list(DISCREPANCY_COLUMNS), disc, cfg.format
    )
    print(f"wrote {len(recs)} rows to {path}; {len(disc)} dual-path discrepancies in {dpath}")
    return EXIT_OK


def _derivative_task(job, grid, cfg: RunConfig):
    step, state = job
    curves = an.derivative_curves(
        cfg.measures, step, grid, cfg.fd_step, state=state, j0=cfg.j0, richardson=True
    )
    out = []
    for m in cfg.measures:
        c = curves[m]
        try:
            ext = an.extremum(c)
        except ValueError:
            ext = None
        out.append((step, state, m, c, ext))
    return out


def cmd_derivative(cfg: RunConfig) -> int:
    h = cfg.fd_step
    grid = cfg.grid()
    grid = grid[(grid > -1 + h) & (grid < 1 - h)]
    if grid.size < 2:
        raise ConfigError("no grid points inside (-1+h, 1-h)")
    jobs = [(k, s) for k in range(cfg.qrg_steps + 1) for s in cfg.states]
    results = sweep.parallel_map(partial(_derivative_task, grid=grid, cfg=cfg), jobs, cfg.workers)
    curve_recs, ext_recs = [], []
    for batch in results:
        for step, state, m, c, ext in batch:
            for i, g in enumerate(c.gamma_grid):
                curve_recs.append({
                    "qrg_step": step, "state": state, "measure": m, "gamma": float(g),
                    "value": float(c.values[i]), "fd_step": c.step_at(float(g)),
                    "singular": bool(c.singular[i]),
                    "richardson_error": float(c.richardson_error[i]),
                })
            if ext is not None:
                ext_recs.append({
                    "qrg_step": step, "state": state, "measure": m,
                    "gamma_at_max": ext.gamma_at_max, "max_value": ext.max_value,
                    "gamma_at_min": ext.gamma_at_min, "min_value": ext.min_value,
                    "bracketed_max": ext.bracketed_max, "bracketed_min": ext.bracketed_min,
                })
    key = lambda r: (r["qrg_step"], r["state"], r["measure"], r.get("gamma", 0.0))
    curve_recs.sort(key=key)
    ext_recs.sort(key=key)
    path = records.write_table(cfg.path("derivative"), list(DERIVATIVE_COLUMNS), curve_recs, cfg.format)
    epath = records.write_table(cfg.path("derivative_extrema"), list(EXTREMA_COLUMNS), ext_recs, cfg.format)
    print(f"wrote {len(curve_recs)} derivative rows to {path} and {len(ext_recs)} extrema to {epath}")
    return EXIT_OK


def _scaling_task(job, steps, cfg: RunConfig):
    state, measure = job
    try:
        res = an.scaling_analysis([measure], state, steps, cfg.fd_step, j0=cfg.j0)[measure]
    except ValueError as exc:
        return state, measure, None, str(exc)
    return state, measure, res, ""


def cmd_scaling(cfg: RunConfig) -> int:
    if cfg.qrg_steps < 3:
        print("insufficient fit data: scaling needs --steps >= 3", file=sys.stderr)
        return EXIT_FIT
    steps = tuple(range(1, cfg.qrg_steps + 1))
    jobs = [(s, m) for s in cfg.states for m in cfg.measures]
    results = sweep.parallel_map(partial(_scaling_task, steps=steps, cfg=cfg), jobs, cfg.workers)
    fit_recs, pt_recs, failed = [], [], []
    for state, measure, res, err in results:
        if res is None:
            failed.append(f"{state}/{measure}: {err}")
            continue
        fit_recs.append({
            "state": state, "measure": measure, "theta": res.fit.slope,
            "intercept": res.fit.intercept, "r_squared": res.fit.r_squared,
            "n_points": len(res.fit.points),
        })
        for k, e in zip(res.steps, res.extrema):
            at = e.gamma_at_max if abs(e.max_value) >= abs(e.min_value) else e.gamma_at_min
            pt_recs.append({
                "state": state, "measure": measure, "qrg_step": k, "N": effective_size(k),
                "ln_N": math.log(effective_size(k)),
                "ln_extremum": math.log(e.magnitude) if e.magnitude > 0 else -math.inf,
                "gamma_at_extremum": at,
            })
    records.write_table(cfg.path("scaling_fit"), list(SCALING_FIT_COLUMNS), fit_recs, cfg.format)
    records.write_table(cfg.path("scaling_points"), list(SCALING_POINT_COLUMNS), pt_recs, cfg.format)
    for r in fit_recs:
        print(f"{r['state']} {r['measure']}: theta={r['theta']:.6f} r2={r['r_squared']:.6f}")
    if failed:
        print("insufficient fit data: " + "; ".join(failed), file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def cmd_monogamy(cfg: RunConfig) -> int:
    rows = sweep.monogamy_rows(cfg.grid(), range(cfg.qrg_steps + 1), cfg.j0, cfg.workers)
    recs = [
        {"qrg_step": r.qrg_step, "gamma": r.gamma, "delta1": r.delta1, "delta2": r.delta2,
         "Delta1": r.Delta1, "Delta2": r.Delta2, "provenance": r.provenance}
        for r in rows
    ]
    path = records.write_table(cfg.path("monogamy"), list(MONOGAMY_COLUMNS), recs, cfg.format)
    print(f"wrote {len(recs)} rows to {path}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    rep = dual_path_report(steps=tuple(range(min(cfg.qrg_steps, 2) + 1)), j0=cfg.j0, seed=cfg.seed)
    for line in rep.lines():
        print(line)
    write_report(rep, Path(cfg.output_dir) / "validate_report.json")
    return EXIT_OK if rep.ok else EXIT_DISAGREE


COMMANDS = {
    "flow": cmd_flow,
    "measures": cmd_measures,
    "derivative": cmd_derivative,
    "scaling": cmd_scaling,
    "monogamy": cmd_monogamy,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        return COMMANDS[ns.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlowSingularityError as exc:
        print(f"flow singularity at gamma={exc.gamma!r}, step={exc.step}: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
