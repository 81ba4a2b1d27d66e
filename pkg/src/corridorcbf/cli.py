"""Command-line front end: scenario runs, comparisons, sweeps, validation.

Configs are JSON files (printable key-value with nesting); shipped scenarios
can be referenced by bare name (``fig1_parallel``) and resolve from the
package's ``configs/`` directory.  Trajectories are written as CSV with 17
significant digits so parsing an emitted file reproduces the run exactly;
summaries are stable-keyed JSON for machine consumption.

Exit codes: 0 on a completed run, 2 when a safety-relevant event fired (or a
validation check failed), 1 on usage/config errors.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import math
import os
import sys
import time
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import oracle, systems
from .backstepping import InitialConditionError, gain_lower_bound
from .core import ConfigurationError, verify_parallel
from .safety_filter import BRANCH_NAMES
from .sim import (EventKind, ScenarioConfig, SimEvent, Trajectory,
                  build_scenario_artifacts, run_scenario)

WORKERS_ENV = "CORRIDORCBF_WORKERS"

_CONFIG_KEYS = {
    "label", "system", "barrier", "filter", "x0", "nominal", "gains",
    "class_k_coeff", "dt", "horizon", "blowup_threshold", "safety_tol",
    "seed", "gain_margin",
}
_REQUIRED_KEYS = {"system", "barrier", "filter", "x0", "nominal"}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


@dataclasses.dataclass
class RunSummary:
    """Machine-readable digest of one run, written next to its CSV."""

    scenario: str
    event_kind: str
    t_event: float
    event_detail: str
    min_h1: float
    min_hbar1: float
    min_level: float
    max_u_filtered_inf: float
    max_correction_norm: float
    samples: int
    wall_time_s: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _resolve_config_path(path_or_name: str) -> Path:
    p = Path(path_or_name)
    if p.exists():
        return p
    shipped = resources.files("corridorcbf").joinpath(f"configs/{path_or_name}.json")
    if shipped.is_file():
        return Path(str(shipped))
    raise ConfigError(f"config not found: {path_or_name!r} "
                      "(neither a file nor a shipped scenario name)")


def load_config(path_or_name: str) -> ScenarioConfig:
    """Load and validate a scenario config from a file or shipped name."""
    path = _resolve_config_path(path_or_name)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(raw)
    if missing:
        raise ConfigError(f"{path}: missing required keys {sorted(missing)}")
    kwargs = dict(raw)
    kwargs["filter_kind"] = kwargs.pop("filter")
    kwargs.setdefault("label", path.stem)
    kwargs["x0"] = np.asarray(kwargs["x0"], dtype=float)
    try:
        cfg = ScenarioConfig(**kwargs)
        cfg.validate()
    except (ConfigurationError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg


def _apply_overrides(cfg: ScenarioConfig, seed=None, dt=None, horizon=None) -> None:
    if seed is not None:
        cfg.seed = int(seed)
    if dt is not None:
        cfg.dt = float(dt)
    if horizon is not None:
        cfg.horizon = float(horizon)
    try:
        cfg.validate()
    except ConfigurationError as exc:
        raise ConfigError(str(exc)) from exc


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _branch_name(code: int) -> str:
    return "Unfiltered" if code < 0 else BRANCH_NAMES[code]


def trajectory_columns(traj: Trajectory) -> list:
    cols = ["t"]
    cols += list(traj.state_names)
    cols += [f"u0_{name}" for name in traj.input_names]
    cols += [f"ustar_{name}" for name in traj.input_names]
    cols += [f"h_{i + 1}" for i in range(traj.n_levels)]
    cols += [f"hbar_{i + 1}" for i in range(traj.n_levels)]
    cols += ["slab_lower", "slab_upper", "active_branch"]
    return cols


def write_trajectory_csv(traj: Trajectory, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trajectory_columns(traj))
        for k in range(len(traj)):
            row = [_fmt(traj.t[k])]
            row += [_fmt(v) for v in traj.states[k]]
            row += [_fmt(v) for v in traj.u_nominal[k]]
            row += [_fmt(v) for v in traj.u_filtered[k]]
            row += [_fmt(v) for v in traj.h_levels[k]]
            row += [_fmt(v) for v in traj.hbar_levels[k]]
            row += [_fmt(traj.slab_lower[k]), _fmt(traj.slab_upper[k])]
            row.append(_branch_name(int(traj.active[k])))
            writer.writerow(row)


def read_trajectory_csv(path) -> Trajectory:
    """Parse a trajectory CSV back into arrays (inverse of the writer)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    first_u0 = next(i for i, name in enumerate(header) if name.startswith("u0_"))
    state_names = tuple(header[1:first_u0])
    input_names = tuple(name[len("u0_"):] for name in header
                        if name.startswith("u0_"))
    n, m = len(state_names), len(input_names)
    n_lev = sum(1 for name in header if name.startswith("h_"))
    branch_codes = {name: i for i, name in enumerate(BRANCH_NAMES)}
    branch_codes["Unfiltered"] = -1

    data = np.array([[float(v) for v in row[:-1]] for row in rows])
    active = np.array([branch_codes[row[-1]] for row in rows], dtype=np.int8)
    i = 1
    states = data[:, i:i + n]; i += n
    u_nom = data[:, i:i + m]; i += m
    u_fil = data[:, i:i + m]; i += m
    h_lev = data[:, i:i + n_lev]; i += n_lev
    hbar_lev = data[:, i:i + n_lev]; i += n_lev
    return Trajectory(t=data[:, 0], states=states, u_nominal=u_nom,
                      u_filtered=u_fil, h_levels=h_lev, hbar_levels=hbar_lev,
                      slab_lower=data[:, i], slab_upper=data[:, i + 1],
                      active=active, state_names=state_names,
                      input_names=input_names)


def summarize(label: str, traj: Trajectory, event: SimEvent,
              wall_time_s: float) -> RunSummary:
    corrections = np.linalg.norm(traj.u_filtered - traj.u_nominal, axis=1)
    finite = corrections[np.isfinite(corrections)]
    u_abs = np.abs(traj.u_filtered)
    u_abs = u_abs[np.isfinite(u_abs)]
    return RunSummary(
        scenario=label,
        event_kind=event.kind.value,
        t_event=float(event.t_event),
        event_detail=event.detail,
        min_h1=float(np.min(traj.h_levels[:, 0])),
        min_hbar1=float(np.min(traj.hbar_levels[:, 0])),
        min_level=float(min(np.min(traj.h_levels), np.min(traj.hbar_levels))),
        max_u_filtered_inf=float(np.max(u_abs)) if u_abs.size else math.nan,
        max_correction_norm=float(np.max(finite)) if finite.size else math.nan,
        samples=len(traj),
        wall_time_s=float(wall_time_s),
    )


def _execute(cfg: ScenarioConfig, out_dir) -> RunSummary:
    t0 = time.perf_counter()
    traj, event = run_scenario(cfg)
    wall = time.perf_counter() - t0
    summary = summarize(cfg.label or "scenario", traj, event, wall)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(traj, out / f"{summary.scenario}_trajectory.csv")
    with open(out / f"{summary.scenario}_summary.json", "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
        fh.write("\n")
    return summary


def cmd_run(config_path, out_dir, seed=None, dt=None, horizon=None) -> int:
    """Run one scenario; write trajectory CSV + summary JSON."""
    try:
        cfg = load_config(config_path)
        _apply_overrides(cfg, seed=seed, dt=dt, horizon=horizon)
        summary = _execute(cfg, out_dir)
    except (ConfigError, ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{summary.scenario}: {summary.event_kind} at t={summary.t_event:.6g} "
          f"(min h1={summary.min_h1:.3e}, min hbar1={summary.min_hbar1:.3e})")
    return 0 if summary.event_kind == EventKind.COMPLETED.value else 2


def cmd_compare(config_a, config_b, out_dir, seed=None, dt=None, horizon=None) -> int:
    """Run two scenarios and write aligned outputs plus a comparison JSON."""
    try:
        cfg_a = load_config(config_a)
        cfg_b = load_config(config_b)
        _apply_overrides(cfg_a, seed=seed, dt=dt, horizon=horizon)
        _apply_overrides(cfg_b, seed=seed, dt=dt, horizon=horizon)
        if cfg_a.label == cfg_b.label:
            cfg_a.label += "_a"
            cfg_b.label += "_b"
        sum_a = _execute(cfg_a, out_dir)
        sum_b = _execute(cfg_b, out_dir)
    except (ConfigError, ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    def blow_up(s: RunSummary):
        return s.t_event if s.event_kind == EventKind.CONTROL_BLOW_UP.value else None

    comparison = {
        "a": sum_a.to_dict(),
        "b": sum_b.to_dict(),
        "events": {"a": sum_a.event_kind, "b": sum_b.event_kind},
        "min_barrier": {"a": min(sum_a.min_h1, sum_a.min_hbar1),
                        "b": min(sum_b.min_h1, sum_b.min_hbar1)},
        "blow_up_times": {"a": blow_up(sum_a), "b": blow_up(sum_b)},
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "comparison.json", "w") as fh:
        json.dump(comparison, fh, indent=2)
        fh.write("\n")
    for s in (sum_a, sum_b):
        print(f"{s.scenario}: {s.event_kind} at t={s.t_event:.6g}")
    completed = EventKind.COMPLETED.value
    return 0 if (sum_a.event_kind == completed and sum_b.event_kind == completed) else 2


def _set_by_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for key in keys[:-1]:
        if key not in d or not isinstance(d[key], dict):
            raise ConfigError(f"sweep parameter path {dotted!r} not found in config")
        d = d[key]
    if keys[-1] not in d and keys[-1] not in _CONFIG_KEYS:
        raise ConfigError(f"sweep parameter path {dotted!r} not found in config")
    d[keys[-1]] = value


def _sweep_one(raw: dict, param: str, value, out_dir: str) -> dict:
    raw = json.loads(json.dumps(raw))  # deep copy
    _set_by_path(raw, param, value)
    safe = str(value).replace(".", "p").replace("-", "m")
    raw["label"] = f"{raw.get('label', 'sweep')}_{param.replace('.', '_')}_{safe}"
    tmp = Path(out_dir) / f"{raw['label']}_config.json"
    tmp.parent.mkdir(parents=True, exist_ok=True)
    tmp.write_text(json.dumps(raw, indent=2) + "\n")
    cfg = load_config(str(tmp))
    summary = _execute(cfg, out_dir)
    return summary.to_dict()


def cmd_sweep(config_path, param: str, values: Sequence, out_dir,
              workers: Optional[int] = None, seed=None, dt=None,
              horizon=None) -> int:
    """Re-run a base scenario over a grid of one parameter."""
    try:
        path = _resolve_config_path(config_path)
        raw = json.loads(path.read_text())
        raw.setdefault("label", path.stem)
        if seed is not None:
            raw["seed"] = int(seed)
        if dt is not None:
            raw["dt"] = float(dt)
        if horizon is not None:
            raw["horizon"] = float(horizon)
        if not values:
            raise ConfigError("sweep needs at least one value")
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    try:
        if workers > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_sweep_one, raw, param, v, str(out_dir))
                           for v in values]
                results = [f.result() for f in futures]
        else:
            results = [_sweep_one(raw, param, v, str(out_dir)) for v in values]
    except (ConfigError, ConfigurationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = Path(out_dir)
    with open(out / "sweep.json", "w") as fh:
        json.dump({"param": param, "values": list(values), "runs": results},
                  fh, indent=2)
        fh.write("\n")
    for r in results:
        print(f"{r['scenario']}: {r['event_kind']} at t={r['t_event']:.6g}")
    completed = EventKind.COMPLETED.value
    return 0 if all(r["event_kind"] == completed for r in results) else 2


def _validation_grid(cfg: ScenarioConfig) -> list:
    """Sample grid spanning the corridor interior, midline included."""
    rng = np.random.default_rng(12345)
    states = []
    if cfg.system == "double_integrator":
        for x1 in np.linspace(-0.99, 0.99, 23):
            for x2 in np.linspace(-2.0, 2.0, 9):
                states.append(np.array([x1, x2]))
    else:
        for x in np.linspace(-2.0 * math.pi, 2.0 * math.pi, 25):
            for w in np.linspace(-0.99, 0.99, 9):
                y = w - math.sin(x)  # sin x + y = w spans the corridor
                states.append(np.array([x, y, 1.0 + 0.1 * rng.random(), 0.3]))
    return states


def cmd_validate(config_path) -> int:
    """Static checks of a scenario's barriers, derivatives, and gains."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    build_error = None
    try:
        art = build_scenario_artifacts(cfg)
    except InitialConditionError as exc:
        # keep the field checks running even when the start is inadmissible
        build_error = str(exc)
        art = build_scenario_artifacts(dataclasses.replace(cfg, filter_kind="none"))
    grid = _validation_grid(cfg)
    rng = np.random.default_rng(cfg.seed)
    checks = []

    pair = art.region_pair
    ok, b_est = verify_parallel(pair.h, pair.hbar_field(), grid, tol=1e-9)
    checks.append(("parallel_sum", ok, f"estimated b = {b_est:.12g}"))

    if cfg.system == "double_integrator":
        _, _, jet = systems.double_integrator()
    else:
        _, jet = systems.sine_corridor()

    fields = [pair.h]
    if art.baseline is not None:
        fields += [art.baseline.h_s, art.baseline.h2_s]
    if art.chain is not None:
        fields.append(art.chain.target_field)
    fd_worst = max(oracle.finite_difference_check(f, grid[::7]) for f in fields)
    jet_worst = max(
        float(np.max(np.abs(jet.lf_gradients[0](x)
                            - oracle.fd_gradient(jet.lf_values[0], x))
                     / (1.0 + np.abs(jet.lf_gradients[0](x)))))
        for x in grid[::7])
    checks.append(("derivative_consistency", fd_worst <= 1e-6 and jet_worst <= 1e-5,
                   f"max relative FD error: fields {fd_worst:.3e}, jet {jet_worst:.3e}"))

    grad_field = art.baseline.h_s if art.baseline is not None else pair.h
    grad_ok = systems.check_gradient_nonzero(grad_field, grid)
    checks.append(("gradient_nonzero", grad_ok,
                   f"{len(grid)} corridor samples, field '{grad_field.label}'"))

    h0 = pair.h(np.asarray(cfg.x0, dtype=float))
    if build_error is not None:
        checks.append(("gain_bound_at_x0", False, build_error))
    else:
        try:
            lfh0 = jet.lf_values[0](np.asarray(cfg.x0, dtype=float))
            bound = gain_lower_bound(h0, lfh0, pair.b)
            c1 = cfg.gains.get("c1")
            admissible = (c1 is None) or (c1 > bound)
            checks.append(("gain_bound_at_x0", admissible,
                           f"bound = {bound:.12g}, configured c1 = {c1}"))
        except InitialConditionError as exc:
            checks.append(("gain_bound_at_x0", False, str(exc)))

    failed = False
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failed = True
    return 2 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="corridorcbf",
        description="Run, compare, sweep, and validate corridor safety-filter scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_overrides(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--horizon", type=float, default=None)

    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("--config", required=True,
                       help="config file path or shipped scenario name")
    p_run.add_argument("--out", default="out", help="output directory")
    add_overrides(p_run)

    p_cmp = sub.add_parser("compare", help="run two scenarios side by side")
    p_cmp.add_argument("config_a")
    p_cmp.add_argument("config_b")
    p_cmp.add_argument("--out", default="out")
    add_overrides(p_cmp)

    p_swp = sub.add_parser("sweep", help="re-run a scenario over a parameter grid")
    p_swp.add_argument("--config", required=True)
    p_swp.add_argument("--param", required=True,
                       help="dotted config path, e.g. gains.c1")
    p_swp.add_argument("--values", required=True,
                       help="comma-separated JSON scalars, e.g. 0.5,1,2")
    p_swp.add_argument("--out", default="out")
    p_swp.add_argument("--workers", type=int, default=None,
                       help=f"parallel workers (default ${WORKERS_ENV} or 1)")
    add_overrides(p_swp)

    p_val = sub.add_parser("validate", help="static checks of a scenario config")
    p_val.add_argument("--config", required=True)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    if args.command == "run":
        return cmd_run(args.config, args.out, seed=args.seed, dt=args.dt,
                       horizon=args.horizon)
    if args.command == "compare":
        return cmd_compare(args.config_a, args.config_b, args.out,
                           seed=args.seed, dt=args.dt, horizon=args.horizon)
    if args.command == "sweep":
        try:
            values = [json.loads(v) for v in args.values.split(",")]
        except json.JSONDecodeError:
            print(f"error: could not parse --values {args.values!r}", file=sys.stderr)
            return 1
        return cmd_sweep(args.config, args.param, values, args.out,
                         workers=args.workers, seed=args.seed, dt=args.dt,
                         horizon=args.horizon)
    if args.command == "validate":
        return cmd_validate(args.config)
    return 1


if __name__ == "__main__":
    sys.exit(main())
