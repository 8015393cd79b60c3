"""Command line entry point: ``simcapture <command> SCENARIO [options]``.

Commands
  simulate      trace CSV + run.json (+ trajectory SVG with --plot)
  bound         capture certificate as JSON on stdout
  capture-map   map CSV, boundary CSV, heatmap SVG
  sweep         per-setting boundary CSV, overlay SVG
  verify        re-check a stored trace against the sqrt(V) rate inequality

Exit status: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .analysis import certify, verify_consensus_rate
from .dynamics import CAPTURE, Outcome, resolve_t_max, simulate
from .experiments import GridSpec, capture_map, extract_boundary, run_sweep
from .graph_core import build_capture_matrices
from .scenario_io import (
    ExperimentConfig,
    ScenarioError,
    boundary_to_csv,
    load_document,
    map_to_csv,
    parse_experiment,
    parse_scenario,
    read_trace_csv,
    scenario_to_document,
    sweep_boundaries_to_csv,
    trace_to_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(Exception):
    pass


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _clean(o):
    """Replace non-finite floats with None so the JSON stays strict."""
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def _dumps(obj) -> str:
    return json.dumps(_clean(json.loads(json.dumps(obj, default=_json_default))), indent=2, allow_nan=False)


def _load(path: str):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"scenario file not found: {p}")
    doc = load_document(p)
    return parse_scenario(doc), parse_experiment(doc)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid(exp: ExperimentConfig, args) -> GridSpec:
    g = exp.grid or GridSpec()
    if args.nx or args.ny:
        g = GridSpec(g.x_range, g.y_range, args.nx or g.nx, args.ny or g.ny, g.t_max)
    return g


def _echo(scenario, exp, t_max=None) -> dict:
    doc = scenario_to_document(scenario, exp)
    if t_max is not None:
        doc["numerics"]["t_max_resolved"] = t_max
    return doc


def _result(args, scenario, exp, started, **extra) -> dict:
    res = {"command": args.command, "version": tool_version(), "scenario_file": str(args.scenario)}
    res.update(extra)
    res["wall_clock_s"] = round(time.perf_counter() - started, 6)
    return res


def cmd_bound(args) -> int:
    scenario, _ = _load(args.scenario)
    cert = certify(scenario)
    print(_dumps(cert.to_dict()))
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    scenario, exp = _load(args.scenario)
    cm = build_capture_matrices(scenario.graph)
    cert = certify(scenario, cm)
    t_max = resolve_t_max(scenario, cm)
    trace = simulate(scenario, cm)
    out = _out_dir(args)
    files = {"trace": str(out / "trace.csv")}
    (out / "trace.csv").write_text(trace_to_csv(trace))
    if args.plot:
        from .plotting import trajectory_svg
        (out / "trajectory.svg").write_text(trajectory_svg(out / "trace.csv", scenario.target))
        files["trajectory_svg"] = str(out / "trajectory.svg")
    rate = verify_consensus_rate(trace, cert)
    res = _result(args, scenario, exp, started, config=_echo(scenario, exp, t_max), certificate=cert.to_dict(),
                  outcome={"kind": trace.outcome.kind, "time": trace.outcome.time, "step": trace.outcome.step},
                  rate_check=rate.__dict__, files=files)
    (out / "run.json").write_text(_dumps(res))
    print(_dumps({"outcome": res["outcome"], "t_star_bound": cert.t_star_bound, "run": str(out / "run.json")}))
    return EXIT_OK


def cmd_capture_map(args) -> int:
    from .plotting import heatmap_svg

    started = time.perf_counter()
    scenario, exp = _load(args.scenario)
    grid = _grid(exp, args)
    cmap = capture_map(scenario, grid, jobs=args.jobs)
    lines = extract_boundary(cmap)
    out = _out_dir(args)
    (out / "map.csv").write_text(map_to_csv(cmap))
    (out / "boundary.csv").write_text(boundary_to_csv(lines))
    (out / "heatmap.svg").write_text(heatmap_svg(out / "map.csv", out / "boundary.csv" if lines else None,
                                                 scenario.target))
    counts = {name: cmap.count(k) for k, name in sorted(_class_names().items())}
    files = {k: str(out / f) for k, f in (("map", "map.csv"), ("boundary", "boundary.csv"), ("heatmap_svg", "heatmap.svg"))}
    res = _result(args, scenario, exp, started,
                  config=_echo(scenario, ExperimentConfig(grid, exp.sweep)), certificate=certify(scenario).to_dict(),
                  counts=counts, n_boundaries=len(lines), errors=cmap.errors, files=files)
    (out / "run.json").write_text(_dumps(res))
    print(_dumps({"counts": counts, "n_boundaries": len(lines), "run": str(out / "run.json")}))
    return EXIT_OK


def _class_names():
    from .experiments import CLASS_NAMES
    return CLASS_NAMES


def cmd_sweep(args) -> int:
    from .plotting import overlay_svg

    started = time.perf_counter()
    scenario, exp = _load(args.scenario)
    try:
        spec = exp.sweep_spec(scenario)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    grid = _grid(exp, args)
    results = run_sweep(spec, grid, jobs=args.jobs)
    out = _out_dir(args)
    (out / "sweep_boundaries.csv").write_text(sweep_boundaries_to_csv(results))
    (out / "sweep_overlay.svg").write_text(overlay_svg(out / "sweep_boundaries.csv", scenario.target,
                                                       title=f"sweep over {spec.parameter}"))
    settings = [{"value": r.setting, "non_capture_cells": None if r.capture_map is None else r.capture_map.breach_cells,
                 "n_boundaries": len(r.boundary), "error": r.error} for r in results]
    res = _result(args, scenario, exp, started, config=_echo(scenario, ExperimentConfig(grid, exp.sweep)),
                  settings=settings, files={"boundaries": str(out / "sweep_boundaries.csv"),
                                            "overlay_svg": str(out / "sweep_overlay.svg")})
    (out / "run.json").write_text(_dumps(res))
    print(_dumps({"settings": settings, "run": str(out / "run.json")}))
    failed = any(r.error for r in results)
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_verify(args) -> int:
    scenario, _ = _load(args.scenario)
    trace_path = Path(args.trace)
    if not trace_path.is_file():
        raise ConfigError(f"trace file not found: {trace_path}")
    run_path = Path(args.run) if args.run else trace_path.with_name("run.json")
    if run_path.is_file():
        o = json.loads(run_path.read_text())["outcome"]
        outcome = Outcome(o["kind"], o["time"], o["step"])
    else:
        # without a run record, a final row inside the capture radius counts as capture
        data = np.loadtxt(trace_path, delimiter=",", skiprows=1, ndmin=2)
        n = (data.shape[1] - 4) // 2
        last = data[-1, 1:-1].reshape(n + 1, 2)
        hit = np.all(np.linalg.norm(last[:n] - last[n], axis=1) <= scenario.numerics.eps_cap)
        outcome = Outcome(CAPTURE if hit else "timeout", float(data[-1, 0]), len(data) - 1)
    trace = read_trace_csv(trace_path, outcome, scenario.numerics.dt, scenario.target)
    cert = certify(scenario)
    rep = verify_consensus_rate(trace, cert, args.tolerance)
    print(_dumps(rep.__dict__))
    if not rep.applicable:
        return EXIT_OK
    return EXIT_OK if rep.passed else EXIT_RUNTIME


def cmd_plot(args) -> int:
    from .plotting import emit_plots

    scenario, _ = _load(args.scenario)
    for p in emit_plots(args.out, scenario.target):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simcapture", description="Simultaneous-capture simulator and certificates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("scenario", help="scenario YAML file")
        sp.set_defaults(func=fn)
        return sp

    add("bound", cmd_bound, "print the capture certificate as JSON")
    sp = add("simulate", cmd_simulate, "simulate one engagement")
    sp.add_argument("--out", default="out", help="output directory (default: out)")
    sp.add_argument("--plot", action="store_true", help="also write trajectory.svg")
    for name, fn, help_ in (("capture-map", cmd_capture_map, "capture time over intruder starts"),
                            ("sweep", cmd_sweep, "boundaries over a parameter sweep")):
        sp = add(name, fn, help_)
        sp.add_argument("--out", default="out")
        sp.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
        sp.add_argument("--nx", type=int, default=None, help="override grid columns")
        sp.add_argument("--ny", type=int, default=None, help="override grid rows")
    sp = add("verify", cmd_verify, "re-check a stored trace")
    sp.add_argument("--trace", required=True, help="trace CSV written by simulate")
    sp.add_argument("--run", default=None, help="run.json with the outcome (default: next to the trace)")
    sp.add_argument("--tolerance", type=float, default=None, help="numerical slack (default: 10 c dt)")
    sp = add("plot", cmd_plot, "render SVGs for the result files in --out")
    sp.add_argument("--out", default="out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) is None:
        args.jobs = os.cpu_count() or 1
    try:
        return args.func(args)
    except (ConfigError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # reported, never a traceback
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
