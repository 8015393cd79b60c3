"""Scenario documents (YAML) and result files (CSV / JSON).

A scenario document has the sections ``agents``, ``graph``, ``intruder``
(required) and ``target``, ``numerics``, ``experiment`` (optional)::

    agents:
      defenders:
        - {position: [5, 5], speed: 1.0}
    graph:
      edges: [[1, 2], [1, 3, 0.5]]   # or  matrix: [[...]]  or  complete: true
      sensing: [1, 1, 1, 1]
    intruder:
      position: [-5, 10]
      speed: 0.1
      policy: direct                  # or {kind: scripted, times: [...], headings: [...]}
    target: [0, 0]
    numerics: {dt: 0.001, eps_cap: 0.05, integrator: euler}
    experiment:
      grid: {x_range: [-15, 15], y_range: [-15, 15], nx: 81, ny: 81, t_max: 200}
      sweep: {parameter: defender_speed, index: 4, values: [0.2, 0.4]}

All quantities are dimensionless in one consistent unit system. Defender
indices are 1-based. Unknown keys are rejected.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .dynamics import AgentState, DirectPolicy, Numerics, Scenario, ScheduleError, ScriptedPolicy, SimulationTrace, Outcome
from .experiments import CLASS_NAMES, CaptureMap, GridSpec, SweepSpec
from .graph_core import CommGraph, GraphValidationError, SymmetryError

FLOAT_FMT = "%.12g"


class ScenarioError(ValueError):
    """Invalid scenario document; ``path`` locates the offending entry."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class UnknownKeyError(ScenarioError):
    pass


class MissingSectionError(ScenarioError):
    pass


class MissingKeyError(ScenarioError):
    pass


class AsymmetricWeightsError(ScenarioError):
    def __init__(self, path: str, entry: tuple[int, int], message: str):
        self.entry = entry
        super().__init__(path, message)


class NonPositiveSpeedError(ScenarioError):
    pass


class InvalidValueError(ScenarioError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSpec | None = None
    sweep: dict | None = None  # {parameter, values, index}

    def sweep_spec(self, base: Scenario) -> SweepSpec:
        if not self.sweep:
            raise MissingSectionError("experiment.sweep", "no sweep configured")
        return SweepSpec(base, self.sweep["parameter"], tuple(self.sweep["values"]), self.sweep.get("index"))


# -- helpers -----------------------------------------------------------------------

def _mapping(doc, path: str, allowed: set, required: set = frozenset()) -> dict:
    if not isinstance(doc, dict):
        raise InvalidValueError(path, f"expected a mapping, got {type(doc).__name__}")
    for key in doc:
        if key not in allowed:
            raise UnknownKeyError(f"{path}.{key}" if path else str(key), "unknown key")
    for key in sorted(required):
        if key not in doc:
            raise MissingKeyError(f"{path}.{key}" if path else key, "required key missing")
    return doc


def _number(v, path: str) -> float:
    if isinstance(v, str):
        # YAML 1.1 reads exponent literals without a dot (1e-3) as strings
        try:
            v = float(v)
        except ValueError:
            raise InvalidValueError(path, f"expected a number, got {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidValueError(path, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise InvalidValueError(path, f"expected a finite number, got {v!r}")
    return v


def _point(v, path: str) -> list[float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise InvalidValueError(path, f"expected [x, y], got {v!r}")
    return [_number(c, f"{path}[{i}]") for i, c in enumerate(v)]


def _speed(v, path: str) -> float:
    v = _number(v, path)
    if v <= 0:
        raise NonPositiveSpeedError(path, f"speed must be positive, got {v!r}")
    return v


def load_document(source) -> dict:
    """Read a YAML document from a path, a YAML string, or pass a dict through."""
    if isinstance(source, dict):
        return source
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source
                                           and Path(source).suffix in (".yaml", ".yml")):
        text = Path(source).read_text()
    elif hasattr(source, "read_text"):
        text = source.read_text()
    else:
        text = source
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidValueError("", f"malformed YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidValueError("", "scenario document must be a mapping")
    return doc


# -- parsing -----------------------------------------------------------------------

_SECTIONS = {"agents", "graph", "intruder", "target", "numerics", "experiment"}
_REQUIRED = ("agents", "graph", "intruder")


def _parse_graph(sec, n: int) -> CommGraph:
    sec = _mapping(sec, "graph", {"edges", "matrix", "complete", "sensing"}, {"sensing"})
    given = [k for k in ("edges", "matrix", "complete") if k in sec]
    if len(given) != 1:
        raise InvalidValueError("graph", "give exactly one of edges, matrix, complete")
    sensing = sec["sensing"]
    if not isinstance(sensing, list) or len(sensing) != n:
        raise InvalidValueError("graph.sensing", f"expected a list of {n} flags")
    b = [_number(x, f"graph.sensing[{i}]") for i, x in enumerate(sensing)]
    if any(x not in (0.0, 1.0) for x in b):
        raise InvalidValueError("graph.sensing", f"flags must be 0 or 1, got {sensing}")
    if "matrix" in sec:
        rows = sec["matrix"]
        if not isinstance(rows, list) or len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
            raise InvalidValueError("graph.matrix", f"expected a {n}x{n} matrix")
        w = np.array([[_number(x, f"graph.matrix[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(rows)])
        path = "graph.matrix"
    elif "edges" in sec:
        w = np.zeros((n, n))
        path = "graph.edges"
        for k, e in enumerate(sec["edges"] or []):
            ep = f"graph.edges[{k}]"
            if not isinstance(e, list) or len(e) not in (2, 3):
                raise InvalidValueError(ep, f"expected [i, j] or [i, j, weight], got {e!r}")
            i, j = (int(_number(v, ep)) for v in e[:2])
            if not (1 <= i <= n and 1 <= j <= n) or i == j:
                raise InvalidValueError(ep, f"invalid defender pair ({i}, {j})")
            wt = _number(e[2], ep) if len(e) == 3 else 1.0
            w[i - 1, j - 1] = w[j - 1, i - 1] = wt
    else:
        if sec["complete"] is not True:
            raise InvalidValueError("graph.complete", "must be true when given")
        w = np.ones((n, n)) - np.eye(n)
        path = "graph.complete"
    try:
        return CommGraph(w, np.array(b))
    except SymmetryError as exc:
        raise AsymmetricWeightsError(path, exc.entry, str(exc)) from exc
    except GraphValidationError as exc:
        raise InvalidValueError(path, str(exc)) from exc


def _parse_policy(v):
    if v is None or v == "direct":
        return DirectPolicy()
    if isinstance(v, str):
        raise InvalidValueError("intruder.policy", f"unknown policy {v!r}")
    sec = _mapping(v, "intruder.policy", {"kind", "times", "headings", "end"}, {"kind"})
    if sec["kind"] == "direct":
        if len(sec) > 1:
            raise UnknownKeyError("intruder.policy", "direct policy takes no parameters")
        return DirectPolicy()
    if sec["kind"] != "scripted":
        raise InvalidValueError("intruder.policy.kind", f"unknown policy {sec['kind']!r}")
    _mapping(sec, "intruder.policy", {"kind", "times", "headings", "end"}, {"times", "headings"})
    try:
        return ScriptedPolicy(
            tuple(_number(t, "intruder.policy.times") for t in sec["times"]),
            tuple(_number(h, "intruder.policy.headings") for h in sec["headings"]),
            None if sec.get("end") is None else _number(sec["end"], "intruder.policy.end"),
        )
    except ScheduleError as exc:
        raise InvalidValueError("intruder.policy", str(exc)) from exc


_NUMERIC_KEYS = {f.name for f in fields(Numerics)}


def _parse_numerics(sec) -> Numerics:
    if sec is None:
        return Numerics()
    sec = _mapping(sec, "numerics", _NUMERIC_KEYS)
    kw = {}
    for k, v in sec.items():
        p = f"numerics.{k}"
        if k == "integrator":
            if v not in ("euler", "rk4"):
                raise InvalidValueError(p, f"expected euler or rk4, got {v!r}")
            kw[k] = v
        elif k == "sample_stride":
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise InvalidValueError(p, f"expected a positive integer, got {v!r}")
            kw[k] = v
        elif k == "t_max" and v is None:
            kw[k] = None
        else:
            kw[k] = _number(v, p)
            if kw[k] <= 0:
                raise InvalidValueError(p, f"must be positive, got {v!r}")
    return Numerics(**kw)


def parse_scenario(document) -> Scenario:
    """Validate a scenario document and build the :class:`Scenario`.

    Missing optional sections take their defaults (see :class:`Numerics`).
    """
    doc = _mapping(load_document(document), "", _SECTIONS)
    for s in _REQUIRED:
        if s not in doc:
            raise MissingSectionError(s, "required section missing")
    agents = _mapping(doc["agents"], "agents", {"defenders"}, {"defenders"})
    defs = agents["defenders"]
    if not isinstance(defs, list) or not defs:
        raise InvalidValueError("agents.defenders", "expected a non-empty list of defenders")
    pos, speeds = [], []
    for k, d in enumerate(defs):
        p = f"agents.defenders[{k}]"
        d = _mapping(d, p, {"position", "speed"}, {"position", "speed"})
        pos.append(_point(d["position"], f"{p}.position"))
        speeds.append(_speed(d["speed"], f"{p}.speed"))
    graph = _parse_graph(doc["graph"], len(defs))
    intr = _mapping(doc["intruder"], "intruder", {"position", "speed", "policy"}, {"position", "speed"})
    y0 = _point(intr["position"], "intruder.position")
    v_int = _speed(intr["speed"], "intruder.speed")
    policy = _parse_policy(intr.get("policy"))
    target = _point(doc["target"], "target") if "target" in doc else [0.0, 0.0]
    numerics = _parse_numerics(doc.get("numerics"))
    return Scenario(graph, speeds, v_int, AgentState(pos, y0), policy, target, numerics)


def parse_experiment(document) -> ExperimentConfig:
    doc = load_document(document)
    sec = doc.get("experiment")
    if sec is None:
        return ExperimentConfig()
    sec = _mapping(sec, "experiment", {"grid", "sweep"})
    grid = None
    if sec.get("grid") is not None:
        g = _mapping(sec["grid"], "experiment.grid", {"x_range", "y_range", "nx", "ny", "t_max"})
        kw = {}
        for k in ("x_range", "y_range"):
            if k in g:
                kw[k] = tuple(_point(g[k], f"experiment.grid.{k}"))
        for k in ("nx", "ny"):
            if k in g:
                if isinstance(g[k], bool) or not isinstance(g[k], int):
                    raise InvalidValueError(f"experiment.grid.{k}", "expected an integer")
                kw[k] = g[k]
        if "t_max" in g:
            kw["t_max"] = _number(g["t_max"], "experiment.grid.t_max")
        try:
            grid = GridSpec(**kw)
        except ValueError as exc:
            raise InvalidValueError("experiment.grid", str(exc)) from exc
    sweep = None
    if sec.get("sweep") is not None:
        sweep = dict(_mapping(sec["sweep"], "experiment.sweep", {"parameter", "values", "index"},
                              {"parameter", "values"}))
    return ExperimentConfig(grid, sweep)


# -- echo --------------------------------------------------------------------------

def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def scenario_to_document(scenario: Scenario, experiment: ExperimentConfig | None = None) -> dict:
    """Fully explicit document for ``scenario``; every default is written out."""
    s = scenario
    doc = {
        "agents": {"defenders": [{"position": _floats(p), "speed": float(v)}
                                 for p, v in zip(s.initial_state.defender_positions, s.defender_speeds)]},
        "graph": {"matrix": _floats(s.graph.weights), "sensing": [int(b) for b in s.graph.sensing]},
        "intruder": {"position": _floats(s.initial_state.intruder_position), "speed": s.intruder_speed,
                     "policy": s.intruder_policy.to_dict()},
        "target": _floats(s.target),
        "numerics": asdict(s.numerics),
    }
    if experiment is not None and (experiment.grid or experiment.sweep):
        exp = {}
        if experiment.grid:
            g = experiment.grid
            exp["grid"] = {"x_range": list(g.x_range), "y_range": list(g.y_range),
                           "nx": g.nx, "ny": g.ny, "t_max": g.t_max}
        if experiment.sweep:
            exp["sweep"] = experiment.sweep
        doc["experiment"] = exp
    return doc


def dump_document(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


# -- result files ------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return FLOAT_FMT % v


def trace_to_csv(trace: SimulationTrace) -> str:
    """Columns: t, x1, y1, ..., x{N+1}, y{N+1}, V (the intruder is agent N+1)."""
    n = trace.defender_positions.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"{c}{i}" for i in range(1, n + 2) for c in "xy"] + ["V"])
    for k in range(len(trace)):
        row = [trace.times[k], *trace.defender_positions[k].ravel(), *trace.intruder_positions[k], trace.lyapunov[k]]
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_trace_csv(path, outcome: Outcome, dt: float, target=(0.0, 0.0)) -> SimulationTrace:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = (data.shape[1] - 4) // 2
    pos = data[:, 1:1 + 2 * n].reshape(-1, n, 2)
    intr = data[:, 1 + 2 * n:3 + 2 * n]
    return SimulationTrace(data[:, 0], pos, intr, data[:, -1], outcome, dt, np.asarray(target, dtype=float))


def map_to_csv(cmap: CaptureMap) -> str:
    """Columns: x, y, class, t_star (empty unless the cell ended in capture)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "class", "t_star"])
    t_star = cmap.t_star
    for (i, j), cls in np.ndenumerate(cmap.classes):
        w.writerow([_fmt(cmap.grid.xs[j]), _fmt(cmap.grid.ys[i]), CLASS_NAMES[int(cls)], _fmt(t_star[i, j])])
    return buf.getvalue()


def read_map_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    xs = np.array(sorted({float(r["x"]) for r in rows}))
    ys = np.array(sorted({float(r["y"]) for r in rows}))
    t = np.full((len(ys), len(xs)), np.nan)
    cls = np.empty((len(ys), len(xs)), dtype=object)
    xi = {v: k for k, v in enumerate(xs)}
    yi = {v: k for k, v in enumerate(ys)}
    for r in rows:
        i, j = yi[float(r["y"])], xi[float(r["x"])]
        cls[i, j] = r["class"]
        if r["t_star"]:
            t[i, j] = float(r["t_star"])
    return {"xs": xs, "ys": ys, "classes": cls, "t_star": t}


def boundary_to_csv(lines, setting_label: str | None = None) -> str:
    """Columns: [setting,] contour, vertex, x, y."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["contour", "vertex", "x", "y"]
    w.writerow((["setting"] if setting_label is not None else []) + head)
    _write_boundary_rows(w, lines, setting_label)
    return buf.getvalue()


def _write_boundary_rows(w, lines, setting_label):
    for c, poly in enumerate(lines):
        for k, (x, y) in enumerate(poly):
            row = [c, k, _fmt(x), _fmt(y)]
            w.writerow(([setting_label] if setting_label is not None else []) + row)


def sweep_boundaries_to_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["setting", "contour", "vertex", "x", "y"])
    for r in results:
        _write_boundary_rows(w, r.boundary, setting_label(r.setting))
    return buf.getvalue()


def setting_label(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return " ".join(setting_label(v) for v in value) if not any(isinstance(v, (list, tuple)) for v in value) \
            else ";".join("-".join(str(int(x)) for x in e[:2]) for e in value)
    if isinstance(value, float):
        return FLOAT_FMT % value
    return str(value)


def read_boundary_csv(path) -> dict:
    """Group vertices by ``(setting, contour)``; setting is None for single maps."""
    out: dict = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            key = (r.get("setting"), int(r["contour"]))
            out.setdefault(key, []).append((float(r["x"]), float(r["y"])))
    return {k: np.array(v) for k, v in out.items()}
