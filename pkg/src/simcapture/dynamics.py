"""Defender consensus law, intruder policies and the fixed-step simulator.

Every defender heads along

    d_i = sum_j w_ij (x_j - x_i) + b_i (x_I - x_i)

at its constant speed; the intruder follows a pluggable policy and stops
once the team has closed in on it.

The built-in policies run on a compiled per-row kernel (``_kernel``); custom
policies fall back to a vectorised numpy kernel over arrays of shape
``(B, N, 2)``. Either way rows never interact, so a capture map cell gives
the same result as a standalone simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernel
from .graph_core import CaptureMatrixSet, CommGraph, build_capture_matrices, validate_assumptions

CAPTURE = "capture"
BREACH = "breach"
TIMEOUT = "timeout"

FALLBACK_T_MAX = 200.0
T_MAX_BOUND_FACTOR = 4.0
INTEGRATORS = ("euler", "rk4")


class AssumptionViolation(RuntimeError):
    """Simulation requested on a graph without the capture guarantees."""


class ScheduleError(ValueError):
    """Scripted intruder schedule does not cover the simulated horizon."""


def _vec2(p) -> np.ndarray:
    a = np.array(p, dtype=float).reshape(2)
    a.setflags(write=False)
    return a


# -- intruder policies -------------------------------------------------------------

class IntruderPolicy:
    """Maps the full state to an intruder heading.

    Subclasses implement :meth:`heading`; arrays carry a leading batch axis.
    """

    kind = "custom"

    def heading(self, t: float, defenders: np.ndarray, intruder: np.ndarray, target: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def direction(self, t, defenders, intruder, target) -> np.ndarray:
        th = np.asarray(self.heading(t, defenders, intruder, target), dtype=float)
        th = np.broadcast_to(th, intruder.shape[:-1])
        return np.stack([np.cos(th), np.sin(th)], axis=-1)

    def check_horizon(self, t_max: float) -> None:
        pass

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class DirectPolicy(IntruderPolicy):
    """Head straight for the target."""

    kind = "direct"

    def heading(self, t, defenders, intruder, target):
        rel = np.asarray(target) - np.asarray(intruder)
        # atan2(0, 0) == 0, the convention for an intruder sitting on the target
        return np.arctan2(rel[..., 1], rel[..., 0])

    def direction(self, t, defenders, intruder, target):
        rel = np.asarray(target) - intruder
        n = _norm2(rel)
        ok = n > 0.0
        out = rel / np.where(ok, n, 1.0)[..., None]
        out[~ok] = (1.0, 0.0)
        return out

    def to_dict(self):
        return {"kind": "direct"}


@dataclass(frozen=True)
class ScriptedPolicy(IntruderPolicy):
    """Piecewise-constant heading: ``headings[k]`` on ``[times[k], times[k+1])``.

    The last heading holds until ``end`` (open-ended when ``end`` is None).
    """

    times: tuple
    headings: tuple
    end: float | None = None

    kind = "scripted"

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        heads = tuple(float(h) for h in self.headings)
        if not times or len(times) != len(heads):
            raise ScheduleError("schedule needs matching, non-empty times and headings")
        if times[0] != 0.0:
            raise ScheduleError(f"schedule must start at t=0, starts at {times[0]}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScheduleError("schedule times must be strictly increasing")
        if self.end is not None and float(self.end) <= times[-1]:
            raise ScheduleError("schedule end must follow its last breakpoint")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "headings", heads)
        if self.end is not None:
            object.__setattr__(self, "end", float(self.end))

    def _angle(self, t: float) -> float:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.headings[max(k, 0)]

    def heading(self, t, defenders, intruder, target):
        return np.full(np.shape(intruder)[:-1], self._angle(t))

    def direction(self, t, defenders, intruder, target):
        th = self._angle(t)
        out = np.empty(np.shape(intruder))
        out[..., 0] = math.cos(th)
        out[..., 1] = math.sin(th)
        return out

    def check_horizon(self, t_max):
        if self.end is not None and self.end < t_max:
            raise ScheduleError(f"schedule ends at {self.end} but the horizon is {t_max}")

    def to_dict(self):
        d = {"kind": "scripted", "times": list(self.times), "headings": list(self.headings)}
        if self.end is not None:
            d["end"] = self.end
        return d


# -- state and scenario -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AgentState:
    defender_positions: np.ndarray
    intruder_position: np.ndarray
    time: float = 0.0
    captured_flag: bool = False

    def __post_init__(self):
        x = np.array(self.defender_positions, dtype=float).reshape(-1, 2)
        x.setflags(write=False)
        object.__setattr__(self, "defender_positions", x)
        object.__setattr__(self, "intruder_position", _vec2(self.intruder_position))
        object.__setattr__(self, "time", float(self.time))

    def __eq__(self, other):
        if not isinstance(other, AgentState):
            return NotImplemented
        return (np.array_equal(self.defender_positions, other.defender_positions)
                and np.array_equal(self.intruder_position, other.intruder_position)
                and self.time == other.time and self.captured_flag == other.captured_flag)

    __hash__ = None

    @property
    def xi(self) -> np.ndarray:
        """Defender displacements from the intruder, shape (N, 2)."""
        return self.defender_positions - self.intruder_position


@dataclass(frozen=True)
class Numerics:
    dt: float = 1e-3
    eps_cap: float = 0.05
    eps_target: float = 0.05
    eps_sing: float = 1e-9
    t_max: float | None = None
    integrator: str = "euler"
    sample_stride: int = 10

    def __post_init__(self):
        for name in ("dt", "eps_cap", "eps_target", "eps_sing"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.t_max is not None and not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if int(self.sample_stride) < 1:
            raise ValueError("sample_stride must be >= 1")


@dataclass(frozen=True, eq=False)
class Scenario:
    graph: CommGraph
    defender_speeds: np.ndarray
    intruder_speed: float
    initial_state: AgentState
    intruder_policy: IntruderPolicy = field(default_factory=DirectPolicy)
    target: np.ndarray = (0.0, 0.0)
    numerics: Numerics = field(default_factory=Numerics)

    def __post_init__(self):
        v = np.array(self.defender_speeds, dtype=float).ravel()
        n = self.graph.n_defenders
        if v.shape != (n,):
            raise ValueError(f"expected {n} defender speeds, got {v.size}")
        if not np.all(v > 0):
            raise ValueError(f"defender speeds must be positive, got {v.tolist()}")
        if not self.intruder_speed > 0:
            raise ValueError("intruder speed must be positive")
        if self.initial_state.defender_positions.shape != (n, 2):
            raise ValueError(f"expected {n} defender positions")
        v.setflags(write=False)
        object.__setattr__(self, "defender_speeds", v)
        object.__setattr__(self, "intruder_speed", float(self.intruder_speed))
        object.__setattr__(self, "target", _vec2(self.target))

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.graph == other.graph
                and np.array_equal(self.defender_speeds, other.defender_speeds)
                and self.intruder_speed == other.intruder_speed
                and self.initial_state == other.initial_state
                and self.intruder_policy == other.intruder_policy
                and np.array_equal(self.target, other.target)
                and self.numerics == other.numerics)

    __hash__ = None

    @property
    def n_defenders(self) -> int:
        return self.graph.n_defenders

    def replace(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def with_intruder_at(self, position) -> "Scenario":
        s0 = self.initial_state
        return replace(self, initial_state=AgentState(s0.defender_positions, position, s0.time))

    def with_numerics(self, **changes) -> "Scenario":
        return replace(self, numerics=replace(self.numerics, **changes))


@dataclass(frozen=True)
class Outcome:
    kind: str
    time: float
    step: int

    @property
    def captured(self) -> bool:
        return self.kind == CAPTURE


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    times: np.ndarray
    defender_positions: np.ndarray  # (K, N, 2)
    intruder_positions: np.ndarray  # (K, 2)
    lyapunov: np.ndarray
    outcome: Outcome
    dt: float
    target: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, SimulationTrace):
            return NotImplemented
        return (self.outcome == other.outcome and self.dt == other.dt
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("times", "defender_positions", "intruder_positions", "lyapunov", "target")))

    __hash__ = None

    def __len__(self):
        return len(self.times)

    def state(self, k: int) -> AgentState:
        return AgentState(self.defender_positions[k], self.intruder_positions[k], self.times[k])


# -- the batched kernel -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Model:
    weights: np.ndarray
    sensing: np.ndarray
    speeds: np.ndarray
    intruder_speed: float
    policy: IntruderPolicy
    target: np.ndarray
    eps_cap: float
    eps_sing: float

    @classmethod
    def from_scenario(cls, s: Scenario) -> "_Model":
        nm = s.numerics
        return cls(s.graph.weights, s.graph.sensing, s.defender_speeds, s.intruder_speed,
                   s.intruder_policy, s.target, nm.eps_cap, nm.eps_sing)


def _norm2(v: np.ndarray) -> np.ndarray:
    return np.sqrt(v[..., 0] * v[..., 0] + v[..., 1] * v[..., 1])


def _consensus_direction(model: _Model, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Unnormalised control direction d_i for every defender, shape (B, N, 2)."""
    w, b = model.weights, model.sensing
    d = np.zeros_like(x)
    for j in range(x.shape[1]):
        col = w[:, j]
        if col.any():
            d += col[None, :, None] * (x[:, j:j + 1, :] - x)
    d += b[None, :, None] * (y[:, None, :] - x)
    return d


def _distance_sum(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    dist = _norm2(x - y[:, None, :])
    total = dist[:, 0].copy()
    for i in range(1, dist.shape[1]):
        total += dist[:, i]
    return total


def _velocities(model: _Model, t: float, x: np.ndarray, y: np.ndarray):
    d = _consensus_direction(model, x, y)
    nd = _norm2(d)
    moving = nd > model.eps_sing
    u = d / np.where(moving, nd, 1.0)[..., None]
    u[~moving] = 0.0
    vx = model.speeds[None, :, None] * u
    free = _distance_sum(x, y) > x.shape[1] * model.eps_cap
    h = model.policy.direction(t, x, y, model.target)
    vy = np.where(free[:, None], model.intruder_speed * h, 0.0)
    return vx, vy


def _advance(model: _Model, t: float, x, y, dt: float, integrator: str):
    if integrator == "euler":
        vx, vy = _velocities(model, t, x, y)
        return x + dt * vx, y + dt * vy
    h2 = 0.5 * dt
    k1x, k1y = _velocities(model, t, x, y)
    k2x, k2y = _velocities(model, t + h2, x + h2 * k1x, y + h2 * k1y)
    k3x, k3y = _velocities(model, t + h2, x + h2 * k2x, y + h2 * k2y)
    k4x, k4y = _velocities(model, t + dt, x + dt * k3x, y + dt * k3y)
    return (x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            y + (dt / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y))


def _classify(model: _Model, x, y, eps_target: float):
    dist = _norm2(x - y[:, None, :])
    captured = np.all(dist <= model.eps_cap, axis=1)
    breached = ~captured & (_norm2(y - model.target) <= eps_target)
    return captured, breached


def _event_time(k: int, dt: float) -> float:
    # midpoint of the step on which the condition first held
    return 0.0 if k == 0 else (k - 0.5) * dt


def _lyapunov_batch(w: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return np.einsum("ij,bik,bjk->b", w, xi, xi)


def _compiled_args(scenario: Scenario):
    """Kernel arguments for the built-in policies, or None for custom ones."""
    pol = scenario.intruder_policy
    if type(pol) is DirectPolicy:
        code, st, sc, ss = _kernel.POLICY_DIRECT, np.zeros(1), np.ones(1), np.zeros(1)
    elif type(pol) is ScriptedPolicy:
        code = _kernel.POLICY_SCRIPTED
        st = np.array(pol.times)
        sc = np.array([math.cos(h) for h in pol.headings])
        ss = np.array([math.sin(h) for h in pol.headings])
    else:
        return None
    nm = scenario.numerics
    g = scenario.graph
    tx, ty = (float(v) for v in scenario.target)
    return dict(
        rk4=nm.integrator == "rk4", w=np.ascontiguousarray(g.weights), b=np.ascontiguousarray(g.sensing),
        speeds=np.ascontiguousarray(scenario.defender_speeds), v_int=scenario.intruder_speed,
        tx=tx, ty=ty, eps_cap=nm.eps_cap, eps_sing=nm.eps_sing,
        policy=code, sched_t=st, sched_c=sc, sched_s=ss,
    )


_KIND_NAMES = {_kernel.KIND_CAPTURE: CAPTURE, _kernel.KIND_BREACH: BREACH, _kernel.KIND_TIMEOUT: TIMEOUT}


def _run_rows_numpy(scenario: Scenario, y: np.ndarray, t_max: float):
    nm = scenario.numerics
    model = _Model.from_scenario(scenario)
    b = y.shape[0]
    x0 = scenario.initial_state.defender_positions
    x = np.broadcast_to(x0, (b,) + x0.shape).copy()
    kinds = np.full(b, TIMEOUT, dtype=object)
    steps = np.zeros(b, dtype=np.int64)
    active = np.arange(b)
    k = 0
    dt = nm.dt
    while active.size:
        captured, breached = _classify(model, x, y, nm.eps_target)
        done = captured | breached
        if done.any():
            kinds[active[captured]] = CAPTURE
            kinds[active[breached]] = BREACH
            steps[active[done]] = k
            keep = ~done
            active, x, y = active[keep], x[keep], y[keep]
            if not active.size:
                break
        if k * dt >= t_max:
            steps[active] = k
            break
        x, y = _advance(model, k * dt, x, y, dt, nm.integrator)
        k += 1
    return kinds, steps


def run_batch(scenario: Scenario, intruder_starts, *, t_max: float | None = None):
    """Simulate many intruder start positions against the same defender team.

    Returns ``(kinds, times)``: an object array of outcome kinds and the
    event times. Rows never interact, so results do not depend on the order
    or grouping of ``intruder_starts``.
    """
    nm = scenario.numerics
    if t_max is None:
        t_max = nm.t_max if nm.t_max is not None else FALLBACK_T_MAX
    t_max = float(t_max)
    scenario.intruder_policy.check_horizon(t_max)
    y = np.array(intruder_starts, dtype=float).reshape(-1, 2)
    args = _compiled_args(scenario)
    if args is None:
        kinds, steps = _run_rows_numpy(scenario, y, t_max)
    else:
        codes = np.empty(y.shape[0], dtype=np.int64)
        steps = np.empty(y.shape[0], dtype=np.int64)
        x0 = np.ascontiguousarray(scenario.initial_state.defender_positions, dtype=float)
        _kernel.run_rows(x0, y, nm.dt, t_max, eps_target=nm.eps_target, kinds=codes, steps=steps, **args)
        kinds = np.array([_KIND_NAMES[c] for c in codes], dtype=object)
    times = np.array([t_max if kd == TIMEOUT else _event_time(int(k), nm.dt) for kd, k in zip(kinds, steps)])
    return kinds, times


# -- public operations ---------------------------------------------------------------

def _row(state: AgentState):
    return state.defender_positions[None].copy(), state.intruder_position[None].copy()


def defender_velocity(i: int, state: AgentState, cm: CaptureMatrixSet, v_i: float,
                      eps_sing: float = Numerics.eps_sing) -> np.ndarray:
    """Velocity of defender ``i`` (1-based) under the consensus law."""
    n = cm.n
    if not 1 <= i <= n:
        raise IndexError(f"defender index {i} outside 1..{n}")
    w = np.diag(np.diag(cm.w_comm)) - cm.w_comm
    model = _Model(w, np.diag(cm.w_sense), np.ones(n), 0.0, DirectPolicy(), np.zeros(2), 0.0, eps_sing)
    x, y = _row(state)
    d = _consensus_direction(model, x, y)[0, i - 1]
    nd = math.hypot(d[0], d[1])
    if nd <= eps_sing:
        return np.zeros(2)
    return v_i * d / nd


def intruder_heading(state: AgentState, policy: IntruderPolicy, target=(0.0, 0.0)) -> float:
    x, y = _row(state)
    return float(np.asarray(policy.heading(state.time, x, y, _vec2(target))).reshape(-1)[0])


def intruder_velocity(state: AgentState, heading: float, v: float, eps_cap: float = Numerics.eps_cap) -> np.ndarray:
    n = state.defender_positions.shape[0]
    x, y = _row(state)
    if _distance_sum(x, y)[0] <= n * eps_cap:
        return np.zeros(2)
    return v * np.array([math.cos(heading), math.sin(heading)])


def lyapunov_value(state: AgentState, cm: CaptureMatrixSet) -> float:
    """Quadratic form sum_ij W_ij <xi_i, xi_j> of the consensus errors."""
    return float(_lyapunov_batch(cm.w_full, state.xi[None])[0])


def step(state: AgentState, scenario: Scenario, cm: CaptureMatrixSet | None = None) -> AgentState:
    """Advance every agent by one fixed step of the configured integrator."""
    nm = scenario.numerics
    args = _compiled_args(scenario)
    if args is None:
        x, y = _row(state)
        x, y = _advance(_Model.from_scenario(scenario), state.time, x, y, nm.dt, nm.integrator)
        x, y = x[0], y[0]
    else:
        x = np.array(state.defender_positions)
        y = np.array(state.intruder_position)
        scratch = {k: np.empty(x.shape) for k in ("k1", "k2", "k3", "k4", "tmp")}
        _kernel.advance(x, y, state.time, nm.dt, **scratch, **args)
    n = x.shape[0]
    flag = bool(_distance_sum(x[None], y[None])[0] <= n * nm.eps_cap)
    return AgentState(x, y, state.time + nm.dt, flag)


def resolve_t_max(scenario: Scenario, cm: CaptureMatrixSet | None = None) -> float:
    """Configured horizon, else 4x the capture-time bound when finite, else 200."""
    if scenario.numerics.t_max is not None:
        return float(scenario.numerics.t_max)
    from .analysis import capture_time_bound

    cm = build_capture_matrices(scenario.graph) if cm is None else cm
    bound = capture_time_bound(scenario, cm).t_star_bound
    if math.isfinite(bound) and bound > 0:
        return T_MAX_BOUND_FACTOR * bound
    return FALLBACK_T_MAX


def simulate(scenario: Scenario, cm: CaptureMatrixSet | None = None, *,
             check_assumptions: bool = True) -> SimulationTrace:
    """Run one engagement until simultaneous capture, breach or the horizon."""
    if check_assumptions:
        rep = validate_assumptions(scenario.graph)
        if not rep.ok:
            raise AssumptionViolation("; ".join(rep.messages))
    cm = build_capture_matrices(scenario.graph) if cm is None else cm
    nm = scenario.numerics
    t_max = resolve_t_max(scenario, cm)
    scenario.intruder_policy.check_horizon(t_max)
    stride = int(nm.sample_stride)
    dt = nm.dt
    t0 = scenario.initial_state.time
    args = _compiled_args(scenario)
    if args is None:
        ts, xs, ys, kind, k = _trace_numpy(scenario, t_max, stride)
    else:
        cap = int(math.ceil(t_max / dt)) // stride + 3
        n = scenario.n_defenders
        ts, xs, ys = np.empty(cap), np.empty((cap, n, 2)), np.empty((cap, 2))
        x = np.array(scenario.initial_state.defender_positions)
        y = np.array(scenario.initial_state.intruder_position)
        code, k, nrec = _kernel.run_row(x, y, t0, dt, t_max, eps_target=nm.eps_target, stride=stride,
                                        rec_t=ts, rec_x=xs, rec_y=ys, **args)
        ts, xs, ys, kind = ts[:nrec], xs[:nrec], ys[:nrec], _KIND_NAMES[code]
    when = t0 + (t_max if kind == TIMEOUT else _event_time(k, dt))
    v = _lyapunov_batch(cm.w_full, xs - ys[:, None, :])
    return SimulationTrace(ts, xs, ys, v, Outcome(kind, when, k), dt, scenario.target)


def _trace_numpy(scenario: Scenario, t_max: float, stride: int):
    nm = scenario.numerics
    model = _Model.from_scenario(scenario)
    dt = nm.dt
    x, y = _row(scenario.initial_state)
    t0 = scenario.initial_state.time
    ts, xs, ys = [], [], []
    k = 0
    while True:
        captured, breached = _classify(model, x, y, nm.eps_target)
        t = t0 + k * dt
        if captured[0] or breached[0]:
            kind = CAPTURE if captured[0] else BREACH
            break
        if k * dt >= t_max:
            kind = TIMEOUT
            break
        if k % stride == 0:
            ts.append(t); xs.append(x[0]); ys.append(y[0])
        x, y = _advance(model, t, x, y, dt, nm.integrator)
        k += 1
    ts.append(t); xs.append(x[0]); ys.append(y[0])
    return np.array(ts), np.array(xs), np.array(ys), kind, k
