"""Capture certificates: time bound, sufficient conditions, and trace audits."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import CAPTURE, TIMEOUT, Scenario, SimulationTrace, lyapunov_value
from .graph_core import (CaptureMatrixSet, InfeasibleBoundError, build_capture_matrices,
                         lemma1_lower_bound, minimize_gamma)

RATE_SLACK_FACTOR = 10.0


class DegenerateScenarioError(ValueError):
    """The intruder starts on the target, so no pre-breach condition applies."""


@dataclass(frozen=True)
class TimeBound:
    c: float
    v0: float
    t_star_bound: float  # inf when c <= 0

    @property
    def feasible(self) -> bool:
        return self.c > 0


@dataclass(frozen=True)
class Check:
    holds: bool
    slack: float


@dataclass(frozen=True)
class SufficiencyCheck:
    """Pre-breach capture test in its direct and speed-ratio forms."""

    holds: bool
    slack: float
    lhs: float
    ratio_holds: bool
    ratio_slack: float

    @property
    def forms_agree(self) -> bool:
        return self.holds == self.ratio_holds


@dataclass(frozen=True)
class CaptureCertificate:
    c: float
    v0: float
    t_star_bound: float
    lambda_min_w: float
    m: int
    v_min: float
    intruder_speed: float
    sufficient_capture: Check | None
    speed_ratio_ok: Check | None
    lemma_speed_ok: Check | None

    @property
    def feasible(self) -> bool:
        return self.c > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feasible"] = self.feasible
        if not math.isfinite(self.t_star_bound):
            d["t_star_bound"] = None
        return d


def _v0(scenario: Scenario, cm: CaptureMatrixSet) -> float:
    return lyapunov_value(scenario.initial_state, cm)


def _rate_constant(scenario: Scenario, cm: CaptureMatrixSet) -> float:
    v_min = float(np.min(scenario.defender_speeds))
    return v_min * math.sqrt(max(cm.lambda_min_w, 0.0)) - scenario.intruder_speed * math.sqrt(cm.m)


def capture_time_bound(scenario: Scenario, cm: CaptureMatrixSet | None = None) -> TimeBound:
    """sqrt(V(0)) / c, or inf when the rate constant c is not positive."""
    cm = build_capture_matrices(scenario.graph) if cm is None else cm
    c = _rate_constant(scenario, cm)
    v0 = _v0(scenario, cm)
    bound = math.sqrt(v0) / c if c > 0 else math.inf
    return TimeBound(c, v0, bound)


def _target_distance(scenario: Scenario) -> float:
    dist = float(np.hypot(*(scenario.initial_state.intruder_position - scenario.target)))
    if dist <= scenario.numerics.eps_target:
        raise DegenerateScenarioError(f"intruder starts {dist:g} from the target")
    return dist


def sufficient_condition_capture(scenario: Scenario, cm: CaptureMatrixSet | None = None) -> SufficiencyCheck:
    """Does the team provably capture before a straight-line run reaches the target?

    Direct form: sqrt(V0) / (D / v_I) <= c.
    Ratio form:  v_min / v_I >= (sqrt(V0) / D + sqrt(m)) / sqrt(lambda_min).
    """
    cm = build_capture_matrices(scenario.graph) if cm is None else cm
    dist = _target_distance(scenario)
    v_int = scenario.intruder_speed
    v_min = float(np.min(scenario.defender_speeds))
    root_v0 = math.sqrt(_v0(scenario, cm))
    c = _rate_constant(scenario, cm)
    lhs = root_v0 / (dist / v_int)
    lam = cm.lambda_min_w
    # a singular W (nobody senses) puts the required ratio at infinity
    ratio_rhs = (root_v0 / dist + math.sqrt(cm.m)) / math.sqrt(lam) if lam > 0 else math.inf
    ratio = v_min / v_int
    return SufficiencyCheck(lhs <= c, c - lhs, lhs, ratio >= ratio_rhs, ratio - ratio_rhs)


def alpha(scenario: Scenario, cm: CaptureMatrixSet | None = None) -> float:
    cm = build_capture_matrices(scenario.graph) if cm is None else cm
    return math.sqrt(_v0(scenario, cm)) / _target_distance(scenario) + math.sqrt(cm.m)


def speed_condition_lemma(scenario: Scenario, cm: CaptureMatrixSet | None = None) -> Check:
    """Speed test that replaces lambda_min(W) by its graph lower bound.

    Checks ``v_min^2 * min_g (lambda2/m + (|g| - d)^2 / N) / (g^2 + 1) >= v_I^2 alpha^2``.
    The minimand is the eigenvalue bound's minimand divided by m, which makes
    this test stricter than substituting the bound itself.
    """
    cm = build_capture_matrices(scenario.graph) if cm is None else cm
    n, m = cm.n, cm.m
    if m < 1:
        raise InfeasibleBoundError("speed condition needs at least one sensing defender")
    if n == 1:
        term = lemma1_lower_bound(cm) / m
    else:
        lemma1_lower_bound(cm)  # raises on a disconnected graph
        term, _ = minimize_gamma(cm.lambda2_w1 / m, 1.0 / n, math.sqrt((n - m) / m))
        term = min(term, 1.0 / n)
    v_min = float(np.min(scenario.defender_speeds))
    lhs = v_min ** 2 * term
    rhs = scenario.intruder_speed ** 2 * alpha(scenario, cm) ** 2
    return Check(lhs >= rhs, lhs - rhs)


def certify(scenario: Scenario, cm: CaptureMatrixSet | None = None) -> CaptureCertificate:
    """Collect the time bound and all sufficient conditions for one scenario."""
    cm = build_capture_matrices(scenario.graph) if cm is None else cm
    tb = capture_time_bound(scenario, cm)
    try:
        suff = sufficient_condition_capture(scenario, cm)
        sufficient = Check(suff.holds, suff.slack)
        ratio = Check(suff.ratio_holds, suff.ratio_slack)
    except DegenerateScenarioError:
        sufficient = ratio = None
    try:
        lemma = speed_condition_lemma(scenario, cm)
    except (InfeasibleBoundError, DegenerateScenarioError):
        lemma = None
    return CaptureCertificate(
        c=tb.c, v0=tb.v0, t_star_bound=tb.t_star_bound, lambda_min_w=cm.lambda_min_w, m=cm.m,
        v_min=float(np.min(scenario.defender_speeds)), intruder_speed=scenario.intruder_speed,
        sufficient_capture=sufficient, speed_ratio_ok=ratio, lemma_speed_ok=lemma,
    )


@dataclass(frozen=True)
class RateReport:
    applicable: bool
    passed: bool
    max_violation: float
    tolerance: float
    n_samples: int
    capture_time: float | None
    bound_respected: bool | None
    numerics_alert: bool
    note: str = ""


def rate_tolerance(c: float, dt: float) -> float:
    return RATE_SLACK_FACTOR * c * dt


def verify_consensus_rate(trace: SimulationTrace, cert: CaptureCertificate | TimeBound,
                          tolerance: float | None = None) -> RateReport:
    """Audit sqrt(V(t)) <= sqrt(V(0)) - c t on every recorded sample.

    Samples at or after the capture event are excluded. A trace that times
    out while c > 0 is flagged as a numerics alert, not a counterexample.
    """
    c = cert.c
    if not c > 0:
        return RateReport(False, False, math.nan, math.nan, len(trace), None, None, False,
                          "rate constant is not positive; no guarantee to verify")
    tol = rate_tolerance(c, trace.dt) if tolerance is None else tolerance
    t = trace.times
    keep = np.ones(len(t), dtype=bool)
    if trace.outcome.kind == CAPTURE:
        keep = t < trace.outcome.time
        keep[0] = True
    root = np.sqrt(np.maximum(trace.lyapunov, 0.0))
    excess = root[keep] - (root[0] - c * (t[keep] - t[0]))
    worst = float(excess.max())
    captured = trace.outcome.kind == CAPTURE
    bound = cert.t_star_bound
    return RateReport(
        applicable=True, passed=worst <= tol, max_violation=worst, tolerance=tol,
        n_samples=int(keep.sum()), capture_time=trace.outcome.time if captured else None,
        bound_respected=bool(trace.outcome.time - t[0] <= bound) if captured else None,
        numerics_alert=trace.outcome.kind == TIMEOUT,
    )
