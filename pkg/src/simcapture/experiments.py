"""Capture maps over intruder start positions, their boundaries, and sweeps."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from skimage.measure import find_contours, points_in_poly

from .dynamics import BREACH, CAPTURE, TIMEOUT, Scenario, run_batch
from .graph_core import CommGraph

MAP_T_MAX = 200.0

# integer outcome classes stored in CaptureMap.classes
CLASS_CAPTURE = 0
CLASS_BREACH = 1
CLASS_TIMEOUT = 2
CLASS_ERROR = 3
CLASS_NAMES = {CLASS_CAPTURE: CAPTURE, CLASS_BREACH: BREACH, CLASS_TIMEOUT: TIMEOUT, CLASS_ERROR: "error"}
_CLASS_OF = {v: k for k, v in CLASS_NAMES.items()}


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple = (-15.0, 15.0)
    y_range: tuple = (-15.0, 15.0)
    nx: int = 81
    ny: int = 81
    t_max: float = MAP_T_MAX

    def __post_init__(self):
        object.__setattr__(self, "x_range", tuple(float(v) for v in self.x_range))
        object.__setattr__(self, "y_range", tuple(float(v) for v in self.y_range))
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if not (self.x_range[1] > self.x_range[0] and self.y_range[1] > self.y_range[0]):
            raise ValueError("grid ranges must be increasing")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(*self.x_range, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(*self.y_range, self.ny)

    def points(self) -> np.ndarray:
        """Cell centres in row-major (y, x) order, shape (ny * nx, 2)."""
        xx, yy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([xx.ravel(), yy.ravel()])


@dataclass(frozen=True, eq=False)
class CaptureMap:
    grid: GridSpec
    classes: np.ndarray  # (ny, nx) int8
    event_times: np.ndarray  # (ny, nx); capture or breach time, t_max for timeouts
    errors: dict = field(default_factory=dict)  # flat cell index -> message

    def __eq__(self, other):
        if not isinstance(other, CaptureMap):
            return NotImplemented
        return (self.grid == other.grid and np.array_equal(self.classes, other.classes)
                and np.array_equal(self.event_times, other.event_times, equal_nan=True)
                and self.errors == other.errors)

    __hash__ = None

    @property
    def t_star(self) -> np.ndarray:
        """Capture times, NaN where the cell did not end in capture."""
        return np.where(self.classes == CLASS_CAPTURE, self.event_times, np.nan)

    @property
    def non_capture(self) -> np.ndarray:
        """Cells grouped with breach for boundary purposes (breach, timeout, error)."""
        return self.classes != CLASS_CAPTURE

    def count(self, cls: int) -> int:
        return int(np.sum(self.classes == cls))

    @property
    def breach_cells(self) -> int:
        return int(np.sum(self.non_capture))


def _run_cells(base: Scenario, points: np.ndarray, t_max: float):
    try:
        kinds, times = run_batch(base, points, t_max=t_max)
        return [_CLASS_OF[k] for k in kinds], list(times), {}
    except Exception:
        classes, times, errors = [], [], {}
        for r, p in enumerate(points):
            try:
                k, t = run_batch(base, p[None], t_max=t_max)
                classes.append(_CLASS_OF[k[0]])
                times.append(t[0])
            except Exception as exc:  # isolate the failing cell
                classes.append(CLASS_ERROR)
                times.append(math.nan)
                errors[r] = f"{type(exc).__name__}: {exc}"
        return classes, times, errors


def capture_map(base: Scenario, grid: GridSpec | None = None, *, jobs: int | None = 1,
                order: Sequence[int] | None = None) -> CaptureMap:
    """Simulate an intruder starting from every grid cell centre.

    ``order`` permutes the evaluation order of the flat cell indices; results
    are merged by index so the map never depends on it. ``jobs`` > 1 spreads
    contiguous chunks over worker processes (``None`` = all cores).
    """
    grid = GridSpec() if grid is None else grid
    pts = grid.points()
    ncell = len(pts)
    idx = np.arange(ncell) if order is None else np.asarray(order, dtype=int)
    if sorted(idx.tolist()) != list(range(ncell)):
        raise ValueError("order must be a permutation of the cell indices")
    jobs = (os.cpu_count() or 1) if jobs is None else max(int(jobs), 1)
    chunks = [c for c in np.array_split(idx, jobs * 4 if jobs > 1 else 1) if c.size]
    classes = np.empty(ncell, dtype=np.int8)
    times = np.empty(ncell)
    errors = {}
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cells, [base] * len(chunks), [pts[c] for c in chunks],
                                    [grid.t_max] * len(chunks)))
    else:
        results = [_run_cells(base, pts[c], grid.t_max) for c in chunks]
    for c, (cl, tm, err) in zip(chunks, results):
        classes[c] = cl
        times[c] = tm
        errors.update({int(c[r]): msg for r, msg in err.items()})
    shape = (grid.ny, grid.nx)
    return CaptureMap(grid, classes.reshape(shape), times.reshape(shape), dict(sorted(errors.items())))


# -- boundaries -------------------------------------------------------------------

def extract_boundary(cmap: CaptureMap) -> list[np.ndarray]:
    """Marching-squares contours between capture and non-capture cells.

    Returns polylines of (x, y) vertices, longest first. A polyline is
    closed (first vertex repeated last) when its region is interior to the
    grid. Empty when the map is single-class.
    """
    mask = cmap.non_capture.astype(float)
    if mask.min() == mask.max():
        return []
    g = cmap.grid
    dx = (g.x_range[1] - g.x_range[0]) / (g.nx - 1)
    dy = (g.y_range[1] - g.y_range[0]) / (g.ny - 1)
    lines = []
    for rc in find_contours(mask, 0.5):
        xy = np.column_stack([g.x_range[0] + rc[:, 1] * dx, g.y_range[0] + rc[:, 0] * dy])
        lines.append(xy)
    lines.sort(key=lambda p: (-len(p), p[0, 0], p[0, 1]))
    return lines


def is_closed(polyline: np.ndarray) -> bool:
    return len(polyline) > 2 and np.array_equal(polyline[0], polyline[-1])


def polygon_area(polyline: np.ndarray) -> float:
    x, y = polyline[:, 0], polyline[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def encloses(polyline: np.ndarray, point) -> bool:
    return bool(points_in_poly(np.asarray(point, dtype=float).reshape(1, 2), polyline)[0])


# -- sweeps -------------------------------------------------------------------------

SWEEP_PARAMETERS = ("defender_speed", "sensing", "edges")


@dataclass(frozen=True, eq=False)
class SweepSpec:
    """Vary one capability of the base scenario.

    ``defender_speed`` takes scalar values for defender ``index`` (1-based);
    ``sensing`` takes 0/1 vectors; ``edges`` takes lists of 1-based edges.
    """

    base_scenario: Scenario
    parameter: str
    values: tuple
    index: int | None = None

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}; expected one of {SWEEP_PARAMETERS}")
        if self.parameter == "defender_speed" and self.index is None:
            raise ValueError("defender_speed sweep needs a defender index")
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("sweep needs at least one value")
        for v in self.values:
            self.apply(v)

    def apply(self, value: Any) -> Scenario:
        s = self.base_scenario
        if self.parameter == "defender_speed":
            v = np.array(s.defender_speeds)
            v[self.index - 1] = float(value)
            return replace(s, defender_speeds=v)
        if self.parameter == "sensing":
            return replace(s, graph=CommGraph(s.graph.weights, np.asarray(value, dtype=float)))
        g = CommGraph.from_edges(s.n_defenders, value, s.graph.sensing)
        return replace(s, graph=g)


@dataclass(frozen=True, eq=False)
class SweepResult:
    setting: Any
    capture_map: CaptureMap | None
    boundary: list
    error: str | None = None


def run_sweep(spec: SweepSpec, grid: GridSpec | None = None, *, jobs: int | None = 1) -> list[SweepResult]:
    out = []
    for value in spec.values:
        try:
            cmap = capture_map(spec.apply(value), grid, jobs=jobs)
            out.append(SweepResult(value, cmap, extract_boundary(cmap)))
        except Exception as exc:
            out.append(SweepResult(value, None, [], f"{type(exc).__name__}: {exc}"))
    return out
