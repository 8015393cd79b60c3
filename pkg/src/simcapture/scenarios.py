"""Reference engagements: the four-defender square and its variants."""
from __future__ import annotations

from importlib import resources

import numpy as np

from .dynamics import AgentState, Numerics, Scenario
from .experiments import GridSpec, SweepSpec
from .graph_core import CommGraph

SQUARE = ((5.0, 5.0), (-5.0, -5.0), (-5.0, 5.0), (5.0, -5.0))
SCATTERED = ((2.0, 10.0), (-5.0, -6.0), (-7.0, 1.0), (3.0, -1.0))
INTRUDER_START = (-5.0, 10.0)

# K4 without the 1-2 link
K4_MINUS_12 = ((1, 3), (1, 4), (2, 3), (2, 4), (3, 4))

# nested communication graphs for the scattered team, sparsest first
COMM_CHAIN = (
    ((1, 2), (2, 3), (3, 4)),
    ((1, 2), (2, 3), (3, 4), (4, 1)),
    ((1, 2), (2, 3), (3, 4), (4, 1), (1, 3)),
    ((1, 2), (2, 3), (3, 4), (4, 1), (1, 3), (2, 4)),
)
SENSING_CHAIN = ((1, 0, 0, 0), (1, 1, 0, 0), (1, 1, 1, 0), (1, 1, 1, 1))
SPEED_SWEEP = (0.2, 0.4, 0.6, 0.8, 1.0)


def homogeneous(numerics: Numerics | None = None) -> Scenario:
    """Square team, unit speeds, complete graph, everyone senses; intruder at 0.1."""
    return Scenario(CommGraph.complete(4), [1.0] * 4, 0.1, AgentState(SQUARE, INTRUDER_START),
                    numerics=numerics or Numerics())


def heterogeneous(numerics: Numerics | None = None) -> Scenario:
    """Square team with mixed speeds; 2 and 3 blind; 1 and 2 do not talk."""
    g = CommGraph.from_edges(4, K4_MINUS_12, (1, 0, 0, 1))
    return Scenario(g, [1.3, 1.4, 1.5, 1.4], 0.1, AgentState(SQUARE, INTRUDER_START),
                    numerics=numerics or Numerics())


def capture_map_base(intruder_speed: float = 0.5) -> Scenario:
    return homogeneous().replace(intruder_speed=intruder_speed)


def speed_sweep(values=SPEED_SWEEP) -> SweepSpec:
    return SweepSpec(homogeneous(), "defender_speed", values, index=4)


def scattered(edges=COMM_CHAIN[-1], sensing=(1, 1, 1, 1)) -> Scenario:
    g = CommGraph.from_edges(4, edges, sensing)
    return Scenario(g, [1.0] * 4, 0.6, AgentState(SCATTERED, INTRUDER_START))


def communication_sweep(sensing=(1, 0, 0, 0)) -> SweepSpec:
    return SweepSpec(scattered(sensing=sensing), "edges", COMM_CHAIN)


def sensing_sweep() -> SweepSpec:
    return SweepSpec(scattered(), "sensing", SENSING_CHAIN)


def default_grid() -> GridSpec:
    return GridSpec()


def bundled_path(name: str):
    """Path of a scenario file shipped with the package, e.g. ``"homogeneous.yaml"``."""
    return resources.files(__package__).joinpath("data", name)
