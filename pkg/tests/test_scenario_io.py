import copy
import math

import numpy as np
import pytest
import yaml

from simcapture import scenarios as S
from simcapture.dynamics import Numerics, ScriptedPolicy, simulate
from simcapture.experiments import GridSpec, capture_map, extract_boundary
from simcapture.scenario_io import (
    AsymmetricWeightsError,
    InvalidValueError,
    MissingKeyError,
    MissingSectionError,
    NonPositiveSpeedError,
    UnknownKeyError,
    boundary_to_csv,
    dump_document,
    load_document,
    map_to_csv,
    parse_experiment,
    parse_scenario,
    read_boundary_csv,
    read_map_csv,
    read_trace_csv,
    scenario_to_document,
    trace_to_csv,
)

MINIMAL = {
    "agents": {"defenders": [{"position": [5, 5], "speed": 1.0}, {"position": [-5, -5], "speed": 1.0}]},
    "graph": {"edges": [[1, 2]], "sensing": [1, 0]},
    "intruder": {"position": [-5, 10], "speed": 0.1},
}


def doc(**patch):
    d = copy.deepcopy(MINIMAL)
    for path, value in patch.items():
        node = d
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[k]
        if value is None:
            del node[keys[-1]]
        else:
            node[keys[-1]] = value
    return d


# -- bundled files -----------------------------------------------------------------

@pytest.mark.parametrize("name, factory", [
    ("homogeneous.yaml", S.homogeneous),
    ("heterogeneous.yaml", S.heterogeneous),
    ("capture_map.yaml", S.capture_map_base),
])
def test_bundled_files_parse_to_reference_scenarios(name, factory):
    assert parse_scenario(S.bundled_path(name)) == factory()


@pytest.mark.parametrize("name, factory", [
    ("speed_sweep.yaml", S.speed_sweep),
    ("communication_sweep.yaml", S.communication_sweep),
    ("sensing_sweep.yaml", S.sensing_sweep),
])
def test_bundled_sweeps_match_reference_specs(name, factory):
    path = S.bundled_path(name)
    exp = parse_experiment(path)
    spec = exp.sweep_spec(parse_scenario(path))
    ref = factory()
    assert exp.grid == GridSpec()
    assert spec.parameter == ref.parameter and spec.index == ref.index
    for a, b in zip(spec.values, ref.values):
        assert spec.apply(a) == ref.apply(b)


# -- errors ------------------------------------------------------------------------

def test_asymmetric_matrix_names_the_entry():
    d = doc(graph={"matrix": [[0, 1], [0.5, 0]], "sensing": [1, 0]})
    with pytest.raises(AsymmetricWeightsError) as err:
        parse_scenario(d)
    assert err.value.entry == (1, 2)
    assert "(1, 2)" in str(err.value)


@pytest.mark.parametrize("patch, error, where", [
    (dict(intruder__sped=0.1), UnknownKeyError, "intruder.sped"),
    (dict(extra={}), UnknownKeyError, "extra"),
    (dict(numerics={"dt": 1e-3, "epscap": 0.1}), UnknownKeyError, "numerics.epscap"),
    (dict(graph=None), MissingSectionError, "graph"),
    (dict(intruder__speed=None), MissingKeyError, "intruder.speed"),
    (dict(intruder__speed=0), NonPositiveSpeedError, "intruder.speed"),
    (dict(agents__defenders=[{"position": [0, 0], "speed": -1}, {"position": [1, 0], "speed": 1}]),
     NonPositiveSpeedError, "agents.defenders[0].speed"),
    (dict(graph__sensing=[1, 2]), InvalidValueError, "graph.sensing"),
    (dict(intruder__position=[1]), InvalidValueError, "intruder.position"),
    (dict(numerics={"integrator": "leapfrog"}), InvalidValueError, "numerics.integrator"),
    (dict(intruder__policy="zigzag"), InvalidValueError, "intruder.policy"),
    (dict(intruder__policy={"kind": "scripted", "times": [1.0], "headings": [0.0]}), InvalidValueError,
     "intruder.policy"),
])
def test_named_errors_carry_the_path(patch, error, where):
    with pytest.raises(error) as err:
        parse_scenario(doc(**patch))
    assert err.value.path == where


def test_malformed_yaml_is_a_config_error():
    with pytest.raises(InvalidValueError):
        load_document("agents: [unclosed\n")


# -- defaults and round trip -------------------------------------------------------

def test_missing_numerics_get_defaults_in_the_echo():
    s = parse_scenario(doc())
    echo = scenario_to_document(s)["numerics"]
    assert echo["dt"] == 1e-3 and echo["eps_cap"] == 0.05 and echo["eps_target"] == 0.05
    assert echo["integrator"] == "euler" and echo["t_max"] is None
    assert echo.keys() == Numerics().__dict__.keys()


def test_exponent_literals_parse_as_numbers():
    s = parse_scenario(dump_document(doc(numerics={"dt": "1e-4"})) + "\n")
    assert s.numerics.dt == 1e-4


@pytest.mark.parametrize("scenario", [
    S.homogeneous(),
    S.heterogeneous(Numerics(integrator="rk4", t_max=30.0, sample_stride=3)),
    S.scattered(S.COMM_CHAIN[0], (1, 0, 0, 0)),
    S.homogeneous().replace(intruder_policy=ScriptedPolicy((0.0, 1.5), (0.1, -2.0), end=500.0), target=(1, -2)),
])
def test_round_trip(scenario):
    text = dump_document(scenario_to_document(scenario))
    assert parse_scenario(yaml.safe_load(text)) == scenario
    assert parse_scenario(text) == scenario


def test_weighted_edges():
    s = parse_scenario(doc(graph={"edges": [[1, 2, 0.25]], "sensing": [1, 1]}))
    assert s.graph.weights[0, 1] == s.graph.weights[1, 0] == 0.25


def test_experiment_section():
    d = doc(experiment={"grid": {"nx": 11, "ny": 9, "t_max": 50},
                        "sweep": {"parameter": "defender_speed", "index": 2, "values": [0.5, 1.0]}})
    exp = parse_experiment(d)
    assert exp.grid == GridSpec(nx=11, ny=9, t_max=50.0)
    spec = exp.sweep_spec(parse_scenario(d))
    assert spec.apply(0.5).defender_speeds.tolist() == [1.0, 0.5]
    with pytest.raises(InvalidValueError):
        parse_experiment(doc(experiment={"grid": {"nx": 1}}))
    with pytest.raises(MissingSectionError):
        parse_experiment(doc()).sweep_spec(parse_scenario(doc()))


# -- result files ------------------------------------------------------------------

def test_trace_csv_round_trip(tmp_path):
    tr = simulate(S.heterogeneous())
    text = trace_to_csv(tr)
    assert text.splitlines()[0] == "t,x1,y1,x2,y2,x3,y3,x4,y4,x5,y5,V"
    p = tmp_path / "trace.csv"
    p.write_text(text)
    back = read_trace_csv(p, tr.outcome, tr.dt)
    assert np.allclose(back.defender_positions, tr.defender_positions, rtol=1e-11, atol=1e-11)
    assert np.allclose(back.lyapunov, tr.lyapunov, rtol=1e-11)
    assert trace_to_csv(back) == text


def test_map_and_boundary_csv(tmp_path):
    cmap = capture_map(S.capture_map_base(), GridSpec(nx=12, ny=12))
    (tmp_path / "map.csv").write_text(map_to_csv(cmap))
    m = read_map_csv(tmp_path / "map.csv")
    assert np.allclose(m["xs"], cmap.grid.xs) and np.allclose(m["ys"], cmap.grid.ys)
    assert np.allclose(m["t_star"], cmap.t_star, equal_nan=True, rtol=1e-11)
    lines = extract_boundary(cmap)
    (tmp_path / "b.csv").write_text(boundary_to_csv(lines))
    back = read_boundary_csv(tmp_path / "b.csv")
    assert len(back) == len(lines)
    assert all(np.allclose(back[(None, k)], p) for k, p in enumerate(lines))


def test_csv_bytes_are_reproducible():
    a = map_to_csv(capture_map(S.capture_map_base(), GridSpec(nx=8, ny=8)))
    b = map_to_csv(capture_map(S.capture_map_base(), GridSpec(nx=8, ny=8)))
    assert a == b
    assert not any(math.isnan(float(v)) for v in [r.split(",")[0] for r in a.splitlines()[1:]])
