import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from omrkit import io
from omrkit.config import ConfigError, ExperimentConfig, emit, normalize, parse
from omrkit.core import RoundTrace
from omrkit.seeds import SeedStreams

floats01 = st.floats(0, 1, allow_nan=False)


@given(st.lists(st.tuples(floats01, floats01, floats01, st.booleans(), st.booleans(),
                          st.one_of(st.none(), st.integers(0, 99))), min_size=1, max_size=6),
       st.floats(-np.pi, np.pi))
def test_trace_round_trip_is_exact(rows, phi):
    x = np.array([np.cos(phi), np.sin(phi)])
    traces = [RoundTrace(t, 1, x, p * x, p, b, v, b >= p, om, xi, k)
              for t, (p, b, v, om, xi, k) in enumerate(rows, start=1)]
    back = io.loads_trace(io.dumps_trace(traces))
    assert back == [io.TraceRow.from_trace(r) for r in traces]
    assert io.dumps_trace(back) == io.dumps_trace(traces)


def test_trace_rejects_bad_header_and_order():
    with pytest.raises(ValueError):
        io.loads_trace("a,b\n1,2\n")
    good = io.dumps_trace([RoundTrace(1, 1, np.array([1.0]), np.array([0.2]), 0.2, 0.5, 0.5, True)])
    lines = good.splitlines()
    with pytest.raises(ValueError):
        io.loads_trace("\n".join([lines[0], lines[1].replace("1,", "2,", 1)]) + "\n")


def test_fixed_environment_from_trace(tmp_path):
    from omrkit.environment import FixedEnvironment, EnvironmentView, History
    x = np.array([0.6, 0.8])
    path = tmp_path / "t.csv"
    io.write_trace(path, [RoundTrace(1, 1, x, 0.1 * x, 0.1, 0.3, 0.3, True)])
    env = FixedEnvironment.from_trace_csv(path)
    x1, th = env.emit(EnvironmentView(History([])))
    assert np.array_equal(x1, x) and th == 0.3


def test_json_sorted_and_numpy_safe():
    text = io.dumps_json({"b": np.float64(0.1), "a": np.arange(2), "c": np.bool_(True)})
    assert list(json.loads(text)) == ["a", "b", "c"]


def test_config_defaults_round_trip():
    assert normalize({}) == emit(ExperimentConfig().validate())
    assert normalize(emit(parse({"horizon": 7}))) == emit(parse({"horizon": 7}))


@given(st.integers(1, 500), st.sampled_from([0.1, 0.2, 0.25]), st.sampled_from(["omr", "sum"]),
       st.integers(0, 2 ** 31), st.sampled_from(["iid", "linear", "tracker", "rotation"]))
def test_config_round_trip_property(T, eps, seller, seed, env):
    doc = {"horizon": T, "epsilon": eps, "seller": seller, "seed": seed, "environment": env}
    assert emit(parse(doc)) == normalize(doc)
    assert parse(emit(parse(doc))) == parse(doc)


@pytest.mark.parametrize("doc", [
    {"epsilon": 0.6, "seller": "sum"},
    {"epsilon": 0.3, "seller": "sum"},
    {"horizn": 5},
    {"horizon": 0},
    {"horizon": 2.5},
    {"gamma_bar": 1.0},
    {"n_buyers": 2, "partition": "single"},
    {"environment": "fixed"},
    {"grid_step": 0.5},
    "not json",
    "[1, 2]",
])
def test_config_errors(doc):
    with pytest.raises(ConfigError):
        cfg = parse(doc)
        cfg.make_partition()


def test_config_multi_buyer():
    cfg = parse({"horizon": 6, "n_buyers": 2, "partition": "round_robin",
                 "buyers": "truthful,shade", "gammas": [0.3, 0.5]})
    assert cfg.make_partition().rounds_of(2) == [2, 4, 6]
    assert cfg.make_discount().gammas == (0.3, 0.5)
    assert cfg.digest() == parse(emit(cfg)).digest()


def test_seed_streams_are_labeled_and_independent():
    a, b = SeedStreams(1, 0), SeedStreams(1, 0)
    assert a.rng("environment").random() == b.rng("environment").random()
    assert a.rng("environment").random() != a.rng("seller-xi").random()
    assert SeedStreams(1, 1).rng("environment").random() != a.rng("environment").random()
    assert a.buyer(1).random() != a.buyer(2).random()
