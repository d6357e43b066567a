import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_instance
from mcsched.network import (
    ConfigError, InstanceConfig, NetworkInstance, build_conflict_graph, db_to_linear, gain,
    generate_instance, sinr,
)


def test_generate_shapes_and_determinism():
    cfg = InstanceConfig(num_sources=2, group_size=2, distance_range=(0.1, 1.0), seed=7)
    a, b = generate_instance(cfg), generate_instance(cfg)
    assert a.num_sources == 2 and a.num_destinations == 4
    assert a.distances.shape == (2, 4)
    assert a == b
    assert np.all((a.distances >= 0.1) & (a.distances <= 1.0))


def test_minimal_instance():
    inst = generate_instance(InstanceConfig(num_sources=1, group_size=1))
    assert inst.distances.shape == (1, 1)
    assert inst.groups == ((0,),)


@pytest.mark.parametrize("kwargs", [
    dict(distance_range=(0.0, 1.0)),
    dict(distance_range=(0.5, 0.4)),
    dict(num_sources=0),
    dict(group_size=0),
    dict(noise_power=0.0),
    dict(path_loss_exponent=-1.0),
    dict(seed=-1),
])
def test_bad_config_rejected(kwargs):
    base = dict(num_sources=2)
    base.update(kwargs)
    with pytest.raises(ConfigError):
        generate_instance(InstanceConfig(**base))


def test_different_seeds_differ():
    a = generate_instance(InstanceConfig(num_sources=3, seed=1))
    b = generate_instance(InstanceConfig(num_sources=3, seed=2))
    assert a != b


@pytest.mark.parametrize("d, a, expected", [(1.0, 3, 1.0), (0.5, 3, 8.0), (0.2, 4, 625.0)])
def test_gain_values(d, a, expected):
    inst = make_instance([[d]], a=a)
    assert gain(inst, 0, 0) == pytest.approx(expected, rel=1e-12)


def test_gain_bad_ids():
    inst = make_instance([[0.5]])
    with pytest.raises(KeyError):
        gain(inst, 1, 0)
    with pytest.raises(KeyError):
        gain(inst, 0, 3)


def test_sinr_single_source():
    inst = make_instance([[0.5]])
    assert sinr(inst, [300.0], 0, 0) == pytest.approx(24000.0)


def test_sinr_two_sources():
    # gains 8 and 1 at destination 0
    inst = make_instance([[0.5, 1.0], [1.0, 0.5]])
    assert sinr(inst, [300.0, 300.0], 0, 0) == pytest.approx(2400 / 300.1)
    assert sinr(inst, [300.0, 300.0], 0, 0) == pytest.approx(7.9973, abs=1e-4)


def test_sinr_zero_power_and_errors():
    inst = make_instance([[0.5, 1.0], [1.0, 0.5]])
    assert sinr(inst, [0.0, 300.0], 0, 0) == 0.0
    with pytest.raises(ValueError):
        sinr(inst, [-1.0, 1.0], 0, 0)
    with pytest.raises(ValueError):
        sinr(inst, [1.0], 0, 0)
    with pytest.raises(KeyError):
        sinr(inst, [1.0, 1.0], 2, 0)


@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.0, 300.0), st.floats(0.1, 300.0))
def test_sinr_monotone(d_own, d_int, p_int, p_own):
    inst = make_instance([[d_own, 0.5], [d_int, 0.5]])
    base = sinr(inst, [p_own, p_int], 0, 0)
    assert sinr(inst, [p_own * 2, p_int], 0, 0) >= base
    assert sinr(inst, [p_own, p_int + 1.0], 0, 0) <= base


def test_instance_validation():
    with pytest.raises(ConfigError):
        make_instance([[0.5, -0.1]], groups=((0, 1),))
    with pytest.raises(ConfigError):
        make_instance([[0.5, 0.2]], groups=((0,),))
    with pytest.raises(ConfigError):
        NetworkInstance(groups=((0,), (0,)), distances=np.ones((2, 1)),
                        path_loss_exponent=3.0, noise_power=0.1)


def test_gains_read_only():
    inst = make_instance([[0.5]])
    with pytest.raises(ValueError):
        inst.gains[0, 0] = 1.0


def test_db_to_linear():
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(0.0) == 1.0


def test_conflict_graph_no_edge_when_far():
    inst = make_instance([[0.1, 1.0], [1.0, 0.1]], groups=((0,), (1,)))
    g = build_conflict_graph(inst, 90.0, 10.0)
    assert not g.edges


def test_conflict_graph_edge_from_sinr_example():
    inst = make_instance([[0.5, 1.0], [1.0, 0.5]], groups=((0,), (1,)))
    g = build_conflict_graph(inst, 300.0, 10.0)
    assert g.adjacent((0, 0), (1, 1))
    assert g.neighbors((0, 0)) == {(1, 1)}


def test_conflict_graph_single_source_has_no_edges():
    inst = make_instance([[0.5, 0.9, 0.2]], groups=((0, 1, 2),))
    g = build_conflict_graph(inst, 90.0, 10.0)
    assert len(g.vertices) == 3
    assert not g.edges


def test_conflict_graph_matches_fixture(conflict_instance):
    g = build_conflict_graph(conflict_instance, 90.0, 10.0)
    # only destination 3 suffers from source 0
    assert {tuple(sorted(e)) for e in g.edges} == {((0, 0), (1, 3)), ((0, 1), (1, 3))}


def test_conflict_graph_rejects_bad_power():
    inst = make_instance([[0.5]])
    with pytest.raises(ValueError):
        build_conflict_graph(inst, 0.0, 10.0)
