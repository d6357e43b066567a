import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_instance
from mcsched.bnb import solve_milp
from mcsched.formulations import SchedParams, Schedule, build, extract_schedule
from mcsched.network import InstanceConfig, generate_instance
from mcsched.verify import (
    BruteForceSizeError, ScheduleShapeError, UnsupportedKindError, brute_force_opt, throughput,
    verify_schedule,
)


def test_empty_schedule_zero_demand():
    inst = generate_instance(InstanceConfig(num_sources=2, seed=0))
    params = SchedParams(T=3, demand=0)
    rep = verify_schedule(inst, Schedule.empty(3, inst.group_sizes), params)
    assert rep.ok
    assert rep.throughput == 0.0
    assert rep.worst_sinr_margin == math.inf


def test_empty_schedule_fails_demand():
    inst = generate_instance(InstanceConfig(num_sources=1, seed=0))
    rep = verify_schedule(inst, Schedule.empty(2, inst.group_sizes), SchedParams(T=2, demand=1))
    assert not rep.ok
    assert rep.sinr_ok and not all(rep.demand_ok[0])


def test_margin_zero_at_threshold():
    inst = make_instance([[0.5]])  # gain 8
    s = Schedule.empty(1, [1])
    s.activations[0, 0, 0] = True
    s.powers[0, 0] = 10.0 * 0.1 / 8.0  # exactly beta
    rep = verify_schedule(inst, s, SchedParams(T=1, demand=1, p_slot_min=0.1))
    assert rep.worst_sinr_margin == pytest.approx(0.0, abs=1e-12)
    assert rep.sinr_ok


def test_concurrent_example_fails_sinr():
    inst = make_instance([[0.5, 1.0], [1.0, 0.5]], groups=((0,), (1,)))
    s = Schedule.empty(1, [1, 1])
    s.activations[0, :, 0] = True
    s.powers[0] = 300.0
    rep = verify_schedule(inst, s, SchedParams(T=1))
    assert not rep.sinr_ok
    assert rep.worst_sinr_margin == pytest.approx(2400 / 300.1 - 10, abs=1e-9)
    assert rep.worst_sinr_margin == pytest.approx(-2.0027, abs=1e-4)


def test_silent_source_must_have_zero_power():
    inst = make_instance([[0.5, 1.0], [1.0, 0.5]], groups=((0,), (1,)))
    s = Schedule.empty(1, [1, 1])
    s.activations[0, 0, 0] = True
    s.powers[0] = [300.0, 5.0]
    rep = verify_schedule(inst, s, SchedParams(T=1, demand=0))
    assert not rep.power_bounds_ok and not rep.ok


def test_power_bounds_and_budget():
    inst = make_instance([[0.5]])
    s = Schedule.empty(2, [1])
    s.activations[:, 0, 0] = True
    s.powers[:, 0] = 250.0
    assert verify_schedule(inst, s, SchedParams(T=2)).ok
    assert not verify_schedule(inst, s, SchedParams(T=2, p_budget=400.0)).ok
    s.powers[0, 0] = 301.0
    assert not verify_schedule(inst, s, SchedParams(T=2)).power_bounds_ok
    s.powers[0, 0] = 1.0  # below the per-link floor of 3 mW
    assert not verify_schedule(inst, s, SchedParams(T=2)).power_bounds_ok


def test_structure_checks():
    inst = make_instance([[0.2, 0.2]], groups=((0, 1),))
    s = Schedule.empty(1, [2], kind="mc-all-cp")
    s.activations[0, 0, 0] = True
    s.powers[0, 0] = 90.0
    assert not verify_schedule(inst, s, SchedParams(T=1, demand=0)).structure_ok
    s.kind = "uni-all"
    assert verify_schedule(inst, s, SchedParams(T=1, demand=0)).structure_ok
    s.activations[0, 0, 1] = True
    assert not verify_schedule(inst, s, SchedParams(T=1, demand=0)).structure_ok


def test_shape_errors():
    inst = generate_instance(InstanceConfig(num_sources=2, seed=0))
    with pytest.raises(ScheduleShapeError):
        verify_schedule(inst, Schedule.empty(2, [2, 2]), SchedParams(T=3))
    bad = Schedule(np.zeros((1, 2, 2), bool), np.zeros((1, 3)), [2, 2])
    with pytest.raises(ScheduleShapeError):
        verify_schedule(inst, bad, SchedParams(T=1))
    wide = Schedule.empty(1, [1, 3])
    wide.activations[0, 0, 2] = True
    inst2 = make_instance(np.ones((2, 4)) * 0.5, groups=((0,), (1, 2, 3)))
    with pytest.raises(ScheduleShapeError):
        verify_schedule(inst2, wide, SchedParams(T=1, demand=0))


@pytest.mark.parametrize("count, T, expected", [(32, 8, 4.0), (0, 8, 0.0), (5, 8, 0.625)])
def test_throughput(count, T, expected):
    s = Schedule.empty(T, [2, 2])
    flat = s.activations.reshape(-1)
    flat[:count] = True
    assert throughput(s) == expected


def test_brute_force_single_link():
    inst = make_instance([[0.5]])
    value, witness = brute_force_opt(inst, SchedParams(T=1, demand=1), "dmc-opt-cp")
    assert value == 1.0
    assert witness.activations[0, 0, 0] and witness.powers[0, 0] == 90.0


def test_brute_force_conflict(conflict_instance):
    params = SchedParams(T=2, demand=1)
    a, _ = brute_force_opt(conflict_instance, params, "dmc-opt-cp")
    b, _ = brute_force_opt(conflict_instance, params, "mc-all-cp")
    assert a > b


def test_brute_force_guards():
    inst = generate_instance(InstanceConfig(num_sources=3, group_size=2, seed=0))
    with pytest.raises(BruteForceSizeError):
        brute_force_opt(inst, SchedParams(T=4), "dmc-opt-cp")
    with pytest.raises(UnsupportedKindError):
        brute_force_opt(inst, SchedParams(T=1), "dmc-opt")
    with pytest.raises(UnsupportedKindError):
        brute_force_opt(inst, SchedParams(T=1), "nope")


@given(st.integers(0, 2**32 - 1), st.sampled_from(["dmc-opt-cp", "mc-all-cp", "uni-all"]),
       st.integers(0, 1))
def test_brute_force_matches_milp(seed, kind, demand):
    inst = generate_instance(InstanceConfig(num_sources=2, group_size=2, seed=seed))
    params = SchedParams(T=2, demand=demand)
    value, witness = brute_force_opt(inst, params, kind)
    milp, vm = build(kind, inst, params)
    sol = solve_milp(milp)
    if witness is None:
        assert sol.primal is None
        return
    assert sol.objective_value == pytest.approx(value, abs=1e-9)
    assert verify_schedule(inst, witness, params).ok
    assert verify_schedule(inst, extract_schedule(vm, sol, params), params).ok


def test_summary_keys():
    inst = generate_instance(InstanceConfig(num_sources=1, seed=0))
    rep = verify_schedule(inst, Schedule.empty(1, [2]), SchedParams(T=1, demand=0))
    assert set(rep.summary()) == {"ok", "sinr_ok", "worst_sinr_margin", "budget_ok", "demand_ok",
                                  "power_bounds_ok", "structure_ok", "throughput"}
