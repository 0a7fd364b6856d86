import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scenario_text
from hansim.domain import Action, Kind, RequestEvent
from hansim.stnet import Blackout, IidLoss
from hansim.workload import (
    Explicit,
    InvalidDevice,
    InvalidDutyCycle,
    Mode,
    Periodic,
    Poisson,
    RandomToggle,
    ScenarioError,
    ScenarioSyntaxError,
    apply_parameter,
    gen_events,
    load_scenario,
    parse_duration,
    parse_number_list,
    parse_rate,
    parse_scenario,
    render_scenario,
    scenario_events,
)
from hansim.cli import resolve_scenario

ON, OFF = Action.ON, Action.OFF


def test_periodic_progression():
    events = gen_events(Periodic(("a",), 3600), 18000, np.random.default_rng(0))
    assert [e.time_s for e in events] == [0, 3600, 7200, 10800, 14400]
    assert all(e.action is ON for e in events)


def test_periodic_hold_emits_off():
    events = gen_events(Periodic(("a",), 100, phase_s=10, hold_s=30), 250, None)
    assert [(e.time_s, e.action) for e in events] == [
        (10, ON), (40, OFF), (110, ON), (140, OFF), (210, ON), (240, OFF)]


def test_poisson_count_single_seed():
    events = gen_events(Poisson(("a",), 10), 5 * 3600, np.random.default_rng(42))
    assert 20 <= len(events) <= 90


def test_poisson_mean_over_seeds():
    counts = [len(gen_events(Poisson(("a", "b", "c"), 10), 5 * 3600, np.random.default_rng(s)))
              for s in range(1000)]
    assert abs(np.mean(counts) - 50) <= 3


def test_poisson_per_device_rate_scales():
    devs = tuple(f"d{i}" for i in range(10))
    counts = [len(gen_events(Poisson(devs, 10, per="device"), 3600, np.random.default_rng(s)))
              for s in range(200)]
    assert abs(np.mean(counts) - 100) <= 5


def test_explicit_verbatim_sorted():
    proc = Explicit(("a",), ((50, OFF), (10, ON)))
    assert gen_events(proc, 100, None) == [RequestEvent(10, "a", ON), RequestEvent(50, "a", OFF)]


def test_toggle_alternates():
    events = gen_events(RandomToggle(("a",), 300, 600), 36000, np.random.default_rng(1))
    actions = [e.action for e in events]
    assert actions[0] is ON
    assert all(a is not b for a, b in zip(actions, actions[1:]))


def test_window_limits():
    events = gen_events(Periodic(("a",), 10, start_s=25, stop_s=60), 1000, None)
    assert [e.time_s for e in events] == [30, 40, 50]


def test_shipped_setting1():
    sc = load_scenario(resolve_scenario("setting1"))
    names = [d.id for d in sc.devices]
    assert sum(n.startswith("ac") for n in names) == 30
    assert sum(n.startswith("heater") for n in names) == 26
    assert all(d.kind is Kind.TYPE2 for d in sc.devices)


def test_shipped_dcube():
    sc = load_scenario(resolve_scenario("dcube"))
    assert len(sc.devices) == 30
    assert {(d.min_dcd_s, d.max_dcp_s) for d in sc.devices} == {(900, 1800)}
    (proc,) = sc.arrivals
    assert isinstance(proc, Poisson) and proc.rate_per_h == 10
    assert sc.duration_s == 5 * 3600


def test_shipped_setting2_has_type1():
    sc = load_scenario(resolve_scenario("setting2"))
    assert sum(d.kind is Kind.TYPE1 for d in sc.devices) == 30


def test_min_exceeds_max_in_file():
    text = scenario_text("[devices]\nx = type2 power=1 min_dcd=40min max_dcp=30min\n")
    with pytest.raises(InvalidDutyCycle) as info:
        parse_scenario(text)
    assert info.value.line == 7


def test_bad_device_power():
    with pytest.raises(InvalidDevice):
        parse_scenario(scenario_text("[devices]\nx = type1 power=0\n"))


@pytest.mark.parametrize("body,line", [
    ("[devices]\nx = type3 power=1\n", 7),
    ("[devicez]\n", 6),
    ("[devices]\nx type2\n", 7),
    ("[devices]\nx = type1 power=1\n[arrivals]\ny = explicit on@0\n", 9),
    ("[devices]\nx = type1 power=1\n[arrivals]\nx = poisson\n", 9),
    ("[network]\ndelivery = carrier-pigeon\n", 7),
])
def test_syntax_errors_carry_line(body, line):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(scenario_text(body))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_unknown_section_is_syntax_error():
    with pytest.raises(ScenarioSyntaxError):
        parse_scenario("[nonsense]\n")


def test_count_expansion_and_groups():
    sc = parse_scenario(scenario_text(
        "[devices]\nac = type2 power=1 min_dcd=10min max_dcp=30min count=3\n"
        "[arrivals]\nac = periodic interval=1h\n"))
    assert [d.id for d in sc.devices] == ["ac01", "ac02", "ac03"]
    assert sc.arrivals[0].target == ("ac01", "ac02", "ac03")


def test_network_section():
    sc = parse_scenario(scenario_text(
        "[devices]\na = type1 power=1\n[network]\nperiod = 2s\n"
        "delivery = blackout 10-12,40-45\n"))
    assert sc.round_cfg.period_s == 2
    assert sc.round_cfg.delivery == Blackout(((10, 12), (40, 45)))
    sc = parse_scenario(scenario_text("[network]\ndelivery = iid p=0.9\n"))
    assert sc.round_cfg.delivery == IidLoss(0.9)


@pytest.mark.parametrize("name", ["dcube", "setting1", "setting2", "mindcd-sweep",
                                  "delay-sweep", "empty"])
def test_render_round_trip(name):
    sc = load_scenario(resolve_scenario(name))
    again = parse_scenario(render_scenario(sc), sc.name)
    assert again == sc


def test_same_seed_same_events():
    sc = load_scenario(resolve_scenario("dcube"))
    assert scenario_events(sc) == scenario_events(sc)


def test_different_seed_different_events():
    from dataclasses import replace
    sc = load_scenario(resolve_scenario("dcube"))
    assert scenario_events(sc) != scenario_events(replace(sc, seed=sc.seed + 1))


@pytest.mark.parametrize("text,value", [("90", 90), ("15min", 900), ("2h", 7200),
                                        ("1.5m", 90), ("30 s", 30)])
def test_parse_duration(text, value):
    assert parse_duration(text) == value


def test_parse_rate_and_lists():
    assert parse_rate("10/h") == 10
    assert parse_rate("1/min") == 60
    assert parse_number_list("1/6, 1/3") == [pytest.approx(1 / 6), pytest.approx(1 / 3)]
    assert parse_number_list("5min,10min") == [300, 600]


def test_mode_runs():
    assert Mode.BOTH.runs == (Mode.COORDINATED, Mode.BASELINE)
    assert Mode("baseline").runs == (Mode.BASELINE,)


def test_sweep_transforms():
    sc = load_scenario(resolve_scenario("delay-sweep"))
    small = apply_parameter(sc, "contenders", 10)
    assert len(small.devices) == 10
    assert all(d.min_dcd_s == 300 for d in apply_parameter(small, "r", "1/6").devices)
    assert all(d.min_dcd_s == 600 for d in apply_parameter(small, "min_dcd_s", 600).devices)
    assert apply_parameter(small, "delivery_p", 0.5).round_cfg.delivery == IidLoss(0.5)
    with pytest.raises(InvalidDutyCycle):
        apply_parameter(sc, "min_dcd_s", 3600)
    with pytest.raises(ScenarioError):
        apply_parameter(sc, "contenders", 31)
    with pytest.raises(ScenarioError):
        apply_parameter(sc, "nope", 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.5, 30))
def test_events_sorted_and_in_horizon(seed, rate):
    events = gen_events(Poisson(("a", "b"), rate), 7200, np.random.default_rng(seed))
    assert events == sorted(events, key=RequestEvent.sort_key)
    assert all(0 <= e.time_s < 7200 for e in events)
