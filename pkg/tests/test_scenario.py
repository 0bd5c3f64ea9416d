import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chargernet.scenario import (AreaGrid, ChargerSpec, ScenarioError, build_default_scenario,
                                 generate_arrivals, load_scenario, price_schedule,
                                 save_scenario, scenario_from_dict, scenario_to_dict,
                                 shaped_rates)


def test_default_scenario(default_scenario):
    sc = default_scenario
    assert len(sc.chargers) == 16
    assert all(c.capacity == 3 for c in sc.chargers)
    assert sc.demand == 20.0
    assert (sc.weights.w1, sc.weights.w2, sc.weights.w3) == (1.0, 1.0, 1.0)
    assert sc.arrivals.total_rate == 96.0
    assert sorted(c.area for c in sc.chargers) == list(range(1, 17))
    c1, c2 = sc.chargers[0], sc.chargers[1]
    assert math.dist(c1.position, c2.position) == 125.0
    for c in sc.chargers:
        assert c.price == price_schedule(c.area)


def test_column_major_layout():
    g = AreaGrid(4, 4, 125.0)
    # areas 1-4 share the first column; area 5 starts the second
    assert len({g.center(j)[0] for j in (1, 2, 3, 4)}) == 1
    assert g.center(5)[0] - g.center(1)[0] == 125.0
    assert g.center(5)[1] == g.center(1)[1]
    assert len({g.center(j) for j in range(1, 17)}) == 16


def test_center_out_of_grid():
    with pytest.raises(ScenarioError):
        AreaGrid(4, 4, 125.0).center(17)


@pytest.mark.parametrize("j,expected", [(1, 0.33), (16, 1.53), (8, 0.89)])
def test_price_schedule(j, expected):
    assert price_schedule(j) == pytest.approx(expected, abs=1e-12)


def test_price_schedule_monotone_and_invalid():
    assert price_schedule(16) > price_schedule(1)
    with pytest.raises(ScenarioError):
        price_schedule(0)


def _ap_oracle(total, ratio, areas):
    # solve [sum = total, last = ratio * first] for (first, step) directly
    a = np.array([[areas, areas * (areas - 1) / 2], [1 - ratio, areas - 1]])
    first, step = np.linalg.solve(a, [total, 0.0])
    return first + step * np.arange(areas)


def test_shaped_rates_examples():
    assert shaped_rates(96, 1, 16) == pytest.approx([6.0] * 16, abs=1e-12)
    r = shaped_rates(96, 4, 16)
    assert r[0] == pytest.approx(2.4, abs=1e-12)
    assert r[-1] == pytest.approx(9.6, abs=1e-12)
    for ratio in (1, 2, 3, 4):
        assert math.fsum(shaped_rates(96, ratio, 16)) == pytest.approx(96, abs=1e-9)
        assert shaped_rates(96, ratio, 16)[0] == pytest.approx(12 / (1 + ratio), abs=1e-12)


@given(st.floats(0.1, 1000), st.floats(1, 50), st.integers(2, 40))
def test_shaped_rates_properties(total, ratio, areas):
    r = shaped_rates(total, ratio, areas)
    assert min(r) >= 0
    assert math.fsum(r) == pytest.approx(total, rel=1e-12, abs=1e-9)
    assert r[-1] / r[0] == pytest.approx(ratio, rel=1e-9)
    diffs = np.diff(r)
    assert np.allclose(diffs, diffs[0], rtol=1e-9, atol=1e-12)
    assert np.allclose(r, _ap_oracle(total, ratio, areas), rtol=1e-9)


def test_shaped_rates_errors():
    with pytest.raises(ScenarioError):
        shaped_rates(96, 0.5, 16)
    with pytest.raises(ScenarioError):
        shaped_rates(0, 2, 16)
    with pytest.raises(ScenarioError):
        shaped_rates(96, 2, 1)


def test_zero_rate_no_arrivals(default_scenario):
    assert generate_arrivals(default_scenario.with_rates([0] * 16), 3) == []


def test_arrivals_deterministic_and_sorted(default_scenario):
    a = generate_arrivals(default_scenario, 11)
    assert a == generate_arrivals(default_scenario, 11)
    assert a != generate_arrivals(default_scenario, 12)
    times = [u.arrival_time for u in a]
    assert times == sorted(times)
    assert all(0 <= t < 8 * 60 for t in times)
    assert [u.id for u in a] == list(range(len(a)))
    g = default_scenario.grid
    assert all(u.position == g.center(u.area) for u in a)


def test_arrival_counts_poisson(default_scenario):
    sc = default_scenario.with_rates([6.0] * 16)
    from dataclasses import replace
    sc = replace(sc, arrivals=replace(sc.arrivals, horizon=10.0))
    mean, sigma = 960, math.sqrt(960)
    counts = [len(generate_arrivals(sc, s)) for s in range(30)]
    assert all(abs(c - mean) <= 3 * sigma for c in counts)
    # the mean of 30 counts is tighter still
    assert abs(np.mean(counts) - mean) <= 3 * sigma / math.sqrt(30)


def test_uniform_in_area_positions(default_scenario):
    from dataclasses import replace
    sc = replace(default_scenario, arrivals=replace(default_scenario.arrivals,
                                                    position_policy="uniform-in-area"))
    users = generate_arrivals(sc, 2)
    for u in users:
        cx, cy = sc.grid.center(u.area)
        assert abs(u.position[0] - cx) <= 62.5 and abs(u.position[1] - cy) <= 62.5
    assert any(u.position != sc.grid.center(u.area) for u in users)


def test_json_round_trip(tmp_path, default_scenario):
    path = tmp_path / "s.json"
    save_scenario(default_scenario, path)
    assert load_scenario(path) == default_scenario


def test_json_defaults_fill_omitted_keys(default_scenario):
    assert scenario_from_dict({}) == default_scenario
    sc = scenario_from_dict({"weights": {"w3": 0.0}, "seed": 9})
    assert sc.weights.w3 == 0.0 and sc.weights.w1 == 1.0 and sc.seed == 9


@pytest.mark.parametrize("data,field", [
    ({"demand_min": -1}, "demand_min"),
    ({"grid": {"rows": "four"}}, "grid.rows"),
    ({"arrivals": {"rates": [1, 2]}}, "arrivals.rates"),
    ({"chargers": [{"capacity": 0}]}, "chargers[1].capacity"),
    ({"chargers": [{"technique": "inductive", "effective_range_m": 2.0}]}, "chargers[1].effective_range_m"),
    ({"bogus": 1}, "bogus"),
])
def test_malformed_scenarios_name_the_field(data, field):
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(data)
    assert info.value.field == field


def test_bad_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "seed": 1,\n  oops\n}\n')
    with pytest.raises(ScenarioError, match="line 3"):
        load_scenario(path)


def test_charger_validation():
    with pytest.raises(ScenarioError):
        ChargerSpec(1, 1, (0, 0), price=-1)
    with pytest.raises(ScenarioError):
        ChargerSpec(1, 1, (0, 0), standard="PMA")
    ChargerSpec(1, 1, (0, 0), technique="inductive", standard="Qi", effective_range=0.04,
                positioning="guided")


def test_to_dict_is_json(default_scenario):
    json.dumps(scenario_to_dict(default_scenario))
