import os

import hypothesis
import pytest

from chargernet.scenario import (AreaGrid, ArrivalModel, ChargerSpec, Scenario, UserRequest,
                                 build_default_scenario)

hypothesis.settings.register_profile("default", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def default_scenario():
    return build_default_scenario()


def single_charger_scenario(capacity=3, demand=20.0, **kw):
    grid = AreaGrid(1, 1, 125.0)
    charger = ChargerSpec(id=1, area=1, position=grid.center(1), capacity=capacity, price=0.33)
    kw.setdefault("warmup", 0.0)
    kw.setdefault("arrivals", ArrivalModel((0.0,)))
    return Scenario(grid=grid, chargers=(charger,), demand=demand, **kw)


def users_at(times, position=(62.5, 62.5), demand=20.0, area=1):
    return [UserRequest(i, t, area, position, demand) for i, t in enumerate(times)]


ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
