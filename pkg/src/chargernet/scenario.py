"""Scenario description, the default 16-area campus, and arrival generation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import linkmodel

TECHNIQUES = ("inductive", "resonance", "microwave")
STANDARDS = ("Qi", "A4WP")
POSITION_POLICIES = ("area-center", "uniform-in-area")


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario; ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass(frozen=True)
class AreaGrid:
    rows: int = 4
    cols: int = 4
    spacing: float = 125.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ScenarioError("rows and cols must be >= 1", "grid")
        if not self.spacing > 0:
            raise ScenarioError("spacing must be > 0", "grid.spacing_m")

    @property
    def n_areas(self) -> int:
        return self.rows * self.cols

    def center(self, area: int) -> tuple[float, float]:
        # column-major: areas 1..rows fill the first column
        if not 1 <= area <= self.n_areas:
            raise ScenarioError(f"area {area} outside 1..{self.n_areas}", "area")
        col, row = divmod(area - 1, self.rows)
        return ((col + 0.5) * self.spacing, (row + 0.5) * self.spacing)


@dataclass(frozen=True)
class ChargerSpec:
    id: int
    area: int
    position: tuple[float, float]
    capacity: int = 3
    price: float = 0.33  # cents per charging-minute
    technique: str = "resonance"
    standard: str = "A4WP"
    effective_range: float = 2.0  # meters
    positioning: str | None = None  # Qi alignment mode, metadata only

    def __post_init__(self):
        if self.capacity < 1:
            raise ScenarioError("capacity must be >= 1", f"chargers[{self.id}].capacity")
        if self.price < 0:
            raise ScenarioError("price must be >= 0", f"chargers[{self.id}].price")
        if self.technique not in TECHNIQUES:
            raise ScenarioError(f"unknown technique {self.technique!r}", f"chargers[{self.id}].technique")
        if self.standard not in STANDARDS:
            raise ScenarioError(f"unknown standard {self.standard!r}", f"chargers[{self.id}].standard")
        try:
            linkmodel.validate_range(self.technique, self.effective_range)
        except ValueError as exc:
            raise ScenarioError(str(exc), f"chargers[{self.id}].effective_range_m") from None


@dataclass(frozen=True)
class Weights:
    w1: float = 1.0  # delay
    w2: float = 1.0  # price
    w3: float = 1.0  # effort

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3) < 0:
            raise ScenarioError("weights must be >= 0", "weights")

    def scaled(self, c: float) -> "Weights":
        return Weights(self.w1 * c, self.w2 * c, self.w3 * c)


@dataclass(frozen=True)
class ArrivalModel:
    per_area_rate: tuple[float, ...]  # users per hour
    horizon: float = 8.0  # hours
    position_policy: str = "area-center"

    def __post_init__(self):
        if any(r < 0 or not math.isfinite(r) for r in self.per_area_rate):
            raise ScenarioError("rates must be finite and >= 0", "arrivals.rates")
        if not self.horizon > 0:
            raise ScenarioError("horizon must be > 0", "arrivals.horizon_h")
        if self.position_policy not in POSITION_POLICIES:
            raise ScenarioError(
                f"position policy must be one of {POSITION_POLICIES}", "arrivals.position_policy"
            )

    @property
    def total_rate(self) -> float:
        return math.fsum(self.per_area_rate)


@dataclass(frozen=True)
class UserRequest:
    id: int
    arrival_time: float  # minutes
    area: int
    position: tuple[float, float]
    demand: float  # charging-minutes


@dataclass(frozen=True)
class Scenario:
    grid: AreaGrid
    chargers: tuple[ChargerSpec, ...]
    weights: Weights = field(default_factory=Weights)
    arrivals: ArrivalModel = field(default_factory=lambda: ArrivalModel((6.0,) * 16))
    demand: float = 20.0
    seed: int = 0
    batch_interval: float = 1.0  # minutes
    warmup: float = 1.0  # hours excluded from metrics
    effort_unit_m: float = 100.0
    # status-report period in minutes; 0 means every state change is visible at once
    staleness: float = 1.0

    def __post_init__(self):
        if not self.demand > 0:
            raise ScenarioError("demand must be > 0", "demand_min")
        if not self.batch_interval > 0:
            raise ScenarioError("batch interval must be > 0", "batch_interval_min")
        if not self.effort_unit_m > 0:
            raise ScenarioError("effort unit must be > 0", "effort_unit_m")
        if self.warmup < 0 or self.warmup >= self.arrivals.horizon:
            raise ScenarioError("warm-up must lie in [0, horizon)", "warmup_h")
        if self.staleness < 0:
            raise ScenarioError("staleness must be >= 0", "staleness_min")
        if len(self.arrivals.per_area_rate) != self.grid.n_areas:
            raise ScenarioError(
                f"expected {self.grid.n_areas} rates, got {len(self.arrivals.per_area_rate)}",
                "arrivals.rates",
            )
        ids = [c.id for c in self.chargers]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate charger ids", "chargers")
        for c in self.chargers:
            if not 1 <= c.area <= self.grid.n_areas:
                raise ScenarioError(f"area {c.area} outside grid", f"chargers[{c.id}].area")

    def with_rates(self, rates) -> "Scenario":
        return replace(self, arrivals=replace(self.arrivals, per_area_rate=tuple(float(r) for r in rates)))


def price_schedule(j: int) -> float:
    if j < 1:
        raise ScenarioError(f"invalid area {j}", "area")
    return 0.25 + j * 0.08


def build_default_scenario(**overrides) -> Scenario:
    grid = AreaGrid(4, 4, 125.0)
    chargers = tuple(
        ChargerSpec(id=j, area=j, position=grid.center(j), capacity=3, price=price_schedule(j))
        for j in range(1, grid.n_areas + 1)
    )
    base = Scenario(grid=grid, chargers=chargers, arrivals=ArrivalModel((6.0,) * grid.n_areas))
    return replace(base, **overrides) if overrides else base


def shaped_rates(total_rate: float, ratio: float, areas: int) -> list[float]:
    """Linearly increasing per-area rates with ``last/first == ratio`` summing to ``total_rate``."""
    if ratio < 1:
        raise ScenarioError(f"invalid ratio {ratio}; need >= 1", "ratio")
    if not total_rate > 0:
        raise ScenarioError("total rate must be > 0", "total_rate")
    if areas < 2:
        raise ScenarioError("need at least 2 areas", "areas")
    first = 2.0 * total_rate / (areas * (1.0 + ratio))
    step = first * (ratio - 1.0) / (areas - 1)
    return [first + k * step for k in range(areas)]


def generate_arrivals(scenario: Scenario, seed: int | None = None) -> list[UserRequest]:
    """Merged per-area Poisson arrivals over the horizon, sorted by time (minutes)."""
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    horizon_min = scenario.arrivals.horizon * 60.0
    half = scenario.grid.spacing / 2.0
    uniform = scenario.arrivals.position_policy == "uniform-in-area"
    raw = []
    for area, rate in enumerate(scenario.arrivals.per_area_rate, start=1):
        n = int(rng.poisson(rate * scenario.arrivals.horizon)) if rate > 0 else 0
        if n == 0:
            continue
        times = np.sort(rng.uniform(0.0, horizon_min, n))
        cx, cy = scenario.grid.center(area)
        if uniform:
            offsets = rng.uniform(-half, half, size=(n, 2))
            positions = [(cx + dx, cy + dy) for dx, dy in offsets.tolist()]
        else:
            positions = [(cx, cy)] * n
        raw.extend((float(t), area, pos) for t, pos in zip(times.tolist(), positions))
    raw.sort(key=lambda r: (r[0], r[1]))
    return [
        UserRequest(id=i, arrival_time=t, area=a, position=pos, demand=scenario.demand)
        for i, (t, a, pos) in enumerate(raw)
    ]


# --- scenario files -------------------------------------------------------

def _get(d: dict, key: str, default, where: str, kind=float):
    if key not in d:
        return default
    val = d[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if kind is int and isinstance(val, int) and not isinstance(val, bool):
        return val
    if kind is str and isinstance(val, str):
        return val
    raise ScenarioError(f"expected {kind.__name__}, got {val!r}", f"{where}{key}")


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    """Build a scenario from the JSON schema; omitted keys take the defaults."""
    if not isinstance(data, dict):
        raise ScenarioError("top level must be an object")
    known = {"grid", "chargers", "weights", "arrivals", "demand_min", "seed",
             "batch_interval_min", "warmup_h", "effort_unit_m", "staleness_min"}
    for key in data:
        if key not in known:
            raise ScenarioError("unknown key", key)
    g = data.get("grid", {})
    grid = AreaGrid(
        rows=_get(g, "rows", 4, "grid.", int),
        cols=_get(g, "cols", 4, "grid.", int),
        spacing=_get(g, "spacing_m", 125.0, "grid."),
    )
    if "chargers" in data:
        if not isinstance(data["chargers"], list):
            raise ScenarioError("must be a list", "chargers")
        chargers = []
        for k, c in enumerate(data["chargers"]):
            where = f"chargers[{k}]."
            if not isinstance(c, dict):
                raise ScenarioError("must be an object", f"chargers[{k}]")
            area = _get(c, "area", k + 1, where, int)
            pos = c.get("position", grid.center(area) if 1 <= area <= grid.n_areas else None)
            if pos is None or len(pos) != 2:
                raise ScenarioError("position must be [x, y]", f"{where}position")
            chargers.append(ChargerSpec(
                id=_get(c, "id", k + 1, where, int),
                area=area,
                position=(float(pos[0]), float(pos[1])),
                capacity=_get(c, "capacity", 3, where, int),
                price=_get(c, "price", price_schedule(max(area, 1)), where),
                technique=_get(c, "technique", "resonance", where, str),
                standard=_get(c, "standard", "A4WP", where, str),
                effective_range=_get(c, "effective_range_m", 2.0, where),
                positioning=c.get("positioning"),
            ))
        chargers = tuple(chargers)
    else:
        chargers = tuple(
            ChargerSpec(id=j, area=j, position=grid.center(j), price=price_schedule(j))
            for j in range(1, grid.n_areas + 1)
        )
    w = data.get("weights", {})
    weights = Weights(_get(w, "w1", 1.0, "weights."), _get(w, "w2", 1.0, "weights."),
                      _get(w, "w3", 1.0, "weights."))
    a = data.get("arrivals", {})
    rates = a.get("rates", [6.0] * grid.n_areas)
    if not isinstance(rates, list) or not all(isinstance(r, (int, float)) for r in rates):
        raise ScenarioError("must be a list of numbers", "arrivals.rates")
    arrivals = ArrivalModel(
        per_area_rate=tuple(float(r) for r in rates),
        horizon=_get(a, "horizon_h", 8.0, "arrivals."),
        position_policy=_get(a, "position_policy", "area-center", "arrivals.", str),
    )
    return Scenario(
        grid=grid,
        chargers=chargers,
        weights=weights,
        arrivals=arrivals,
        demand=_get(data, "demand_min", 20.0, ""),
        seed=_get(data, "seed", 0, "", int),
        batch_interval=_get(data, "batch_interval_min", 1.0, ""),
        warmup=_get(data, "warmup_h", 1.0, ""),
        effort_unit_m=_get(data, "effort_unit_m", 100.0, ""),
        staleness=_get(data, "staleness_min", 1.0, ""),
    )


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    return {
        "grid": {"rows": s.grid.rows, "cols": s.grid.cols, "spacing_m": s.grid.spacing},
        "chargers": [
            {"id": c.id, "area": c.area, "position": list(c.position), "capacity": c.capacity,
             "price": c.price, "technique": c.technique, "standard": c.standard,
             "effective_range_m": c.effective_range,
             **({"positioning": c.positioning} if c.positioning else {})}
            for c in s.chargers
        ],
        "weights": {"w1": s.weights.w1, "w2": s.weights.w2, "w3": s.weights.w3},
        "arrivals": {"rates": list(s.arrivals.per_area_rate), "horizon_h": s.arrivals.horizon,
                     "position_policy": s.arrivals.position_policy},
        "demand_min": s.demand,
        "seed": s.seed,
        "batch_interval_min": s.batch_interval,
        "warmup_h": s.warmup,
        "effort_unit_m": s.effort_unit_m,
        "staleness_min": s.staleness,
    }


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario file. JSON syntax errors surface as ScenarioError with the line."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data)


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(s), indent=2) + "\n")
