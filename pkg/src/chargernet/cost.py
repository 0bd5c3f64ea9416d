"""Delay, price and effort costs: estimated before assignment, realized after service."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import ChargerSpec, Weights


class NotFinishedError(ValueError):
    pass


@dataclass(frozen=True)
class CostBreakdown:
    delay_raw: float  # minutes
    price_raw: float  # cents
    effort_raw: float  # effort units (distance / effort_unit_m)
    weights: Weights

    @property
    def delay(self) -> float:
        return self.weights.w1 * self.delay_raw

    @property
    def price(self) -> float:
        return self.weights.w2 * self.price_raw

    @property
    def effort(self) -> float:
        return self.weights.w3 * self.effort_raw

    @property
    def overall(self) -> float:
        return self.delay + self.price + self.effort


@dataclass(frozen=True)
class ChargerStatus:
    """Snapshot of one charger. Load fields are None when the load is not disclosed."""

    charger: ChargerSpec
    committed_energy: float | None  # T_j, charging-minutes still owed
    in_service: int | None
    queued: int | None
    as_of: float = 0.0

    @property
    def has_load(self) -> bool:
        return self.committed_energy is not None


@dataclass(frozen=True)
class UserOutcome:
    user: int
    charger: int
    area: int  # origin area of the user
    charger_area: int
    assignment_time: float  # clock start for delay; the arrival instant
    decided_at: float
    service_start: float | None
    completion_time: float | None
    origin: tuple[float, float]
    charger_position: tuple[float, float]
    demand: float
    price_rate: float  # cents per minute at the assigned charger
    estimate: CostBreakdown | None = None
    attempts: int = 1

    @property
    def finished(self) -> bool:
        return self.completion_time is not None

    @property
    def price_paid(self) -> float:
        return self.price_rate * self.demand


def distance_cost(a: tuple[float, float], b: tuple[float, float], effort_unit_m: float = 100.0) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1]) / effort_unit_m


def estimated_cost(
    demand: float,
    status: ChargerStatus,
    user_position: tuple[float, float],
    weights: Weights,
    effort_unit_m: float = 100.0,
    extra_energy: float = 0.0,
) -> CostBreakdown:
    """Pre-assignment cost estimate of sending a user to the charger in ``status``.

    ``extra_energy`` is demand queued ahead of the user that the snapshot does
    not yet include (earlier members of the same batch).
    """
    if not status.has_load:
        raise ValueError(f"status of charger {status.charger.id} carries no load information")
    c = status.charger
    return CostBreakdown(
        delay_raw=(status.committed_energy + extra_energy + demand) / c.capacity,
        price_raw=c.price * demand,
        effort_raw=distance_cost(user_position, c.position, effort_unit_m),
        weights=weights,
    )


def estimated_overall(
    demand: float,
    status: ChargerStatus,
    user_position: tuple[float, float],
    weights: Weights,
    effort_unit_m: float = 100.0,
    extra_energy: float = 0.0,
) -> float:
    """``estimated_cost(...).overall`` without building the breakdown; bit-identical."""
    c = status.charger
    delay = (status.committed_energy + extra_energy + demand) / c.capacity
    effort = math.hypot(user_position[0] - c.position[0], user_position[1] - c.position[1]) / effort_unit_m
    return weights.w1 * delay + weights.w2 * (c.price * demand) + weights.w3 * effort


def realized_cost(outcome: UserOutcome, weights: Weights, effort_unit_m: float = 100.0) -> CostBreakdown:
    if not outcome.finished:
        raise NotFinishedError(f"user {outcome.user} has not finished charging")
    return CostBreakdown(
        delay_raw=outcome.completion_time - outcome.assignment_time,
        price_raw=outcome.price_paid,
        effort_raw=distance_cost(outcome.origin, outcome.charger_position, effort_unit_m),
        weights=weights,
    )
