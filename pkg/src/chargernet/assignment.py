"""User-to-charger assignment: nearest, individual selection, optimal batch.

Batch semantics: members of one batch that land on the same charger queue
behind each other in user order, so the k-th of them sees the snapshot's
committed energy plus the demand of the k earlier members. With a common
demand this is a slot-expanded bipartite matching (charger j offers slots
k = 0, 1, ... with nondecreasing cost) and is solved exactly.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

from .cost import ChargerStatus, CostBreakdown, distance_cost, estimated_cost, estimated_overall
from .matching import min_cost_assignment
from .scenario import ChargerSpec, UserRequest, Weights

SCHEMES = ("nearest", "individual", "optimal")
BRUTE_FORCE_LIMIT = 10**6


class NoChargerError(ValueError):
    pass


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class AssignmentDecision:
    user: int
    charger: int
    estimate: CostBreakdown | None
    scheme: str
    decided_at: float


def nearest(
    user: UserRequest,
    chargers: Sequence[ChargerSpec],
    effort_unit_m: float = 100.0,
    now: float | None = None,
) -> AssignmentDecision:
    if not chargers:
        raise NoChargerError("no chargers available")
    best = min(chargers, key=lambda c: (distance_cost(user.position, c.position, effort_unit_m), c.id))
    return AssignmentDecision(user.id, best.id, None, "nearest",
                              user.arrival_time if now is None else now)


def individual_select(
    user: UserRequest,
    statuses: Sequence[ChargerStatus],
    weights: Weights,
    effort_unit_m: float = 100.0,
    now: float | None = None,
) -> AssignmentDecision:
    if not statuses:
        raise NoChargerError("no charger statuses available")
    best, best_cost = None, math.inf
    for st in sorted(statuses, key=lambda s: s.charger.id):
        if not st.has_load:
            raise ValueError(f"status of charger {st.charger.id} carries no load information")
        c = estimated_overall(user.demand, st, user.position, weights, effort_unit_m)
        if best is None or c < best_cost:
            best, best_cost = st, c
    est = estimated_cost(user.demand, best, user.position, weights, effort_unit_m)
    return AssignmentDecision(user.id, best.charger.id, est, "individual",
                              user.arrival_time if now is None else now)


def evaluate_batch(
    users: Sequence[UserRequest],
    statuses: Sequence[ChargerStatus],
    weights: Weights,
    choice: Sequence[int],
    effort_unit_m: float = 100.0,
) -> tuple[float, list[CostBreakdown]]:
    """Total and per-user estimated cost of ``choice`` (indices into ``statuses``).

    Users sharing a charger queue in the order they appear in ``users``.
    """
    queued: dict[int, float] = {}
    parts = []
    total = 0.0
    for user, k in zip(users, choice):
        extra = queued.get(k, 0.0)
        est = estimated_cost(user.demand, statuses[k], user.position, weights, effort_unit_m, extra)
        queued[k] = extra + user.demand
        parts.append(est)
        total += est.overall
    return total, parts


def _decisions(users, statuses, weights, choice, scheme, now, effort_unit_m):
    _, parts = evaluate_batch(users, statuses, weights, choice, effort_unit_m)
    return [
        AssignmentDecision(u.id, statuses[k].charger.id, est, scheme,
                           u.arrival_time if now is None else now)
        for u, k, est in zip(users, choice, parts)
    ]


def slot_costs(
    users: Sequence[UserRequest],
    statuses: Sequence[ChargerStatus],
    weights: Weights,
    effort_unit_m: float = 100.0,
) -> list[list[float]]:
    """Rows = users, columns = (charger, slot) ordered by charger then slot."""
    demands = {u.demand for u in users}
    if len(demands) > 1:
        raise ValueError("slot expansion needs a common demand within the batch")
    t = users[0].demand
    b = len(users)
    for st in statuses:
        if not st.has_load:
            raise ValueError(f"status of charger {st.charger.id} carries no load information")
    rows = []
    for user in users:
        row = []
        for st in statuses:
            for k in range(b):
                row.append(estimated_overall(t, st, user.position, weights, effort_unit_m, k * t))
        rows.append(row)
    return rows


def optimal_batch(
    users: Sequence[UserRequest],
    statuses: Sequence[ChargerStatus],
    weights: Weights,
    effort_unit_m: float = 100.0,
    now: float | None = None,
) -> list[AssignmentDecision]:
    if not statuses:
        raise NoChargerError("no charger statuses available")
    if not users:
        return []
    statuses = sorted(statuses, key=lambda s: s.charger.id)
    cols = min_cost_assignment(slot_costs(users, statuses, weights, effort_unit_m))
    choice = [c // len(users) for c in cols]
    return _decisions(users, statuses, weights, choice, "optimal", now, effort_unit_m)


def brute_force_batch(
    users: Sequence[UserRequest],
    statuses: Sequence[ChargerStatus],
    weights: Weights,
    effort_unit_m: float = 100.0,
    now: float | None = None,
) -> list[AssignmentDecision]:
    """Exhaustive minimizer; first minimum in lexicographic order of charger indices wins."""
    if not statuses:
        raise NoChargerError("no charger statuses available")
    if not users:
        return []
    if len(statuses) ** len(users) > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(
            f"{len(statuses)}^{len(users)} assignments exceed {BRUTE_FORCE_LIMIT}"
        )
    statuses = sorted(statuses, key=lambda s: s.charger.id)
    best, best_total = None, math.inf
    for choice in itertools.product(range(len(statuses)), repeat=len(users)):
        total, _ = evaluate_batch(users, statuses, weights, choice, effort_unit_m)
        if total < best_total:
            best, best_total = choice, total
    return _decisions(users, statuses, weights, best, "optimal", now, effort_unit_m)


def total_cost(decisions: Sequence[AssignmentDecision]) -> float:
    return sum(d.estimate.overall for d in decisions)
