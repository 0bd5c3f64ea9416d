"""The network server: latest charger snapshots, status queries, periodic batch assignment."""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .assignment import AssignmentDecision, optimal_batch
from .cost import ChargerStatus
from .scenario import ChargerSpec, UserRequest, Weights


class UnknownChargerError(KeyError):
    pass


@dataclass(frozen=True)
class StatusReport:
    charger_id: int
    status: ChargerStatus
    report_time: float


@dataclass(frozen=True)
class InformationPolicy:
    mode: str = "full"  # "full" or "none"
    staleness: float = math.inf  # minutes

    def __post_init__(self):
        if self.mode not in ("full", "none"):
            raise ValueError(f"unknown information mode {self.mode!r}")
        if self.staleness < 0:
            raise ValueError("staleness must be >= 0")


class Registry:
    """Serialized store of charger snapshots; every public call holds one lock."""

    def __init__(self, chargers: Iterable[ChargerSpec], effort_unit_m: float = 100.0):
        self._chargers = {c.id: c for c in chargers}
        self._latest: dict[int, StatusReport] = {}
        self._pending: list[UserRequest] = []
        self._lock = threading.RLock()
        self.effort_unit_m = effort_unit_m

    @property
    def chargers(self) -> list[ChargerSpec]:
        return [self._chargers[k] for k in sorted(self._chargers)]

    def report_status(self, report: StatusReport) -> bool:
        with self._lock:
            if report.charger_id not in self._chargers:
                raise UnknownChargerError(report.charger_id)
            prev = self._latest.get(report.charger_id)
            if prev is not None and report.report_time < prev.report_time:
                raise ValueError(
                    f"report for charger {report.charger_id} at {report.report_time} "
                    f"precedes stored report at {prev.report_time}"
                )
            self._latest[report.charger_id] = report
            return True

    def last_report_time(self, charger_id: int) -> float | None:
        with self._lock:
            rep = self._latest.get(charger_id)
            return None if rep is None else rep.report_time

    def query_statuses(self, now: float, policy: InformationPolicy = InformationPolicy()) -> list[ChargerStatus]:
        with self._lock:
            if policy.mode == "none":
                return [ChargerStatus(c, None, None, None, now) for c in self.chargers]
            out = []
            for cid in sorted(self._latest):
                rep = self._latest[cid]
                if now - rep.report_time <= policy.staleness:
                    out.append(rep.status)
            return out

    def submit(self, user: UserRequest) -> None:
        with self._lock:
            self._pending.append(user)

    @property
    def pending(self) -> list[UserRequest]:
        with self._lock:
            return list(self._pending)

    def run_batch(
        self,
        now: float,
        pending_users: Sequence[UserRequest] | None = None,
        weights: Weights = Weights(),
        policy: InformationPolicy = InformationPolicy(),
    ) -> list[AssignmentDecision]:
        """Assign the pending users (or ``pending_users``) jointly and clear the pending set."""
        with self._lock:
            users = list(self._pending if pending_users is None else pending_users)
            taken = {u.id for u in users}
            self._pending = [u for u in self._pending if u.id not in taken]
            if not users:
                return []
            statuses = self.query_statuses(now, policy)
            return optimal_batch(users, statuses, weights, self.effort_unit_m, now=now)


def snapshot(status: ChargerStatus, now: float) -> StatusReport:
    return StatusReport(status.charger.id, replace(status, as_of=now), now)
