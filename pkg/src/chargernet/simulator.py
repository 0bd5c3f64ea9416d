"""Discrete-event simulation of users, the server and multi-slot FIFO chargers.

Times are minutes. Event ties resolve as completions, then arrivals, then
batch ticks, then insertion order. Delay is measured from the arrival
instant, so time spent waiting for a batch tick counts.
"""
from __future__ import annotations

import heapq
import math
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from . import assignment
from .cost import ChargerStatus, CostBreakdown, UserOutcome, estimated_cost, realized_cost
from .protocol import Fault, cached_session
from .registry import InformationPolicy, Registry, StatusReport
from .scenario import Scenario, UserRequest, generate_arrivals, shaped_rates

COMPLETE, REPORT, ARRIVAL, BATCH = 0, 1, 2, 3
EVENT_KINDS = {COMPLETE: "service-complete", REPORT: "status-report", ARRIVAL: "arrival",
               BATCH: "batch-tick"}
BOOKKEEPING_TOL = 1e-6


class ConfigurationError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class AreaMetrics:
    area: int
    users: int
    mean_delay_cost: float | None
    mean_price_cost: float | None
    mean_effort_cost: float | None
    mean_overall_cost: float | None


@dataclass(frozen=True)
class MetricsReport:
    scheme: str
    seed: int
    users: int
    warmup_excluded: int
    mean_overall: float | None
    mean_delay: float | None
    mean_price: float | None
    mean_effort: float | None
    mean_estimated_overall: float | None
    per_area: tuple[AreaMetrics, ...]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimulationResult:
    report: MetricsReport
    outcomes: list[UserOutcome]
    events: int = 0
    audited_events: int = 0


@dataclass
class _Session:
    user: UserRequest
    start: float
    end: float  # planned completion; remaining demand is ``end - now``
    abort_at: float | None


@dataclass
class _Charger:
    spec: object
    committed: float = 0.0
    last_update: float = 0.0
    in_service: dict = field(default_factory=dict)  # user id -> _Session
    waiting: deque = field(default_factory=deque)
    join_log: list = field(default_factory=list)
    start_log: list = field(default_factory=list)

    def advance(self, now: float) -> None:
        self.committed -= len(self.in_service) * (now - self.last_update)
        if self.committed < 0:
            self.committed = 0.0
        self.last_update = now

    def committed_at(self, now: float) -> float:
        return max(0.0, self.committed - len(self.in_service) * (now - self.last_update))

    def recompute(self, now: float) -> float:
        return math.fsum([s.end - now for s in self.in_service.values()] + [u.demand for u in self.waiting])

    def status(self, now: float) -> ChargerStatus:
        return ChargerStatus(self.spec, self.committed_at(now), len(self.in_service), len(self.waiting), now)


class Simulation:
    def __init__(
        self,
        scenario: Scenario,
        scheme: str,
        seed: int | None = None,
        *,
        users: Sequence[UserRequest] | None = None,
        fault_plans: Mapping[int, Sequence[Fault]] | None = None,
        audit: bool = False,
    ):
        if scheme not in assignment.SCHEMES:
            raise ConfigurationError(f"unknown scheme {scheme!r}; expected one of {assignment.SCHEMES}")
        if not scenario.chargers:
            raise ConfigurationError("scenario has no chargers")
        self.scenario = scenario
        self.scheme = scheme
        self.seed = scenario.seed if seed is None else seed
        self.users = list(generate_arrivals(scenario, self.seed) if users is None else users)
        self._by_id = {u.id: u for u in self.users}
        self.fault_plans = {k: tuple(v) for k, v in (fault_plans or {}).items()}
        self.audit = audit
        self.registry = Registry(scenario.chargers, scenario.effort_unit_m)
        self.policy = InformationPolicy("full", scenario.staleness)
        self.live = scenario.staleness == 0
        self.horizon = scenario.arrivals.horizon * 60.0
        self.chargers = {c.id: _Charger(c) for c in scenario.chargers}
        self._heap: list = []
        self._seq = 0
        self._ticks: set[int] = set()
        self._decisions: dict[int, tuple[int, float, CostBreakdown | None]] = {}
        self._attempts: dict[int, int] = {}
        self._starts: dict[int, float] = {}
        self.outcomes: list[UserOutcome] = []
        self.arrived = 0
        self.events = 0

    # -- event plumbing --
    def _push(self, time: float, kind: int, payload) -> None:
        heapq.heappush(self._heap, (time, kind, self._seq, payload))
        self._seq += 1

    def _report(self, ch: _Charger, now: float) -> None:
        self.registry.report_status(StatusReport(ch.spec.id, ch.status(now), now))

    def _changed(self, ch: _Charger, now: float) -> None:
        # with lag, chargers only report on the periodic epochs
        if self.live:
            self._report(ch, now)

    def _refresh(self, now: float) -> None:
        if self.live:
            for ch in self.chargers.values():
                self._report(ch, now)

    def _report_all(self, k: int) -> None:
        now = k * self.scenario.staleness
        for ch in self.chargers.values():
            self._report(ch, now)
        # decisions can happen up to one batch interval past the last arrival
        if now + self.scenario.staleness <= self.horizon + self.scenario.batch_interval:
            self._push((k + 1) * self.scenario.staleness, REPORT, k + 1)

    # -- charger dynamics --
    def _join(self, user: UserRequest, cid: int, now: float) -> None:
        ch = self.chargers[cid]
        ch.advance(now)
        ch.committed += user.demand
        ch.waiting.append(user)
        ch.join_log.append(user.id)
        self._start_waiting(ch, now)
        self._changed(ch, now)

    def _start_waiting(self, ch: _Charger, now: float) -> None:
        while ch.waiting and len(ch.in_service) < ch.spec.capacity:
            user = ch.waiting.popleft()
            attempt = self._attempts.get(user.id, 0) + 1
            self._attempts[user.id] = attempt
            plan = self.fault_plans.get(user.id, ()) if attempt == 1 else ()
            trace = cached_session(ch.spec.standard, user.demand, plan)
            end = now + user.demand
            abort_at = None if trace.status == "completed" else now + trace.end_minutes
            ch.in_service[user.id] = _Session(user, now, end, abort_at)
            ch.start_log.append(user.id)
            self._starts[user.id] = now
            self._push(end if abort_at is None else abort_at, COMPLETE, (ch.spec.id, user.id))

    def _finish(self, cid: int, uid: int, now: float) -> None:
        ch = self.chargers[cid]
        ch.advance(now)
        sess = ch.in_service.pop(uid)
        if sess.abort_at is not None:
            # charge is lost; the user queues again for the full demand
            ch.committed -= sess.end - now
            ch.committed += sess.user.demand
            ch.waiting.append(sess.user)
            ch.join_log.append(uid)
        else:
            self._record(sess, ch, now)
        self._start_waiting(ch, now)
        self._changed(ch, now)

    def _record(self, sess: _Session, ch: _Charger, now: float) -> None:
        u = sess.user
        cid, decided_at, estimate = self._decisions[u.id]
        self.outcomes.append(UserOutcome(
            user=u.id, charger=cid, area=u.area, charger_area=ch.spec.area,
            assignment_time=u.arrival_time, decided_at=decided_at,
            service_start=sess.start, completion_time=now,
            origin=u.position, charger_position=ch.spec.position,
            demand=u.demand, price_rate=ch.spec.price, estimate=estimate,
            attempts=self._attempts[u.id],
        ))

    # -- decisions --
    def _decide_now(self, user: UserRequest, now: float) -> None:
        sc = self.scenario
        if self.scheme == "nearest":
            d = assignment.nearest(user, self.registry.chargers, sc.effort_unit_m, now=now)
            # what the server would have estimated; the user never sees it
            est = estimated_cost(user.demand, self.chargers[d.charger].status(now), user.position,
                                 sc.weights, sc.effort_unit_m)
        else:
            self._refresh(now)
            d = assignment.individual_select(user, self.registry.query_statuses(now, self.policy),
                                             sc.weights, sc.effort_unit_m, now=now)
            est = d.estimate
        self._decisions[user.id] = (d.charger, now, est)
        self._join(user, d.charger, now)

    def _batch(self, now: float) -> None:
        self._refresh(now)
        decisions = self.registry.run_batch(now, weights=self.scenario.weights, policy=self.policy)
        for d in decisions:
            self._decisions[d.user] = (d.charger, now, d.estimate)
        for d in decisions:
            self._join(self._by_id[d.user], d.charger, now)

    def _arrive(self, user: UserRequest, now: float) -> None:
        self.arrived += 1
        if self.scheme == "optimal":
            self.registry.submit(user)
            k = math.ceil(now / self.scenario.batch_interval)
            if k not in self._ticks:
                self._ticks.add(k)
                self._push(k * self.scenario.batch_interval, BATCH, k)
        else:
            self._decide_now(user, now)

    # -- audit --
    def _check(self, now: float) -> None:
        in_service = sum(len(c.in_service) for c in self.chargers.values())
        waiting = sum(len(c.waiting) for c in self.chargers.values())
        pending = len(self.registry.pending)
        total = len(self.outcomes) + in_service + waiting + pending + (len(self.users) - self.arrived)
        if total != len(self.users):
            raise InvariantError(f"t={now}: user conservation broken ({total} != {len(self.users)})")
        for c in self.chargers.values():
            if len(c.in_service) > c.spec.capacity:
                raise InvariantError(f"t={now}: charger {c.spec.id} over capacity")
            if abs(c.committed_at(now) - c.recompute(now)) > BOOKKEEPING_TOL:
                raise InvariantError(
                    f"t={now}: charger {c.spec.id} committed energy {c.committed_at(now)} "
                    f"!= recomputed {c.recompute(now)}"
                )
            if c.start_log != c.join_log[: len(c.start_log)]:
                raise InvariantError(f"t={now}: charger {c.spec.id} served out of FIFO order")

    def run(self) -> SimulationResult:
        for u in self.users:
            self._push(u.arrival_time, ARRIVAL, u)
        if self.live:
            self._refresh(0.0)
        else:
            self._push(0.0, REPORT, 0)
        audited = 0
        while self._heap:
            now, kind, _, payload = heapq.heappop(self._heap)
            self.events += 1
            if kind == COMPLETE:
                self._finish(payload[0], payload[1], now)
            elif kind == REPORT:
                self._report_all(payload)
            elif kind == ARRIVAL:
                self._arrive(payload, now)
            else:
                self._batch(now)
            if self.audit:
                self._check(now)
                audited += 1
        if len(self.outcomes) != len(self.users):
            raise InvariantError("simulation drained with unfinished users")
        return SimulationResult(self._metrics(), sorted(self.outcomes, key=lambda o: o.user),
                                self.events, audited)

    def _metrics(self) -> MetricsReport:
        sc = self.scenario
        cutoff = sc.warmup * 60.0
        kept = [o for o in sorted(self.outcomes, key=lambda o: o.user) if o.assignment_time >= cutoff]
        costs = [realized_cost(o, sc.weights, sc.effort_unit_m) for o in kept]
        per_area = []
        for c in sorted(sc.chargers, key=lambda c: c.area):
            group = [cb for o, cb in zip(kept, costs) if o.charger_area == c.area]
            per_area.append(AreaMetrics(
                area=c.area, users=len(group),
                mean_delay_cost=_mean(cb.delay for cb in group),
                mean_price_cost=_mean(cb.price for cb in group),
                mean_effort_cost=_mean(cb.effort for cb in group),
                mean_overall_cost=_mean(cb.overall for cb in group),
            ))
        return MetricsReport(
            scheme=self.scheme, seed=self.seed, users=len(kept),
            warmup_excluded=len(self.outcomes) - len(kept),
            mean_overall=_mean(cb.overall for cb in costs),
            mean_delay=_mean(cb.delay for cb in costs),
            mean_price=_mean(cb.price for cb in costs),
            mean_effort=_mean(cb.effort for cb in costs),
            mean_estimated_overall=_mean(o.estimate.overall for o in kept),
            per_area=tuple(per_area),
        )


def _mean(values) -> float | None:
    vals = list(values)
    return math.fsum(vals) / len(vals) if vals else None


def simulate(scenario: Scenario, scheme: str, seed: int | None = None, **kwargs) -> SimulationResult:
    return Simulation(scenario, scheme, seed, **kwargs).run()


def run(scenario: Scenario, scheme: str, seed: int | None = None) -> MetricsReport:
    return simulate(scenario, scheme, seed).report


# --- replications ---------------------------------------------------------

@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    std: float
    ci_low: float
    ci_high: float

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2


def summarize(values: Sequence[float], level: float = 0.95) -> Summary:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("nothing to summarize")
    mean = float(math.fsum(x) / x.size)
    if x.size == 1:
        return Summary(1, mean, 0.0, math.nan, math.nan)
    std = float(np.std(x, ddof=1))
    half = float(stats.t.ppf(0.5 + level / 2, x.size - 1)) * std / math.sqrt(x.size)
    return Summary(int(x.size), mean, std, mean - half, mean + half)


@dataclass(frozen=True)
class Replications:
    reports: tuple[MetricsReport, ...]
    summary: Summary
    estimated: Summary


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("CHARGERNET_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items, workers):
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))  # order-stable


def run_replications(scenario: Scenario, scheme: str, seeds: Sequence[int],
                     workers: int | None = None) -> Replications:
    if not seeds:
        raise ValueError("need at least one seed")
    reports = _map(lambda s: run(scenario, scheme, s), list(seeds), workers)
    usable = [r for r in reports if r.mean_overall is not None]
    if not usable:
        nan = Summary(0, math.nan, math.nan, math.nan, math.nan)
        return Replications(tuple(reports), nan, nan)
    return Replications(
        tuple(reports),
        summarize([r.mean_overall for r in usable]),
        summarize([r.mean_estimated_overall for r in usable]),
    )


@dataclass(frozen=True)
class SweepPoint:
    ratio: float
    scheme: str
    mean_overall_cost: float
    ci_low: float
    ci_high: float
    mean_estimated_cost: float


def sweep_ratio(base: Scenario, scheme: str, ratios: Sequence[float], seeds: Sequence[int],
                workers: int | None = None) -> list[SweepPoint]:
    total = base.arrivals.total_rate
    areas = base.grid.n_areas
    out = []
    for r in ratios:
        sc = base.with_rates(shaped_rates(total, r, areas))
        rep = run_replications(sc, scheme, seeds, workers)
        out.append(SweepPoint(float(r), scheme, rep.summary.mean, rep.summary.ci_low,
                              rep.summary.ci_high, rep.estimated.mean))
    return out
