"""Qi and A4WP charging-session state machines with an abstract message exchange.

Step functions are pure table lookups. ``run_session`` drives a full session
(handshake, periodic control loop, termination) and records a trace that can
be replayed through the same step functions.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class ProtocolViolation(ValueError):
    def __init__(self, state, event):
        self.state, self.event = state, event
        super().__init__(f"illegal transition: ({_name(state)}, {_name(event)})")


class PowerLimitError(ValueError):
    pass


def _name(x) -> str:
    return x.value if isinstance(x, Enum) else str(x)


# --- Qi -------------------------------------------------------------------

class QiPhase(str, Enum):
    START = "Start"
    PING = "Ping"
    ID_CONFIG = "IdentificationConfiguration"
    POWER_TRANSFER = "PowerTransfer"
    COMPLETE = "Complete"
    ABORTED = "Aborted"


class QiEvent(str, Enum):
    DEVICE_DETECTED = "device-detected"
    SIGNAL_STRENGTH = "signal-strength-reported"
    NO_RESPONSE = "no-response"
    ID_AND_POWER = "id-and-power-indicated"
    CONTROL_DATA = "control-data"
    CHARGE_COMPLETE = "charge-complete"
    FAULT = "fault"
    REMOVAL = "device-removed"


QI_TERMINAL = frozenset({QiPhase.COMPLETE, QiPhase.ABORTED})

QI_TRANSITIONS: dict[tuple[QiPhase, QiEvent], QiPhase] = {
    (QiPhase.START, QiEvent.DEVICE_DETECTED): QiPhase.PING,
    (QiPhase.PING, QiEvent.SIGNAL_STRENGTH): QiPhase.ID_CONFIG,
    (QiPhase.PING, QiEvent.NO_RESPONSE): QiPhase.START,
    (QiPhase.ID_CONFIG, QiEvent.ID_AND_POWER): QiPhase.POWER_TRANSFER,
    (QiPhase.POWER_TRANSFER, QiEvent.CONTROL_DATA): QiPhase.POWER_TRANSFER,
    (QiPhase.POWER_TRANSFER, QiEvent.CHARGE_COMPLETE): QiPhase.COMPLETE,
}
for _p in QiPhase:
    if _p not in QI_TERMINAL:
        QI_TRANSITIONS[(_p, QiEvent.FAULT)] = QiPhase.ABORTED
        QI_TRANSITIONS[(_p, QiEvent.REMOVAL)] = QiPhase.ABORTED


def qi_step(phase: QiPhase, event: QiEvent) -> QiPhase:
    try:
        return QI_TRANSITIONS[(QiPhase(phase), QiEvent(event))]
    except (KeyError, ValueError):
        raise ProtocolViolation(phase, event) from None


# frequency bands in kHz, power in W
QI_CATEGORIES = {
    "low": (5.0, 110.0, 205.0),
    "medium": (120.0, 80.0, 300.0),
}


@dataclass(frozen=True)
class QiPowerProfile:
    category: str = "low"
    requested_power: float = 5.0
    frequency: float = 140.0

    def __post_init__(self):
        if self.category not in QI_CATEGORIES:
            raise PowerLimitError(f"unknown Qi power category {self.category!r}")
        pmax, fmin, fmax = QI_CATEGORIES[self.category]
        if not 0 < self.requested_power <= pmax:
            raise PowerLimitError(
                f"{self.category} category allows up to {pmax} W, requested {self.requested_power} W"
            )
        if not fmin <= self.frequency <= fmax:
            raise PowerLimitError(
                f"{self.category} category operates on {fmin}-{fmax} kHz, got {self.frequency} kHz"
            )


# --- A4WP -----------------------------------------------------------------

class PtuState(str, Enum):
    CONFIGURATION = "Configuration"
    POWER_SAVE = "PowerSave"
    LOW_POWER = "LowPower"
    POWER_TRANSFER = "PowerTransfer"
    LOCAL_FAULT = "LocalFault"
    LATCHING_FAULT = "LatchingFault"


class PtuEvent(str, Enum):
    SELF_CHECK_PASSED = "self-check-passed"
    IMPEDANCE_CHANGE = "impedance-change"
    REGISTRATION_COMPLETE = "registration-complete"
    CONTROL_UPDATE = "control-update"
    SESSIONS_ENDED = "sessions-ended"
    LOCAL_FAULT = "local-fault"
    FAULT_CLEARED = "fault-cleared"
    ROGUE_OBJECT = "rogue-object"
    SYSTEM_ERROR = "system-error"
    RESTART = "restart"


PTU_TRANSITIONS: dict[tuple[PtuState, PtuEvent], PtuState] = {
    (PtuState.CONFIGURATION, PtuEvent.SELF_CHECK_PASSED): PtuState.POWER_SAVE,
    (PtuState.POWER_SAVE, PtuEvent.IMPEDANCE_CHANGE): PtuState.LOW_POWER,
    (PtuState.LOW_POWER, PtuEvent.REGISTRATION_COMPLETE): PtuState.POWER_TRANSFER,
    (PtuState.POWER_TRANSFER, PtuEvent.CONTROL_UPDATE): PtuState.POWER_TRANSFER,
    (PtuState.POWER_TRANSFER, PtuEvent.SESSIONS_ENDED): PtuState.POWER_SAVE,
    (PtuState.POWER_TRANSFER, PtuEvent.LOCAL_FAULT): PtuState.LOCAL_FAULT,
    (PtuState.POWER_TRANSFER, PtuEvent.ROGUE_OBJECT): PtuState.LATCHING_FAULT,
    (PtuState.POWER_TRANSFER, PtuEvent.SYSTEM_ERROR): PtuState.LATCHING_FAULT,
    (PtuState.LOCAL_FAULT, PtuEvent.FAULT_CLEARED): PtuState.POWER_SAVE,
    (PtuState.LATCHING_FAULT, PtuEvent.RESTART): PtuState.CONFIGURATION,
}
# latching fault swallows everything but an explicit restart
for _e in PtuEvent:
    if _e is not PtuEvent.RESTART:
        PTU_TRANSITIONS[(PtuState.LATCHING_FAULT, _e)] = PtuState.LATCHING_FAULT


def a4wp_ptu_step(state: PtuState, event: PtuEvent) -> PtuState:
    try:
        return PTU_TRANSITIONS[(PtuState(state), PtuEvent(event))]
    except (KeyError, ValueError):
        raise ProtocolViolation(state, event) from None


class PruState(str, Enum):
    NULL = "Null"
    BOOT = "Boot"
    ON = "On"
    SYSTEM_ERROR_STATE = "SystemErrorState"
    SYSTEM_ERROR = "SystemError"


class PruEvent(str, Enum):
    POWER_APPLIED = "power-applied"
    LINK_ESTABLISHED = "link-established"
    DYNAMIC_UPDATE = "dynamic-update"
    ALERT = "alert"
    SHUTDOWN_REQUIRED = "shutdown-required"
    POWER_REMOVED = "power-removed"


PRU_TRANSITIONS: dict[tuple[PruState, PruEvent], PruState] = {
    (PruState.NULL, PruEvent.POWER_APPLIED): PruState.BOOT,
    (PruState.BOOT, PruEvent.LINK_ESTABLISHED): PruState.ON,
    (PruState.BOOT, PruEvent.POWER_REMOVED): PruState.NULL,
    (PruState.ON, PruEvent.DYNAMIC_UPDATE): PruState.ON,
    (PruState.ON, PruEvent.ALERT): PruState.SYSTEM_ERROR_STATE,
    (PruState.ON, PruEvent.POWER_REMOVED): PruState.NULL,
    (PruState.SYSTEM_ERROR_STATE, PruEvent.SHUTDOWN_REQUIRED): PruState.SYSTEM_ERROR,
}


def a4wp_pru_step(state: PruState, event: PruEvent) -> PruState:
    try:
        return PRU_TRANSITIONS[(PruState(state), PruEvent(event))]
    except (KeyError, ValueError):
        raise ProtocolViolation(state, event) from None


class A4wpMessage(str, Enum):
    ADVERTISEMENT = "Advertisement"
    CONNECTION_REQUEST = "ConnectionRequest"
    PRU_STATIC = "PruStaticParams"
    PTU_STATIC = "PtuStaticParams"
    PRU_DYNAMIC = "PruDynamicParams"
    PRU_CONTROL = "PruControl"
    PRU_ALERT = "PruAlert"


# message -> messages that must already have been exchanged
MESSAGE_PREREQUISITES: dict[A4wpMessage, frozenset[A4wpMessage]] = {
    A4wpMessage.ADVERTISEMENT: frozenset(),
    A4wpMessage.CONNECTION_REQUEST: frozenset({A4wpMessage.ADVERTISEMENT}),
    A4wpMessage.PRU_STATIC: frozenset({A4wpMessage.CONNECTION_REQUEST}),
    A4wpMessage.PTU_STATIC: frozenset({A4wpMessage.PRU_STATIC}),
    A4wpMessage.PRU_DYNAMIC: frozenset({A4wpMessage.PTU_STATIC}),
    A4wpMessage.PRU_CONTROL: frozenset(
        {A4wpMessage.PRU_STATIC, A4wpMessage.PTU_STATIC, A4wpMessage.PRU_DYNAMIC}
    ),
    A4wpMessage.PRU_ALERT: frozenset({A4wpMessage.PRU_STATIC}),
}


def check_message(seen: Iterable[A4wpMessage], kind: A4wpMessage) -> None:
    """Raise ProtocolViolation if ``kind`` may not be sent after ``seen``."""
    kind = A4wpMessage(kind)
    seen = set(seen)
    if not MESSAGE_PREREQUISITES[kind] <= seen:
        raise ProtocolViolation(sorted(m.value for m in seen), kind)
    # the PRU stops advertising once a connection request arrives
    if kind is A4wpMessage.ADVERTISEMENT and A4wpMessage.CONNECTION_REQUEST in seen:
        raise ProtocolViolation(sorted(m.value for m in seen), kind)


# --- sessions -------------------------------------------------------------

QI_FAULTS = {"fault": QiEvent.FAULT, "removal": QiEvent.REMOVAL}
PRU_ALERT_FAULTS = {
    "over-temp": "over-temperature",
    "over-voltage": "over-voltage",
    "over-current": "over-current",
}
A4WP_FAULTS = frozenset(PRU_ALERT_FAULTS) | {"shutdown", "rogue-object", "local-fault"}

NOMINAL_DYNAMIC = {"current_a": 0.5, "voltage_v": 5.0, "temperature_c": 30.0, "status": "ok"}
FAULT_DYNAMIC = {
    "over-temp": {"temperature_c": 85.0, "status": "alert"},
    "over-voltage": {"voltage_v": 25.0, "status": "alert"},
    "over-current": {"current_a": 2.5, "status": "alert"},
    "shutdown": {"temperature_c": 95.0, "status": "alert"},
}
A4WP_DEFAULT_PTU_LIMIT_W = 16.0


@dataclass(frozen=True)
class Fault:
    time: float  # minutes into the session
    kind: str

    @classmethod
    def parse(cls, text: str) -> "Fault":
        """``kind@minutes``, e.g. ``over-temp@10``."""
        kind, sep, at = text.partition("@")
        if not sep or not kind:
            raise ValueError(f"fault must look like kind@minutes, got {text!r}")
        return cls(float(at), kind)


@dataclass(frozen=True)
class TraceEntry:
    time_ms: int
    actor: str
    kind: str  # "state", "event" or "message"
    label: str
    detail: tuple[tuple[str, object], ...] = ()

    def render(self) -> str:
        if self.kind == "event":
            text = "!" + self.label
        else:
            text = self.label
        if self.detail:
            text += "(" + ",".join(f"{k}={v}" for k, v in self.detail) + ")"
        return f"{self.time_ms} {self.actor} {text}"


@dataclass(frozen=True)
class SessionTrace:
    standard: str
    entries: tuple[TraceEntry, ...]
    status: str  # "completed", "aborted" or "error"
    end_ms: int = 0

    def states(self, actor: str) -> list[str]:
        return [e.label for e in self.entries if e.kind == "state" and e.actor == actor]

    def messages(self) -> list[str]:
        return [e.label for e in self.entries if e.kind == "message"]

    def to_text(self) -> str:
        return "\n".join(e.render() for e in self.entries) + "\n"

    @property
    def end_minutes(self) -> float:
        return self.end_ms / 60000.0


class _Recorder:
    def __init__(self):
        self.entries: list[TraceEntry] = []
        self.states: dict[str, object] = {}
        self.seen: set[A4wpMessage] = set()

    def state(self, t, actor, value):
        self.states[actor] = value
        self.entries.append(TraceEntry(t, actor, "state", _name(value)))

    def event(self, t, actor, event, step, detail=()):
        self.entries.append(TraceEntry(t, actor, "event", _name(event), tuple(detail)))
        new = step(self.states[actor], event)
        if new != self.states[actor]:
            self.state(t, actor, new)

    def message(self, t, actor, kind, detail=()):
        check_message(self.seen, kind)
        self.seen.add(kind)
        self.entries.append(TraceEntry(t, actor, "message", kind.value, tuple(detail)))


def _first_fault(fault_plan: Sequence[Fault] | None, valid: Iterable[str]):
    valid = set(valid)
    faults = sorted(fault_plan or (), key=lambda f: f.time)
    for f in faults:
        if f.kind not in valid:
            raise ValueError(f"unknown fault kind {f.kind!r}; expected one of {sorted(valid)}")
    return faults[0] if faults else None


def run_session(
    standard: str,
    demand: float,
    fault_plan: Sequence[Fault] | None = None,
    *,
    power: float | None = None,
    category: str = "low",
    frequency: float | None = None,
    control_period_ms: int = 250,
    handshake_min: float = 0.0,
    ptu_power_limit: float = A4WP_DEFAULT_PTU_LIMIT_W,
) -> SessionTrace:
    """Run one charging session of ``demand`` minutes. Actor clocks are in ms."""
    if not demand > 0:
        raise ValueError("demand must be > 0")
    if control_period_ms <= 0:
        raise ValueError("control period must be > 0")
    std = standard.lower()
    if std == "qi":
        return _run_qi(demand, fault_plan, power, category, frequency, control_period_ms, handshake_min)
    if std == "a4wp":
        return _run_a4wp(demand, fault_plan, power, ptu_power_limit, control_period_ms, handshake_min)
    raise ValueError(f"unknown standard {standard!r}")


@functools.lru_cache(maxsize=64)
def cached_session(standard: str, demand: float, fault_plan: tuple[Fault, ...] = ()) -> SessionTrace:
    """Memoized fault-aware session with default parameters (sessions are pure values)."""
    return run_session(standard, demand, fault_plan)


def _control_times(start_ms: int, end_ms: int, period: int):
    t = start_ms + period
    while t < end_ms:
        yield t
        t += period


def _run_qi(demand, fault_plan, power, category, frequency, period, handshake_min):
    pmax, fmin, fmax = QI_CATEGORIES.get(category, (None, None, None))
    if pmax is None:
        raise PowerLimitError(f"unknown Qi power category {category!r}")
    prof = QiPowerProfile(
        category,
        pmax if power is None else power,
        (fmin + fmax) / 2 if frequency is None else frequency,
    )
    fault = _first_fault(fault_plan, QI_FAULTS)
    hs = int(round(handshake_min * 60000))
    end = hs + int(round(demand * 60000))
    fault_ms = None if fault is None else max(hs, int(round(fault.time * 60000)))
    if fault_ms is not None and fault_ms >= end:
        fault_ms = None

    rec = _Recorder()
    rec.state(0, "charger", QiPhase.START)
    rec.event(0, "charger", QiEvent.DEVICE_DETECTED, qi_step)
    rec.entries.append(TraceEntry(0, "device", "event", QiEvent.SIGNAL_STRENGTH.value))
    _apply(rec, 0, "charger", QiEvent.SIGNAL_STRENGTH, qi_step)
    rec.entries.append(TraceEntry(
        hs, "device", "event", QiEvent.ID_AND_POWER.value,
        (("id", "device-1"), ("power_w", prof.requested_power), ("category", prof.category),
         ("frequency_khz", prof.frequency)),
    ))
    _apply(rec, hs, "charger", QiEvent.ID_AND_POWER, qi_step)
    stop = end if fault_ms is None else fault_ms
    for t in _control_times(hs, stop, period):
        rec.entries.append(TraceEntry(t, "device", "event", QiEvent.CONTROL_DATA.value))
        _apply(rec, t, "charger", QiEvent.CONTROL_DATA, qi_step)
    if fault_ms is None:
        rec.entries.append(TraceEntry(end, "device", "event", QiEvent.CHARGE_COMPLETE.value))
        _apply(rec, end, "charger", QiEvent.CHARGE_COMPLETE, qi_step)
        return SessionTrace("Qi", tuple(rec.entries), "completed", end)
    rec.event(fault_ms, "charger", QI_FAULTS[fault.kind], qi_step, (("kind", fault.kind),))
    return SessionTrace("Qi", tuple(rec.entries), "aborted", fault_ms)


def _apply(rec, t, actor, event, step):
    # the event line was emitted by the peer; the state change lands on ``actor``
    new = step(rec.states[actor], event)
    if new != rec.states[actor]:
        rec.state(t, actor, new)


def _dyn(extra=None):
    d = dict(NOMINAL_DYNAMIC)
    if extra:
        d.update(extra)
    return tuple(d.items())


def _run_a4wp(demand, fault_plan, power, ptu_limit, period, handshake_min):
    requested = 5.0 if power is None else power
    if not 0 < requested <= ptu_limit:
        raise PowerLimitError(f"PTU delivers up to {ptu_limit} W, PRU requested {requested} W")
    fault = _first_fault(fault_plan, A4WP_FAULTS)
    hs = int(round(handshake_min * 60000))
    end = hs + int(round(demand * 60000))
    fault_ms = None if fault is None else max(hs, int(round(fault.time * 60000)))
    if fault_ms is not None and fault_ms >= end:
        fault_ms = None

    M = A4wpMessage
    rec = _Recorder()
    rec.state(0, "PTU", PtuState.CONFIGURATION)
    rec.event(0, "PTU", PtuEvent.SELF_CHECK_PASSED, a4wp_ptu_step)
    rec.state(0, "PRU", PruState.NULL)
    rec.event(0, "PTU", PtuEvent.IMPEDANCE_CHANGE, a4wp_ptu_step)
    rec.event(0, "PRU", PruEvent.POWER_APPLIED, a4wp_pru_step)
    # device detection
    rec.message(0, "PRU", M.ADVERTISEMENT)
    rec.message(0, "PTU", M.CONNECTION_REQUEST)
    rec.event(0, "PRU", PruEvent.LINK_ESTABLISHED, a4wp_pru_step)
    # information exchange
    rec.message(0, "PRU", M.PRU_STATIC, (("max_power_w", requested),))
    rec.message(0, "PTU", M.PTU_STATIC, (("max_power_w", ptu_limit),))
    rec.message(hs, "PRU", M.PRU_DYNAMIC, _dyn())
    rec.message(hs, "PTU", M.PRU_CONTROL, (("enable", True), ("power_w", requested)))
    rec.event(hs, "PTU", PtuEvent.REGISTRATION_COMPLETE, a4wp_ptu_step)
    # charging control
    stop = end if fault_ms is None else fault_ms
    for t in _control_times(hs, stop, period):
        rec.message(t, "PRU", M.PRU_DYNAMIC, _dyn())
        rec.message(t, "PTU", M.PRU_CONTROL, (("enable", True), ("power_w", requested)))
    if fault_ms is None:
        rec.message(end, "PRU", M.PRU_ALERT, (("reason", "charge-complete"),))
        rec.event(end, "PRU", PruEvent.POWER_REMOVED, a4wp_pru_step)
        rec.event(end, "PTU", PtuEvent.SESSIONS_ENDED, a4wp_ptu_step)
        return SessionTrace("A4WP", tuple(rec.entries), "completed", end)

    t, kind = fault_ms, fault.kind
    if kind in PRU_ALERT_FAULTS or kind == "shutdown":
        reason = PRU_ALERT_FAULTS.get(kind, "over-temperature")
        rec.message(t, "PRU", M.PRU_DYNAMIC, _dyn(FAULT_DYNAMIC[kind]))
        rec.event(t, "PRU", PruEvent.ALERT, a4wp_pru_step, (("reason", reason),))
        rec.message(t, "PRU", M.PRU_ALERT, (("reason", reason),))
        if kind == "shutdown":
            rec.event(t, "PRU", PruEvent.SHUTDOWN_REQUIRED, a4wp_pru_step)
            rec.event(t, "PTU", PtuEvent.SYSTEM_ERROR, a4wp_ptu_step)
        else:
            rec.event(t, "PTU", PtuEvent.SESSIONS_ENDED, a4wp_ptu_step)
        return SessionTrace("A4WP", tuple(rec.entries), "error", t)
    if kind == "rogue-object":
        rec.event(t, "PTU", PtuEvent.ROGUE_OBJECT, a4wp_ptu_step)
        rec.event(t, "PRU", PruEvent.POWER_REMOVED, a4wp_pru_step)
    else:  # local-fault
        rec.event(t, "PTU", PtuEvent.LOCAL_FAULT, a4wp_ptu_step)
        rec.event(t, "PRU", PruEvent.POWER_REMOVED, a4wp_pru_step)
        rec.event(t, "PTU", PtuEvent.FAULT_CLEARED, a4wp_ptu_step)
    return SessionTrace("A4WP", tuple(rec.entries), "aborted", t)


# --- replay ---------------------------------------------------------------

_QI_TARGET = {e.value: e for e in QiEvent}
_PTU_EVENTS = {e.value: e for e in PtuEvent}
_PRU_EVENTS = {e.value: e for e in PruEvent}


def replay(trace: SessionTrace) -> tuple[dict[str, str], str]:
    """Re-run the trace's events through the step functions.

    Returns the final state per actor and the derived terminal status. Raises
    ProtocolViolation if any event or message is out of order.
    """
    if trace.standard == "Qi":
        states = {"charger": QiPhase.START}
        for e in trace.entries:
            if e.kind == "event":
                states["charger"] = qi_step(states["charger"], _QI_TARGET[e.label])
        final = states["charger"]
        if final is QiPhase.COMPLETE:
            status = "completed"
        elif final is QiPhase.ABORTED:
            status = "aborted"
        else:
            status = "incomplete"
        return {"charger": final.value}, status

    states = {"PTU": PtuState.CONFIGURATION, "PRU": PruState.NULL}
    seen: set[A4wpMessage] = set()
    faulted = False
    for e in trace.entries:
        if e.kind == "event":
            if e.actor == "PTU":
                states["PTU"] = a4wp_ptu_step(states["PTU"], _PTU_EVENTS[e.label])
                faulted |= e.label in (PtuEvent.ROGUE_OBJECT.value, PtuEvent.LOCAL_FAULT.value)
            else:
                states["PRU"] = a4wp_pru_step(states["PRU"], _PRU_EVENTS[e.label])
        elif e.kind == "message":
            check_message(seen, A4wpMessage(e.label))
            seen.add(A4wpMessage(e.label))
    pru = states["PRU"]
    if pru in (PruState.SYSTEM_ERROR_STATE, PruState.SYSTEM_ERROR):
        status = "error"
    elif faulted:
        status = "aborted"
    elif A4wpMessage.PRU_ALERT in seen and pru is PruState.NULL:
        status = "completed"
    else:
        status = "incomplete"
    return {k: v.value for k, v in states.items()}, status
