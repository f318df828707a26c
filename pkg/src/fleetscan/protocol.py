"""Agent/monitor wire protocol: packets, task steps, sync barrier, agent states.

Packets travel as newline-delimited JSON ``{"type": int, "body": {...}}``.
Type 5 is used in both directions; the body's ``phase`` tells an agent's
"done" report apart from the monitor's "release".
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

CONNECT_REQUEST = 0
CONNECTION_ID = 1
STATUS = 2
GEOFENCE = 3
TASK = 4
SYNC = 5
CLOSE = 6

ACTION_KINDS = ("takeoff", "goto", "land", "return_home", "wait")
EXCEPTION_KINDS = ("LowBattery", "GeoFenceBreach", "LinkUnhealthy")
PRIORITIES = ("normal", "high", "insert")


class ProtocolError(ValueError):
    pass


# -- body validation -------------------------------------------------------------

def _num(body: dict, key: str, lo: float | None = None) -> None:
    v = body[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ProtocolError(f"field {key!r} must be a finite number")
    if lo is not None and v < lo:
        raise ProtocolError(f"field {key!r} must be >= {lo}")


def _int(body: dict, key: str, lo: int = 0) -> None:
    v = body[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ProtocolError(f"field {key!r} must be an integer >= {lo}")


def _vec(body: dict, key: str) -> None:
    v = body[key]
    if not isinstance(v, list) or len(v) != 2:
        raise ProtocolError(f"field {key!r} must be a pair of numbers")
    for i, x in enumerate(v):
        _num({f"{key}[{i}]": x}, f"{key}[{i}]")


def _keys(body: dict, required: Sequence[str], optional: Sequence[str] = ()) -> None:
    for k in required:
        if k not in body:
            raise ProtocolError(f"missing field {k!r}")
    extra = set(body) - set(required) - set(optional)
    if extra:
        raise ProtocolError(f"unexpected field {sorted(extra)[0]!r}")


def _check_status(b: dict) -> None:
    _keys(b, ("connection_id", "pos", "vel", "battery", "t", "d", "step"), ("exception", "energy"))
    _int(b, "connection_id")
    _vec(b, "pos")
    _vec(b, "vel")
    _num(b, "battery", 0.0)
    _num(b, "t", 0.0)
    _num(b, "d", 0.0)
    _int(b, "step", -1)
    if "energy" in b:
        _num(b, "energy", 0.0)
    if "exception" in b and b["exception"] not in EXCEPTION_KINDS:
        raise ProtocolError("field 'exception' has an unknown value")


def _check_task(b: dict) -> None:
    _keys(b, ("step", "actions"), ("priority", "replace"))
    _int(b, "step")
    if not isinstance(b["actions"], list) or not b["actions"]:
        raise ProtocolError("field 'actions' must be a non-empty list")
    for a in b["actions"]:
        Action.from_json(a)
    if "priority" in b and b["priority"] not in PRIORITIES:
        raise ProtocolError("field 'priority' has an unknown value")
    if "replace" in b and not isinstance(b["replace"], bool):
        raise ProtocolError("field 'replace' must be a boolean")


def _check_sync(b: dict) -> None:
    _keys(b, ("phase", "step"), ("connection_id",))
    if b["phase"] not in ("done", "release"):
        raise ProtocolError("field 'phase' must be 'done' or 'release'")
    _int(b, "step")
    if "connection_id" in b:
        _int(b, "connection_id")


def _check_fence(b: dict) -> None:
    _keys(b, ("center", "radius"))
    _vec(b, "center")
    _num(b, "radius")
    if b["radius"] <= 0:
        raise ProtocolError("field 'radius' must be positive")


def _check_close(b: dict) -> None:
    _keys(b, (), ("reason",))
    if "reason" in b and not isinstance(b["reason"], str):
        raise ProtocolError("field 'reason' must be a string")


_CHECKS = {
    CONNECT_REQUEST: lambda b: _keys(b, ()),
    CONNECTION_ID: lambda b: (_keys(b, ("connection_id",)), _int(b, "connection_id")),
    STATUS: _check_status,
    GEOFENCE: _check_fence,
    TASK: _check_task,
    SYNC: _check_sync,
    CLOSE: _check_close,
}


@dataclass(frozen=True)
class Packet:
    ptype: int
    body: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.ptype, bool) or not isinstance(self.ptype, int) or self.ptype not in _CHECKS:
            raise ProtocolError(f"field 'type' has unknown packet type {self.ptype!r}")
        if not isinstance(self.body, dict):
            raise ProtocolError("field 'body' must be an object")
        _CHECKS[self.ptype](self.body)


def encode(p: Packet) -> bytes:
    _CHECKS[p.ptype](p.body)
    text = json.dumps({"type": p.ptype, "body": p.body}, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)
    return text.encode("utf-8") + b"\n"


def decode(line: bytes | str) -> Packet:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("line is not valid UTF-8") from None
    if not line.endswith("\n") or "\n" in line[:-1]:
        raise ProtocolError("framing: expected exactly one line terminated by a newline")
    try:
        obj = json.loads(line, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ProtocolError("packet must be a JSON object")
    _keys(obj, ("type", "body"))
    return Packet(obj["type"], obj["body"])


def _reject_constant(name: str):
    raise ProtocolError(f"non-finite number {name} not allowed")


# -- actions and steps -------------------------------------------------------------

@dataclass(frozen=True)
class Action:
    kind: str
    connection_id: int
    sync: bool = False
    relative_distance: tuple[float, float] | None = None
    absolute_destination: tuple[float, float] | None = None
    duration: float | None = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ProtocolError(f"field 'kind' has unknown action {self.kind!r}")
        if isinstance(self.connection_id, bool) or not isinstance(self.connection_id, int) or self.connection_id < 0:
            raise ProtocolError("field 'connection_id' must be an integer >= 0")
        if not isinstance(self.sync, bool):
            raise ProtocolError("field 'sync' must be a boolean")
        has_rel = self.relative_distance is not None
        has_abs = self.absolute_destination is not None
        if self.kind == "goto" and has_rel == has_abs:
            raise ProtocolError("goto needs exactly one of relative_distance/absolute_destination")
        if self.kind != "goto" and (has_rel or has_abs):
            raise ProtocolError(f"{self.kind} takes no destination")
        if self.duration is not None:
            _num({"duration": self.duration}, "duration", 0.0)

    def to_json(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind, "connection_id": self.connection_id, "sync": self.sync}
        if self.relative_distance is not None:
            out["relative_distance"] = list(self.relative_distance)
        if self.absolute_destination is not None:
            out["absolute_destination"] = list(self.absolute_destination)
        if self.duration is not None:
            out["duration"] = self.duration
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Action":
        if not isinstance(obj, dict):
            raise ProtocolError("action must be an object")
        _keys(obj, ("kind", "connection_id"), ("sync", "relative_distance", "absolute_destination", "duration"))
        kw = {}
        for key in ("relative_distance", "absolute_destination"):
            if key in obj:
                _vec(obj, key)
                kw[key] = tuple(obj[key])
        return cls(obj["kind"], obj["connection_id"], obj.get("sync", False), duration=obj.get("duration"), **kw)


@dataclass(frozen=True)
class Step:
    index: int
    actions: tuple[Action, ...]

    def __post_init__(self):
        syncs = [i for i, a in enumerate(self.actions) if a.sync]
        if len(syncs) > 1:
            raise ProtocolError("a step holds at most one sync action")
        if syncs and syncs[0] != len(self.actions) - 1:
            raise ProtocolError("the sync action must close its step")

    @property
    def synced(self) -> bool:
        return bool(self.actions) and self.actions[-1].sync


def partition_steps(task: Iterable[Action], start: int = 0) -> list[Step]:
    """Cut a task after every sync action."""
    steps, cur = [], []
    for a in task:
        cur.append(a)
        if a.sync:
            steps.append(Step(start + len(steps), tuple(cur)))
            cur = []
    if cur:
        steps.append(Step(start + len(steps), tuple(cur)))
    return steps


def load_task(obj: list) -> list[Action]:
    if not isinstance(obj, list):
        raise ProtocolError("task file must be a JSON array of actions")
    return [Action.from_json(a) for a in obj]


def task_packet(step: Step, priority: str = "normal", replace: bool = False) -> Packet:
    body: dict[str, Any] = {"step": step.index, "actions": [a.to_json() for a in step.actions]}
    if priority != "normal":
        body["priority"] = priority
    if replace:
        body["replace"] = True
    return Packet(TASK, body)


# -- synchronization barrier ---------------------------------------------------------

class SyncBarrier:
    """Releases step ``s`` once every registered agent has reported it done.

    Steps are released strictly in order.  A report for an already released
    step is ignored and logged; a report for a step beyond the open one is
    rejected, since no agent can finish a step it has not been released into.
    """

    def __init__(self, agents: Iterable[int] = (), start: int = 0):
        self.agents: set[int] = set(agents)
        self.current = start
        self.pending: set[int] = set()
        self.released: list[int] = []
        self.events: list[tuple] = []
        self._started = False

    def register(self, agent_id: int) -> None:
        if self._started:
            raise ProtocolError(f"agent {agent_id} joined after synchronization started")
        self.agents.add(agent_id)

    def restart(self, step: int) -> None:
        """Reopen the barrier at ``step`` after the task has been rewritten."""
        self.current = step
        self.pending.clear()

    def on_sync(self, agent_id: int, step: int) -> list[tuple[int, Packet]]:
        if agent_id not in self.agents:
            raise ProtocolError(f"unknown agent {agent_id}")
        if step < self.current:
            self.events.append(("stale", agent_id, step))
            return []
        if step > self.current:
            raise ProtocolError(f"agent {agent_id} reported step {step} while step {self.current} is open")
        self._started = True
        if agent_id in self.pending:
            self.events.append(("duplicate", agent_id, step))
            return []
        self.pending.add(agent_id)
        if self.pending != self.agents:
            return []
        self.pending = set()
        self.released.append(step)
        self.current = step + 1
        release = Packet(SYNC, {"phase": "release", "step": step})
        return [(a, release) for a in sorted(self.agents)]


# -- exceptions ------------------------------------------------------------------------

@dataclass(frozen=True)
class GeoFence:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError("geo-fence radius must be positive")

    def inside(self, pos) -> bool:
        return math.hypot(pos[0] - self.center[0], pos[1] - self.center[1]) <= self.radius


def exception_check(pos, battery: float, contact_age: float, fence: GeoFence,
                    battery_floor: float = 0.20, link_timeout: float = 5.0) -> list[str]:
    """Conditions violated right now (no episode memory)."""
    out = []
    if battery < battery_floor:
        out.append("LowBattery")
    if not fence.inside(pos):
        out.append("GeoFenceBreach")
    if contact_age > link_timeout:
        out.append("LinkUnhealthy")
    return out


class ExceptionMonitor:
    """Raises each exception once per continuous violation episode."""

    def __init__(self, fence: GeoFence, battery_floor: float = 0.20, link_timeout: float = 5.0):
        self.fence = fence
        self.battery_floor = battery_floor
        self.link_timeout = link_timeout
        self.active: set[str] = set()

    def check(self, pos, battery: float, contact_age: float = 0.0) -> list[str]:
        now = exception_check(pos, battery, contact_age, self.fence, self.battery_floor, self.link_timeout)
        fresh = [k for k in now if k not in self.active]
        self.active = set(now)
        return fresh


# -- agent state machine -----------------------------------------------------------------

class AgentState(Enum):
    DISCONNECTED = "Disconnected"
    HANDSHAKING = "Handshaking"
    IDLE = "Idle"
    EXECUTING = "ExecutingStep"
    AWAITING = "AwaitingRelease"
    EMERGENCY = "Emergency"
    CLOSED = "Closed"


CONNECTED = (AgentState.IDLE, AgentState.EXECUTING, AgentState.AWAITING, AgentState.EMERGENCY)


@dataclass(frozen=True)
class Connect:
    pass


@dataclass(frozen=True)
class Receive:
    packet: Packet


@dataclass(frozen=True)
class ActionDone:
    pass


@dataclass(frozen=True)
class StatusTick:
    status: dict


@dataclass(frozen=True)
class ExceptionRaised:
    kind: str


@dataclass(frozen=True)
class Shutdown:
    reason: str = ""


@dataclass(frozen=True)
class Command:
    """Flight-controller instruction produced by the agent."""
    action: Action | None
    note: str = ""


class Agent:
    """UAV-side protocol state machine; one event in, packets/commands out."""

    def __init__(self):
        self.state = AgentState.DISCONNECTED
        self.connection_id: int | None = None
        self.fence: GeoFence | None = None
        self.queue: deque[Step] = deque()
        self.current: Step | None = None
        self.index = 0
        self.suspended: list[tuple[Step, int]] = []
        self.reason = ""
        self.main_step = -1

    # helpers
    def _emergency(self, reason: str) -> list:
        self.state = AgentState.EMERGENCY
        self.reason = reason
        return [Command(None, f"emergency: {reason}")]

    def _start(self, step: Step) -> list:
        self.current, self.index = step, 0
        self.state = AgentState.EXECUTING
        return [Command(step.actions[0])]

    def _next_step(self) -> list:
        if self.suspended:
            self.current, self.index = self.suspended.pop()
            self.state = AgentState.EXECUTING
            return [Command(self.current.actions[self.index], "resume")]
        if self.queue:
            step = self.queue.popleft()
            self.main_step = step.index
            return self._start(step)
        self.current = None
        self.state = AgentState.IDLE
        return []

    def step(self, event) -> list:
        st = self.state
        if st == AgentState.CLOSED:
            return []
        if isinstance(event, Connect):
            if st != AgentState.DISCONNECTED:
                return self._emergency("connect while already connected")
            self.state = AgentState.HANDSHAKING
            return [Packet(CONNECT_REQUEST, {})]
        if isinstance(event, Shutdown):
            self.state = AgentState.CLOSED
            body = {"reason": event.reason} if event.reason else {}
            return [Packet(CLOSE, body)]
        if isinstance(event, StatusTick):
            if st not in CONNECTED or self.connection_id is None:
                return []
            body = dict(event.status)
            body["connection_id"] = self.connection_id
            body["step"] = self.main_step
            return [Packet(STATUS, body)]
        if isinstance(event, ExceptionRaised):
            if st not in CONNECTED:
                return []
            if event.kind in ("LowBattery", "GeoFenceBreach"):
                self.suspended.clear()
                self.queue.clear()
                self.current = None
                self.state = AgentState.EMERGENCY
                self.reason = event.kind
            return []
        if isinstance(event, ActionDone):
            if st != AgentState.EXECUTING or self.current is None:
                return self._emergency("action completed while not executing")
            action = self.current.actions[self.index]
            if action.sync:
                self.state = AgentState.AWAITING
                return [Packet(SYNC, {"phase": "done", "step": self.current.index,
                                      "connection_id": self.connection_id})]
            self.index += 1
            if self.index < len(self.current.actions):
                return [Command(self.current.actions[self.index])]
            return self._next_step()
        if isinstance(event, Receive):
            return self._receive(event.packet)
        raise ProtocolError(f"unknown event {event!r}")

    def _receive(self, p: Packet) -> list:
        st = self.state
        if p.ptype == CLOSE:
            self.state = AgentState.CLOSED
            return [Command(None, "closed")]
        if p.ptype == CONNECTION_ID:
            if st != AgentState.HANDSHAKING:
                return self._emergency("unexpected connection id")
            self.connection_id = p.body["connection_id"]
            self.state = AgentState.IDLE
            return []
        if st not in CONNECTED or self.connection_id is None:
            return self._emergency(f"packet type {p.ptype} before handshake")
        if p.ptype == GEOFENCE:
            self.fence = GeoFence(tuple(p.body["center"]), p.body["radius"])
            return []
        if p.ptype == TASK:
            step = Step(p.body["step"], tuple(Action.from_json(a) for a in p.body["actions"]))
            prio = p.body.get("priority", "normal")
            if p.body.get("replace") or prio == "high":
                self.queue.clear()
                self.suspended.clear()
                self.main_step = step.index
                return self._start(step)
            if prio == "insert":
                if st != AgentState.EXECUTING or self.current is None:
                    return []  # nothing in flight to detour from
                self.suspended.append((self.current, self.index))
                return self._start(step)
            if st == AgentState.EMERGENCY:
                return []
            self.queue.append(step)
            if st == AgentState.IDLE:
                return self._next_step()
            return []
        if p.ptype == SYNC:
            if p.body["phase"] != "release":
                return self._emergency("agent received a done report")
            if st != AgentState.AWAITING or self.current is None or p.body["step"] != self.current.index:
                return []
            return self._next_step()
        return self._emergency(f"unexpected packet type {p.ptype}")
