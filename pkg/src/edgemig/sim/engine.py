"""Deterministic event engine: logical clock, binary-heap queue with FIFO
tie-break, structured event log, and a latency-only message fabric."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Scenario configuration references unknown endpoints or bad values."""


class IncompleteLog(ValueError):
    """Event log is structurally malformed for the requested measurement."""


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


@dataclass(frozen=True)
class EventRecord:
    """One timestamped record: kind, acting endpoint, key=value payload."""

    time: float
    kind: str
    actor: str
    payload: tuple[tuple[str, str], ...] = ()

    def get(self, key: str, default=None) -> str | None:
        for k, v in self.payload:
            if k == key:
                return v
        return default

    def line(self) -> str:
        parts = [format(self.time, ".9f"), self.kind, self.actor]
        parts += [f"{k}={v}" for k, v in self.payload]
        return " ".join(parts)


def parse_line(line: str) -> EventRecord:
    fields = line.split()
    if len(fields) < 3:
        raise IncompleteLog(f"unparseable event line: {line!r}")
    payload = []
    for token in fields[3:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise IncompleteLog(f"bad payload token {token!r} in line {line!r}")
        payload.append((key, value))
    return EventRecord(float(fields[0]), fields[1], fields[2], tuple(payload))


class EventLog:
    """Append-only ordered record list, serializable one record per line."""

    def __init__(self):
        self.records: list[EventRecord] = []

    def emit(self, time: float, kind: str, actor: str, **payload):
        rec = EventRecord(
            time, kind, actor, tuple((k, _fmt(v)) for k, v in payload.items())
        )
        if self.records and rec.time < self.records[-1].time - 1e-12:
            raise ValueError("event log time went backwards")
        self.records.append(rec)
        return rec

    def of_kind(self, *kinds: str) -> list[EventRecord]:
        return [r for r in self.records if r.kind in kinds]

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def dump(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "EventLog":
        log = cls()
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    log.records.append(parse_line(line))
        return log


@dataclass(order=True)
class _Scheduled:
    time: float
    seq: int
    action: object = field(compare=False)


class Simulator:
    """Single logical clock; equal-time events run in scheduling order."""

    def __init__(self, seed: int = 0, log: EventLog | None = None):
        self.now = 0.0
        self.rng = random.Random(seed)
        self.log = log if log is not None else EventLog()
        self._heap: list[_Scheduled] = []
        self._seq = 0

    def schedule(self, delay: float, action) -> None:
        if delay < 0:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._heap, _Scheduled(self.now + delay, self._seq, action))
        self._seq += 1

    def run(self, until: float | None = None) -> None:
        while self._heap:
            if until is not None and self._heap[0].time > until:
                break
            ev = heapq.heappop(self._heap)
            self.now = ev.time
            ev.action()
        if until is not None and until > self.now:
            self.now = until

    @property
    def pending(self) -> int:
        return len(self._heap)

    def emit(self, kind: str, actor: str, **payload) -> EventRecord:
        return self.log.emit(self.now, kind, actor, **payload)


class LinkLatencies:
    """Symmetric one-way propagation delays between named endpoints."""

    def __init__(
        self,
        entries: dict[tuple[str, str], float] | None = None,
        default: float | None = None,
        endpoints: set[str] | None = None,
    ):
        self._table: dict[frozenset, float] = {}
        self.endpoints: set[str] = set(endpoints or ())
        self.default = default
        for (a, b), value in (entries or {}).items():
            self.set(a, b, value)

    def set(self, a: str, b: str, value: float) -> None:
        if value < 0:
            raise ConfigError(f"negative latency for {a}-{b}")
        self._table[frozenset((a, b))] = value
        self.endpoints.update((a, b))

    def register(self, *names: str) -> None:
        """Declare endpoints that exist in the topology without their own
        explicit link entries (they fall back to the default latency)."""
        self.endpoints.update(names)

    def latency(self, a: str, b: str) -> float:
        for name in (a, b):
            if name not in self.endpoints:
                raise ConfigError(f"unknown endpoint {name!r}")
        if a == b:
            return 0.0
        value = self._table.get(frozenset((a, b)), self.default)
        if value is None:
            raise ConfigError(f"no latency configured for {a}-{b}")
        return value

    def rtt(self, a: str, b: str) -> float:
        return 2.0 * self.latency(a, b)


class Network:
    """Point-to-point control/data messages delayed by link latency.

    Each message is logged at its delivery time under its kind, with the
    receiving endpoint as actor.
    """

    def __init__(self, sim: Simulator, latencies: LinkLatencies):
        self.sim = sim
        self.latencies = latencies

    def send(self, src: str, dst: str, kind: str, deliver=None, **payload) -> float:
        delay = self.latencies.latency(src, dst)

        def _arrive():
            self.sim.emit(kind, dst, src=src, **payload)
            if deliver is not None:
                deliver()

        self.sim.schedule(delay, _arrive)
        return delay
