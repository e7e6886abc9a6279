"""In-memory representation of the three modeling levels.

Level 1 is the :class:`StaticModel` (thimacs, stages, flow and trigger arcs).
Level 2 is the set of :class:`Event` objects carved out of it as regions.
Level 3 is a :class:`Chronology` over those events.  A :class:`Bundle` ties
the three together.

All values are treated as immutable: builder methods return new objects and
never mutate the receiver.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum

from tmkit.errors import ModelError, NotDisjoint, TooFewParts, UnknownEvent

__all__ = [
    "Action",
    "Port",
    "Polarity",
    "Duration",
    "EdgeKind",
    "Thimac",
    "StageNode",
    "Endpoint",
    "FlowArc",
    "TriggerArc",
    "StaticModel",
    "Event",
    "Edge",
    "BranchGroup",
    "Chronology",
    "Recurrence",
    "Choice",
    "Scenario",
    "TraceStep",
    "Trace",
    "Bundle",
    "new_static_model",
    "decompose_event",
    "compose_events",
    "atomic_stages",
    "is_weakly_connected",
]

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class Action(str, Enum):
    CREATE = "create"
    RECEIVE = "receive"
    PROCESS = "process"
    RELEASE = "release"
    TRANSFER = "transfer"

    @property
    def title(self) -> str:
        return self.value.capitalize()


class Port(str, Enum):
    IN = "in"
    OUT = "out"


class Polarity(str, Enum):
    CREATE = "create"
    DECREATE = "decreate"


class Duration(str, Enum):
    EXTENDED = "extended"
    INSTANT = "instant"


class EdgeKind(str, Enum):
    SUCCESSION = "succession"
    REPEAT = "repeat"


RESERVED_NAMES = frozenset(a.value for a in Action) | {"in", "out"}


# -- level 1 ---------------------------------------------------------------


@dataclass(frozen=True)
class Thimac:
    id: str
    name: str
    parent: str | None = None
    stages: tuple[str, ...] = ()
    children: tuple[str, ...] = ()
    display: str | None = None
    # inert: memory, intensity, ...
    annotations: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class StageNode:
    id: str
    action: Action
    owner: str

    @property
    def ports(self) -> tuple[Port, ...]:
        return (Port.IN, Port.OUT) if self.action is Action.TRANSFER else ()


@dataclass(frozen=True)
class Endpoint:
    stage: str
    port: Port | None = None

    def __str__(self) -> str:
        return self.stage if self.port is None else f"{self.stage}.{self.port.value}"


@dataclass(frozen=True)
class FlowArc:
    id: str
    src: Endpoint
    dst: Endpoint


@dataclass(frozen=True)
class TriggerArc:
    id: str
    src: str
    dst: str
    polarity: Polarity = Polarity.CREATE


@dataclass(frozen=True)
class StaticModel:
    thimacs: Mapping[str, Thimac] = field(default_factory=dict)
    stages: Mapping[str, StageNode] = field(default_factory=dict)
    flows: tuple[FlowArc, ...] = ()
    triggers: tuple[TriggerArc, ...] = ()
    roots: tuple[str, ...] = ()

    # builders

    def add_thimac(
        self,
        name: str,
        parent: str | None = None,
        display: str | None = None,
        annotations: Mapping[str, str] | None = None,
    ) -> StaticModel:
        if not IDENT_RE.match(name):
            raise ModelError(f"invalid thimac name {name!r}")
        if name in RESERVED_NAMES:
            raise ModelError(f"thimac name {name!r} is reserved")
        if parent is not None and parent not in self.thimacs:
            raise ModelError(f"unknown parent thimac {parent!r}")
        tid = name if parent is None else f"{parent}.{name}"
        if tid in self.thimacs:
            raise ModelError(f"duplicate thimac {tid!r}")
        thimacs = dict(self.thimacs)
        thimacs[tid] = Thimac(tid, name, parent, display=display, annotations=dict(annotations or {}))
        roots = self.roots
        if parent is None:
            roots = roots + (tid,)
        else:
            p = thimacs[parent]
            thimacs[parent] = replace(p, children=p.children + (tid,))
        return replace(self, thimacs=thimacs, roots=roots)

    def add_stage(self, thimac: str, action: Action | str) -> StaticModel:
        action = Action(action)
        owner = self.thimacs.get(thimac)
        if owner is None:
            raise ModelError(f"unknown thimac {thimac!r}")
        sid = f"{thimac}.{action.value}"
        if sid in self.stages:
            raise ModelError(f"thimac {thimac!r} already has a {action.value} stage")
        stages = dict(self.stages)
        stages[sid] = StageNode(sid, action, thimac)
        thimacs = dict(self.thimacs)
        thimacs[thimac] = replace(owner, stages=owner.stages + (sid,))
        return replace(self, thimacs=thimacs, stages=stages)

    def add_flow(
        self,
        src: str,
        dst: str,
        src_port: Port | str | None = None,
        dst_port: Port | str | None = None,
    ) -> StaticModel:
        a, b = self._stage(src), self._stage(dst)
        same = a.owner == b.owner
        sp = self._port(a, src_port, Port.IN if same else Port.OUT)
        dp = self._port(b, dst_port, Port.OUT if same else Port.IN)
        arc = FlowArc(f"flow{len(self.flows) + 1}", Endpoint(src, sp), Endpoint(dst, dp))
        return replace(self, flows=self.flows + (arc,))

    def add_trigger(self, src: str, dst: str, polarity: Polarity | str = Polarity.CREATE) -> StaticModel:
        self._stage(src)
        self._stage(dst)
        arc = TriggerArc(f"trigger{len(self.triggers) + 1}", src, dst, Polarity(polarity))
        return replace(self, triggers=self.triggers + (arc,))

    def _stage(self, sid: str) -> StageNode:
        try:
            return self.stages[sid]
        except KeyError:
            raise ModelError(f"unknown stage {sid!r}") from None

    @staticmethod
    def _port(stage: StageNode, port: Port | str | None, default: Port) -> Port | None:
        if stage.action is not Action.TRANSFER:
            if port is not None:
                raise ModelError(f"stage {stage.id!r} has no ports")
            return None
        return default if port is None else Port(port)

    # queries

    def stage_for(self, thimac: str, action: Action) -> str | None:
        sid = f"{thimac}.{action.value}"
        return sid if sid in self.stages else None

    def ordered(self, stage_ids: Iterable[str]) -> list[str]:
        """Stage ids in declaration order; unknown ids sort last by name."""
        index = {sid: i for i, sid in enumerate(self.stages)}
        return sorted(stage_ids, key=lambda s: (index.get(s, len(index)), s))

    def arcs(self) -> Iterator[tuple[str, str]]:
        """Every flow and trigger arc as a (src stage, dst stage) pair."""
        for f in self.flows:
            yield f.src.stage, f.dst.stage
        for t in self.triggers:
            yield t.src, t.dst

    def depth(self, thimac: str) -> int:
        d, cur = 0, self.thimacs[thimac].parent
        while cur is not None:
            d += 1
            if d > len(self.thimacs):
                raise ModelError("thimac nesting contains a cycle")
            cur = self.thimacs[cur].parent
        return d


def new_static_model() -> StaticModel:
    return StaticModel()


def is_weakly_connected(model: StaticModel, stage_ids: Iterable[str]) -> bool:
    """True when the subgraph induced by ``stage_ids`` is weakly connected.

    Only arcs with both endpoints inside the set count.
    """
    nodes = set(stage_ids)
    if not nodes:
        return False
    adj: dict[str, set[str]] = {n: set() for n in nodes}
    for a, b in model.arcs():
        if a in nodes and b in nodes:
            adj[a].add(b)
            adj[b].add(a)
    start = next(iter(sorted(nodes)))
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen == nodes


# -- level 2 ---------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    id: str
    name: str
    region: frozenset[str]
    time_ref: str = ""
    duration: Duration = Duration.EXTENDED
    sub_events: tuple[str, ...] = ()
    annotations: Mapping[str, str] = field(default_factory=dict)

    @property
    def is_composite(self) -> bool:
        return bool(self.sub_events)

    @property
    def is_atomic(self) -> bool:
        return not self.sub_events and len(self.region) == 1


# -- level 3 ---------------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: EdgeKind = EdgeKind.SUCCESSION


@dataclass(frozen=True)
class BranchGroup:
    id: str
    edges: tuple[Edge, ...]

    @property
    def source(self) -> str:
        return self.edges[0].src


@dataclass(frozen=True)
class Chronology:
    id: str
    events: tuple[str, ...] = ()
    edges: tuple[Edge, ...] = ()
    branch_groups: tuple[BranchGroup, ...] = ()
    start: str | None = None

    def successors(self, event: str) -> list[Edge]:
        return [e for e in self.edges if e.src == event and e.kind is EdgeKind.SUCCESSION]

    def has_repeat(self, event: str) -> bool:
        return any(e.kind is EdgeKind.REPEAT and e.src == event for e in self.edges)

    def group_of(self, edge: Edge) -> BranchGroup | None:
        for g in self.branch_groups:
            if edge in g.edges:
                return g
        return None

    def sources(self) -> list[str]:
        """Declared start (if any) followed by events without incoming succession edges."""
        targets = {e.dst for e in self.edges if e.kind is EdgeKind.SUCCESSION}
        out = [self.start] if self.start else []
        out += [ev for ev in self.events if ev not in targets and ev not in out]
        return out

    def default_start(self) -> str | None:
        if self.start:
            return self.start
        srcs = self.sources()
        return srcs[0] if srcs else (self.events[0] if self.events else None)


@dataclass(frozen=True)
class Recurrence:
    event: str
    interval: int
    count: int
    unifiers: Mapping[str, str] = field(default_factory=dict)


# -- simulation i/o --------------------------------------------------------


@dataclass(frozen=True)
class Choice:
    group: str
    to: str


@dataclass(frozen=True)
class Scenario:
    start: str | None = None
    choices: tuple[Choice, ...] = ()
    repeats: Mapping[str, int] = field(default_factory=dict)
    durations: Mapping[str, int] = field(default_factory=dict)
    max_steps: int = 1000
    chronologies: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, data: Mapping) -> Scenario:
        chrons = data.get("chronologies")
        if chrons is None:
            chrons = [data["chronology"]] if data.get("chronology") else []
        return cls(
            start=data.get("start"),
            choices=tuple(Choice(c["group"], c["to"]) for c in data.get("choices", ())),
            repeats={k: int(v) for k, v in data.get("repeats", {}).items()},
            durations={k: int(v) for k, v in data.get("durations", {}).items()},
            max_steps=int(data.get("maxSteps", 1000)),
            chronologies=tuple(chrons),
        )


@dataclass(frozen=True)
class TraceStep:
    event: str
    start: int
    end: int
    labels: Mapping[str, str] = field(default_factory=dict)
    chronology: str | None = None

    def to_dict(self) -> dict:
        d = {"event": self.event, "start": self.start, "end": self.end, "labels": dict(self.labels)}
        if self.chronology is not None:
            d["chronology"] = self.chronology
        return d


@dataclass(frozen=True)
class Trace:
    steps: tuple[TraceStep, ...] = ()
    partial: bool = False

    def lanes(self) -> dict[str | None, list[TraceStep]]:
        out: dict[str | None, list[TraceStep]] = {}
        for s in self.steps:
            out.setdefault(s.chronology, []).append(s)
        return out


# -- bundle ----------------------------------------------------------------


@dataclass(frozen=True)
class Bundle:
    model: StaticModel = field(default_factory=StaticModel)
    events: Mapping[str, Event] = field(default_factory=dict)
    chronologies: Mapping[str, Chronology] = field(default_factory=dict)
    recurrences: tuple[Recurrence, ...] = ()

    def event(self, eid: str) -> Event:
        try:
            return self.events[eid]
        except KeyError:
            raise UnknownEvent(eid) from None

    def with_model(self, model: StaticModel) -> Bundle:
        return replace(self, model=model)

    def with_event(self, event: Event) -> Bundle:
        if event.id in self.events:
            raise ModelError(f"duplicate event {event.id!r}")
        return replace(self, events={**self.events, event.id: event})

    def with_chronology(self, chron: Chronology) -> Bundle:
        if chron.id in self.chronologies:
            raise ModelError(f"duplicate chronology {chron.id!r}")
        return replace(self, chronologies={**self.chronologies, chron.id: chron})

    def with_recurrence(self, rec: Recurrence) -> Bundle:
        return replace(self, recurrences=self.recurrences + (rec,))


def atomic_stages(bundle: Bundle, event: Event, _seen: frozenset[str] = frozenset()) -> list[str]:
    """Stages of ``event`` reached through its sub-event tree, with repeats kept.

    Leaves contribute their regions; a composite contributes only what its
    parts contribute, so overlap between parts shows up as duplicates.
    """
    if not event.sub_events:
        return bundle.model.ordered(event.region)
    if event.id in _seen:
        raise ModelError(f"event {event.id!r} contains itself")
    out: list[str] = []
    for sub in event.sub_events:
        out.extend(atomic_stages(bundle, bundle.event(sub), _seen | {event.id}))
    return out


def decompose_event(bundle: Bundle, event: Event | str) -> list[Event]:
    """Split an event into one generic (single-stage) event per stage."""
    eid = event if isinstance(event, str) else event.id
    if eid not in bundle.events:
        raise UnknownEvent(eid)
    ev = bundle.events[eid]
    stages = atomic_stages(bundle, ev)
    if len(set(stages)) != len(stages):
        raise NotDisjoint(f"sub-events of {eid!r} overlap")
    model = bundle.model
    out = []
    for sid in stages:
        stage = model.stages.get(sid)
        instant = ev.duration is Duration.INSTANT
        name = f"{stage.action.title} ({stage.owner})" if stage else sid
        out.append(
            Event(
                id=f"{eid}:{sid}",
                name=name,
                region=frozenset({sid}),
                time_ref=ev.time_ref,
                duration=Duration.INSTANT if instant else Duration.EXTENDED,
            )
        )
    return out


def compose_events(
    bundle: Bundle,
    parts: Iterable[Event | str],
    name: str,
    display: str | None = None,
    time_ref: str | None = None,
) -> Event:
    """Aggregate two or more stage-disjoint events into a composite event."""
    evs = [bundle.event(p) if isinstance(p, str) else p for p in parts]
    if len(evs) < 2:
        raise TooFewParts(f"{name!r} needs at least two parts, got {len(evs)}")
    seen: dict[str, str] = {}
    for ev in evs:
        for sid in atomic_stages(bundle, ev):
            if sid in seen:
                raise NotDisjoint(f"{ev.id!r} and {seen[sid]!r} share stage {sid!r}")
            seen[sid] = ev.id
    return Event(
        id=name,
        name=display if display is not None else name,
        region=frozenset(seen),
        time_ref=time_ref if time_ref is not None else evs[0].time_ref,
        sub_events=tuple(ev.id for ev in evs),
    )
