"""Structural legality checks for all three modeling levels.

Findings are returned as :class:`~tmkit.diagnostics.Diagnostic` lists; nothing
here raises on an invalid model.  The flow and trigger matrices below are the
normative tables.  ``classify_flow`` and ``classify_trigger`` expose them so
every action pair can be checked individually.
"""

from __future__ import annotations

from collections import Counter, deque
from collections.abc import Iterable, Mapping

from tmkit.diagnostics import Diagnostic, error, warning
from tmkit.model import (
    Action,
    Bundle,
    Chronology,
    Duration,
    EdgeKind,
    Event,
    Polarity,
    Port,
    Recurrence,
    StaticModel,
    atomic_stages,
    is_weakly_connected,
)

C, RV, P, RL, T = Action.CREATE, Action.RECEIVE, Action.PROCESS, Action.RELEASE, Action.TRANSFER

# Flow inside one thimac.  Transfer entries imply the port: out when entered,
# in when left.
INTRA_FLOW = frozenset({(C, P), (C, RL), (RV, P), (RV, RL), (P, RL), (RL, T), (T, RV)})
# Flow between two thimacs: only transfer(out) -> transfer(in).
INTER_FLOW = frozenset({(T, T)})
TRIGGER_TARGETS = frozenset({C, P})

# Expected ports for the transfer ends of each legal arc shape.
_INTRA_PORTS = {(RL, T): (None, Port.OUT), (T, RV): (Port.IN, None)}
_INTER_PORTS = (Port.OUT, Port.IN)


def classify_flow(src: Action, dst: Action, same_thimac: bool) -> str | None:
    """Rule id violated by a flow between the two actions, or None if legal."""
    if same_thimac:
        if (src, dst) in INTRA_FLOW:
            return None
        return "FLOW-007" if (src, dst) == (T, P) else "FLOW-001"
    return None if (src, dst) in INTER_FLOW else "FLOW-002"


def classify_trigger(src: Action, dst: Action, polarity: Polarity = Polarity.CREATE) -> str | None:
    if dst not in TRIGGER_TARGETS:
        return "TRIG-001"
    if polarity is Polarity.DECREATE and dst is not C:
        return "TRIG-002"
    return None


def _loc(spans: Mapping[str, object] | None, key: str):
    if spans and key in spans:
        return spans[key]
    return key


def validate_static(m: StaticModel, spans: Mapping | None = None) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    seen: Counter = Counter()
    for f in m.flows:
        loc = _loc(spans, f.id)
        a, b = m.stages.get(f.src.stage), m.stages.get(f.dst.stage)
        if a is None or b is None:
            out.append(error("FLOW-004", f"flow {f.src} -> {f.dst} has a missing endpoint", loc))
            continue
        key = (str(f.src), str(f.dst))
        seen[key] += 1
        if seen[key] == 2:
            out.append(warning("FLOW-005", f"flow {f.src} -> {f.dst} declared more than once", loc))
        same = a.owner == b.owner
        rule = classify_flow(a.action, b.action, same)
        if rule is not None:
            kind = "intra" if same else "inter"
            out.append(
                error(rule, f"{kind}-thimac flow {a.action.value} -> {b.action.value} is not allowed ({f.src} -> {f.dst})", loc)
            )
            continue
        if same:
            want_src, want_dst = _INTRA_PORTS.get((a.action, b.action), (None, None))
        else:
            want_src, want_dst = _INTER_PORTS
        if f.src.port != want_src or f.dst.port != want_dst:
            out.append(error("FLOW-003", f"flow {f.src} -> {f.dst} uses the wrong transfer port", loc))

    for t in m.triggers:
        loc = _loc(spans, t.id)
        a, b = m.stages.get(t.src), m.stages.get(t.dst)
        if a is None or b is None:
            out.append(error("TRIG-003", f"trigger {t.src} ~> {t.dst} has a missing endpoint", loc))
            continue
        rule = classify_trigger(a.action, b.action, t.polarity)
        if rule == "TRIG-001":
            out.append(error(rule, f"trigger {t.src} ~> {t.dst} targets a {b.action.value} stage", loc))
        elif rule == "TRIG-002":
            out.append(error(rule, f"decreate trigger {t.src} ~> {t.dst} targets a {b.action.value} stage", loc))

    incoming = {dst for _, dst in m.arcs()}
    for sid, st in m.stages.items():
        if st.action is not Action.CREATE and sid not in incoming:
            out.append(warning("STG-001", f"stage {sid} has no incoming flow or trigger", _loc(spans, sid)))
    return out


def validate_events(
    events: Iterable[Event] | Mapping[str, Event], m: StaticModel, spans: Mapping | None = None
) -> list[Diagnostic]:
    evs = dict(events) if isinstance(events, Mapping) else {e.id: e for e in events}
    bundle = Bundle(m, evs)
    out: list[Diagnostic] = []
    for e in evs.values():
        loc = _loc(spans, f"event:{e.id}")
        if not e.region:
            out.append(error("EVT-007", f"event {e.id} has an empty region", loc))
            continue
        missing = sorted(s for s in e.region if s not in m.stages)
        if missing:
            out.append(error("EVT-001", f"event {e.id} references unknown stages {', '.join(missing)}", loc))
            continue
        if not is_weakly_connected(m, e.region):
            out.append(error("EVT-002", f"region of event {e.id} is not weakly connected", loc))
        if e.duration is Duration.INSTANT:
            only = next(iter(e.region))
            if len(e.region) != 1 or m.stages[only].action is not Action.CREATE:
                out.append(error("EVT-006", f"event {e.id} is instant but its region is not a single create stage", loc))
        if not e.sub_events:
            continue
        unknown = [s for s in e.sub_events if s not in evs]
        if unknown:
            out.append(error("EVT-008", f"event {e.id} has unknown sub-events {', '.join(unknown)}", loc))
            continue
        if len(e.sub_events) < 2:
            out.append(error("EVT-004", f"composite event {e.id} has fewer than two sub-events", loc))
        try:
            stages = atomic_stages(bundle, e)
        except Exception as exc:  # self-containing composition
            out.append(error("EVT-008", str(exc), loc))
            continue
        dup = sorted(s for s, n in Counter(stages).items() if n > 1)
        if dup:
            out.append(error("EVT-003", f"sub-events of {e.id} overlap on {', '.join(dup)}", loc))
        if set(stages) != set(e.region):
            out.append(error("EVT-005", f"region of {e.id} differs from the union of its sub-events", loc))
    return out


def reachable(c: Chronology, roots: Iterable[str]) -> set[str]:
    adj: dict[str, list[str]] = {}
    for e in c.edges:
        adj.setdefault(e.src, []).append(e.dst)
    seen = set(roots)
    queue = deque(seen)
    while queue:
        for nxt in adj.get(queue.popleft(), ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def validate_chronology(
    c: Chronology, events: Iterable[str] | Mapping | None = None, spans: Mapping | None = None
) -> list[Diagnostic]:
    key = f"chronology:{c.id}"
    out: list[Diagnostic] = []
    members = set(c.events)
    if events is not None:
        declared = set(events)
        for ev in c.events:
            if ev not in declared:
                out.append(error("CHR-007", f"chronology {c.id} uses undeclared event {ev}", _loc(spans, key)))
    for e in c.edges:
        loc = _loc(spans, f"{key}/edge:{e.src}->{e.dst}")
        if e.src not in members or e.dst not in members:
            out.append(error("CHR-002", f"edge {e.src} -> {e.dst} leaves chronology {c.id}", loc))
        reflexive = e.src == e.dst
        if (e.kind is EdgeKind.REPEAT) != reflexive:
            what = "repeat edge is not reflexive" if not reflexive else "reflexive edge must be a repeat"
            out.append(error("CHR-001", f"{what}: {e.src} -> {e.dst}", loc))
    if c.start is not None and c.start not in members:
        out.append(error("CHR-002", f"start event {c.start} is not in chronology {c.id}", _loc(spans, key)))

    owner: dict = {}
    for g in c.branch_groups:
        loc = _loc(spans, f"{key}/group:{g.id}")
        if len(g.edges) < 2:
            out.append(error("CHR-003", f"branch group {g.id} has fewer than two alternatives", loc))
        if len({e.src for e in g.edges}) > 1:
            out.append(error("CHR-003", f"branch group {g.id} mixes source events", loc))
        for e in g.edges:
            if e not in c.edges or e.kind is not EdgeKind.SUCCESSION:
                out.append(error("CHR-003", f"branch group {g.id} lists unknown edge {e.src} -> {e.dst}", loc))
            elif e in owner:
                out.append(error("CHR-004", f"edge {e.src} -> {e.dst} is in groups {owner[e]} and {g.id}", loc))
            else:
                owner[e] = g.id
    for ev in c.events:
        outs = c.successors(ev)
        if len(outs) > 1:
            groups = {owner.get(e) for e in outs}
            if None in groups or len(groups) != 1:
                out.append(
                    error("CHR-006", f"event {ev} forks to {len(outs)} successors outside one branch group", _loc(spans, key))
                )
    seen = reachable(c, c.sources())
    for ev in c.events:
        if ev not in seen:
            out.append(warning("CHR-005", f"event {ev} is unreachable from every source", _loc(spans, key)))
    return out


def validate_recurrences(recs: Iterable[Recurrence], events: Iterable[str], spans: Mapping | None = None) -> list[Diagnostic]:
    declared = set(events)
    out = []
    for n, r in enumerate(recs, 1):
        loc = _loc(spans, f"recur:{n}")
        if r.event not in declared:
            out.append(error("REC-003", f"recurrence of unknown event {r.event}", loc))
        if r.count < 2:
            out.append(error("REC-001", f"recurrence of {r.event} has count {r.count}", loc))
        if r.interval < 1:
            out.append(error("REC-002", f"recurrence of {r.event} has interval {r.interval}", loc))
    return out


def validate_bundle(bundle: Bundle, spans: Mapping | None = None) -> list[Diagnostic]:
    """Every check, in level order."""
    out = validate_static(bundle.model, spans)
    out += validate_events(bundle.events, bundle.model, spans)
    for c in bundle.chronologies.values():
        out += validate_chronology(c, bundle.events, spans)
    out += validate_recurrences(bundle.recurrences, bundle.events, spans)
    return out
