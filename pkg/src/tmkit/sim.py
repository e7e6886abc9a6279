"""Run chronologies under scenarios and check traces against them."""

from __future__ import annotations

import json
from collections import deque
from collections.abc import Iterable, Mapping

from tmkit.diagnostics import Diagnostic, error
from tmkit.errors import CausalConflict, ChoiceMissing, RegionOverlap, ScenarioError, StepLimit
from tmkit.model import (
    Bundle,
    Chronology,
    Duration,
    EdgeKind,
    Event,
    Scenario,
    Trace,
    TraceStep,
    atomic_stages,
)


def _events(events: Bundle | Mapping[str, Event]) -> Mapping[str, Event]:
    return events.events if isinstance(events, Bundle) else events


def _check_scenario(c: Chronology, evs: Mapping[str, Event], s: Scenario, start: str) -> None:
    if start not in c.events:
        raise ScenarioError(f"start event {start!r} is not in chronology {c.id!r}")
    groups = {g.id: g for g in c.branch_groups}
    for ch in s.choices:
        g = groups.get(ch.group)
        if g is None:
            raise ScenarioError(f"unknown branch group {ch.group!r}")
        if ch.to not in {e.dst for e in g.edges}:
            raise ScenarioError(f"branch group {ch.group!r} has no alternative {ch.to!r}")
    for ev, n in s.repeats.items():
        if ev not in evs:
            raise ScenarioError(f"repeat count for unknown event {ev!r}")
        if n < 0:
            raise ScenarioError(f"negative repeat count for {ev!r}")
    for ev, n in s.durations.items():
        if ev not in evs:
            raise ScenarioError(f"duration for unknown event {ev!r}")
        if n < 0:
            raise ScenarioError(f"negative duration for {ev!r}")
        if evs[ev].duration is Duration.INSTANT and n != 0:
            raise ScenarioError(f"event {ev!r} is instant and cannot last {n} ticks")
    if s.max_steps < 1:
        raise ScenarioError("maxSteps must be positive")


def simulate(c: Chronology, events: Bundle | Mapping[str, Event], s: Scenario) -> Trace:
    """Walk ``c`` from the scenario's start event and return the timed trace.

    Extended events last one tick unless the scenario overrides them; instant
    events last zero.  Raises :class:`ChoiceMissing` when a branch group is
    reached without a pending choice and :class:`StepLimit` (carrying the
    partial trace) when ``max_steps`` would be exceeded.
    """
    evs = _events(events)
    start = s.start if s.start is not None else c.default_start()
    if start is None:
        raise ScenarioError(f"chronology {c.id!r} is empty")
    _check_scenario(c, evs, s, start)

    pending: dict[str, deque[str]] = {}
    for ch in s.choices:
        pending.setdefault(ch.group, deque()).append(ch.to)
    steps: list[TraceStep] = []
    tick = 0

    def emit(ev_id: str, repeat: int = 0) -> None:
        nonlocal tick
        if len(steps) >= s.max_steps:
            raise StepLimit(f"more than {s.max_steps} steps", Trace(tuple(steps), partial=True))
        ev = evs[ev_id]
        length = 0 if ev.duration is Duration.INSTANT else s.durations.get(ev_id, 1)
        labels = {}
        if ev.time_ref:
            labels["at"] = ev.time_ref
        if repeat:
            labels["repeat"] = str(repeat)
        steps.append(TraceStep(ev_id, tick, tick + length, labels, c.id))
        tick += length

    cur = start
    while True:
        emit(cur)
        if c.has_repeat(cur):
            for r in range(s.repeats.get(cur, 0)):
                emit(cur, r + 1)
        outs = c.successors(cur)
        if not outs:
            break
        group = c.group_of(outs[0])
        if len(outs) == 1 and group is None:
            cur = outs[0].dst
            continue
        gid = group.id if group is not None else cur
        queue = pending.get(gid)
        if not queue:
            raise ChoiceMissing(f"no choice left for branch group {gid!r} at {cur!r}")
        cur = queue.popleft()
    return Trace(tuple(steps))


def _exclusive_sets(c: Chronology) -> dict[str, list[tuple[str, set[str]]]]:
    """For each branch source: (alternative target, events only that alternative reaches)."""
    out: dict[str, list[tuple[str, set[str]]]] = {}
    for g in c.branch_groups:
        src = g.source
        reach: list[set[str]] = []
        for e in g.edges:
            seen = {e.dst} if e.dst != src else set()
            queue = deque(seen)
            while queue:
                for nxt in c.successors(queue.popleft()):
                    if nxt.dst != src and nxt.dst not in seen:
                        seen.add(nxt.dst)
                        queue.append(nxt.dst)
            reach.append(seen)
        alts = []
        for i, e in enumerate(g.edges):
            others = set().union(*(r for j, r in enumerate(reach) if j != i))
            alts.append((e.dst, reach[i] - others))
        out.setdefault(src, []).extend(alts)
    return out


def conforms(t: Trace, c: Chronology, events: Mapping[str, Event] | Bundle | None = None) -> list[Diagnostic]:
    """Findings that keep ``t`` from being a run of ``c``; empty when it conforms."""
    evs = _events(events) if events is not None else None
    steps = [st for st in t.steps if st.chronology in (None, c.id)]
    members = set(c.events)
    succ = {(e.src, e.dst) for e in c.edges if e.kind is EdgeKind.SUCCESSION}
    rep = {e.src for e in c.edges if e.kind is EdgeKind.REPEAT}
    out: list[Diagnostic] = []
    where = f"chronology:{c.id}"
    for i, st in enumerate(steps):
        loc = f"{where}/step:{i}"
        if st.event not in members:
            out.append(error("CONF-004", f"step {i} event {st.event} is not in chronology {c.id}", loc))
        if st.start < 0 or st.end < st.start:
            out.append(error("CONF-002", f"step {i} has ticks [{st.start}, {st.end}]", loc))
        if evs is not None and st.event in evs and evs[st.event].duration is Duration.INSTANT and st.end != st.start:
            out.append(error("CONF-002", f"step {i} instant event {st.event} spans ticks", loc))
        if i == 0:
            continue
        prev = steps[i - 1]
        if st.start != prev.end:
            out.append(error("CONF-002", f"step {i} starts at {st.start}, previous ended at {prev.end}", loc))
        if prev.event == st.event:
            ok = st.event in rep
        else:
            ok = (prev.event, st.event) in succ
        if not ok:
            out.append(error("CONF-001", f"no edge {prev.event} -> {st.event}", loc))

    excl = _exclusive_sets(c)
    seq = [st.event for st in steps]
    for src, alts in excl.items():
        positions = [i for i, ev in enumerate(seq) if ev == src]
        for n, pos in enumerate(positions):
            end = positions[n + 1] if n + 1 < len(positions) else len(seq)
            segment = seq[pos + 1 : end]
            touched = set()
            if segment:
                touched |= {target for target, _ in alts if target == segment[0]}
            for target, only in alts:
                if only & set(segment):
                    touched.add(target)
            if len(touched) > 1:
                out.append(
                    error(
                        "CONF-003",
                        f"after {src} at step {pos} the trace follows alternatives {', '.join(sorted(touched))}",
                        f"{where}/step:{pos}",
                    )
                )
    return out


def _region(bundle: Bundle, c: Chronology) -> set[str]:
    out: set[str] = set()
    for ev in c.events:
        out.update(atomic_stages(bundle, bundle.event(ev)))
    return out


def simulate_concurrent(cs: Iterable[Chronology], bundle: Bundle, s: Scenario) -> Trace:
    """Simulate region-disjoint chronologies side by side and merge the traces.

    Each chronology starts at tick 0 from the scenario start (when it belongs
    to it) or from its own default start.  A trigger arc from one event's
    region into another chronology's event region is a causal link; the two
    events are aligned to the same start tick by shifting whole lanes.
    """
    cs = list(cs)
    regions = [_region(bundle, c) for c in cs]
    for i in range(len(cs)):
        for j in range(i + 1, len(cs)):
            shared = regions[i] & regions[j]
            if shared:
                raise RegionOverlap(f"{cs[i].id} and {cs[j].id} share {', '.join(sorted(shared))}")

    all_events = {ev for c in cs for ev in c.events}
    if s.start is not None and s.start not in all_events:
        raise ScenarioError(f"start event {s.start!r} is in none of the chronologies")
    traces = []
    for c in cs:
        groups = {g.id for g in c.branch_groups}
        lane = Scenario(
            start=s.start if s.start in c.events else None,
            choices=tuple(ch for ch in s.choices if ch.group in groups),
            repeats={k: v for k, v in s.repeats.items() if k in c.events},
            durations={k: v for k, v in s.durations.items() if k in c.events},
            max_steps=s.max_steps,
        )
        traces.append(list(simulate(c, bundle, lane).steps))

    lane_of = {ev: i for i, c in enumerate(cs) for ev in c.events}
    links = []
    for tr in bundle.model.triggers:
        for a_id, a in bundle.events.items():
            if a_id not in lane_of or tr.src not in a.region:
                continue
            for b_id, b in bundle.events.items():
                if b_id in lane_of and tr.dst in b.region and lane_of[b_id] != lane_of[a_id]:
                    links.append((a_id, b_id))
    links = sorted(set(links))

    def first(lane: int, ev: str) -> int | None:
        return next((st.start for st in traces[lane] if st.event == ev), None)

    offset = [0] * len(cs)
    for _ in range(len(cs) * max(1, len(links)) + 1):
        changed = False
        for a, b in links:
            la, lb = lane_of[a], lane_of[b]
            ta, tb = first(la, a), first(lb, b)
            if ta is None or tb is None:
                continue
            ta, tb = ta + offset[la], tb + offset[lb]
            if ta < tb:
                offset[la] += tb - ta
                changed = True
            elif tb < ta:
                offset[lb] += ta - tb
                changed = True
        if not changed:
            break
    else:
        raise CausalConflict("causal links cannot all be aligned")

    merged = []
    for lane, steps in enumerate(traces):
        for seq, st in enumerate(steps):
            shifted = TraceStep(st.event, st.start + offset[lane], st.end + offset[lane], st.labels, st.chronology)
            merged.append((shifted.start, lane, seq, shifted))
    merged.sort(key=lambda x: x[:3])
    return Trace(tuple(x[3] for x in merged))


def trace_to_jsonl(t: Trace) -> str:
    return "".join(json.dumps(st.to_dict(), sort_keys=True) + "\n" for st in t.steps)


def trace_from_jsonl(text: str) -> Trace:
    steps = []
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        steps.append(TraceStep(d["event"], int(d["start"]), int(d["end"]), d.get("labels", {}), d.get("chronology")))
    return Trace(tuple(steps))
