"""Event-level computations: recurrence expansion and plan enumeration."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from collections.abc import Mapping

from tmkit.errors import Explosion, UnknownEvent
from tmkit.model import Bundle, Chronology, Duration, Edge, Recurrence, Trace

DEFAULT_REPEAT_BOUND = 1
DEFAULT_PLAN_CAP = 10_000


def natural_key(text: str) -> tuple:
    """Sort key that orders E2 before E10."""
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", text))


@dataclass(frozen=True)
class Occurrence:
    event: str
    index: int
    start: int
    end: int
    region: frozenset[str]
    unifiers: Mapping[str, str] = field(default_factory=dict)


def expand_recurrence(bundle: Bundle, r: Recurrence, start_tick: int = 0) -> list[Occurrence]:
    if r.event not in bundle.events:
        raise UnknownEvent(r.event)
    ev = bundle.events[r.event]
    length = 0 if ev.duration is Duration.INSTANT else 1
    out = []
    for i in range(r.count):
        t = start_tick + i * r.interval
        out.append(Occurrence(ev.id, i, t, t + length, ev.region, dict(r.unifiers)))
    return out


@dataclass(frozen=True)
class PlanSet:
    plans: tuple[tuple[str, ...], ...]
    common_prefix: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"plans": [list(p) for p in self.plans], "commonPrefix": list(self.common_prefix)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def common_prefix(seqs) -> tuple[str, ...]:
    seqs = list(seqs)
    if not seqs:
        return ()
    prefix = []
    for column in zip(*seqs):
        if any(x != column[0] for x in column):
            break
        prefix.append(column[0])
    return tuple(prefix)


def enumerate_plans(
    c: Chronology,
    start: str | None = None,
    repeat_bound: int = DEFAULT_REPEAT_BOUND,
    cap: int = DEFAULT_PLAN_CAP,
) -> PlanSet:
    """All maximal succession paths from ``start``, depth first.

    Reflexive repeat edges unroll 0..``repeat_bound`` extra times.  Any other
    edge may be taken at most ``repeat_bound + 1`` times per plan, which keeps
    cyclic chronologies finite.  Alternatives are explored in natural id order.
    """
    start = start if start is not None else c.default_start()
    if start is None or start not in c.events:
        raise UnknownEvent(str(start))
    if repeat_bound < 0:
        raise ValueError("repeat_bound must be non-negative")
    limit = repeat_bound + 1
    succ: dict[str, list[Edge]] = {
        ev: sorted(c.successors(ev), key=lambda e: natural_key(e.dst)) for ev in c.events
    }
    repeats = {ev for ev in c.events if c.has_repeat(ev)}
    plans: list[tuple[str, ...]] = []
    used: Counter = Counter()

    def visit(node: str, path: list[str]) -> None:
        extra = range(repeat_bound + 1) if node in repeats else range(1)
        for k in extra:
            here = path + [node] * k
            options = [e for e in succ[node] if used[e] < limit]
            if not options:
                plans.append(tuple(here))
                if len(plans) > cap:
                    raise Explosion(f"more than {cap} plans from {start}")
                continue
            for e in options:
                used[e] += 1
                visit(e.dst, here + [e.dst])
                used[e] -= 1

    visit(start, [start])
    return PlanSet(tuple(plans), common_prefix(plans))


def event_sequence_of(t: Trace) -> list[str]:
    return [s.event for s in t.steps]
