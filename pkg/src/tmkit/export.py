"""DOT and JSON renderings of a bundle."""

from __future__ import annotations

import json
from collections.abc import Mapping
from importlib import resources

import jsonschema

from tmkit.errors import MalformedJson, ModelError, SchemaMismatch, UnknownLevel
from tmkit.model import (
    Action,
    BranchGroup,
    Bundle,
    Chronology,
    Duration,
    Edge,
    EdgeKind,
    Endpoint,
    Event,
    FlowArc,
    Polarity,
    Port,
    Recurrence,
    StaticModel,
    TriggerArc,
)

TM_VERSION = "1.0"
LEVELS = ("static", "events", "behavior")


def _esc(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ")


def _q(*lines: str) -> str:
    return '"' + "\\n".join(_esc(x) for x in lines) + '"'


class _Dot:
    def __init__(self, options: Mapping | None):
        self.options = dict(options or {})
        self.lines: list[str] = []
        self.edges: list[tuple[str, str]] = []  # (sort key, line)

    def add(self, depth: int, line: str) -> None:
        self.lines.append("  " * depth + line)

    def edge(self, src: str, dst: str, attrs: str) -> None:
        self.edges.append(((src, dst, attrs), f"  {src} -> {dst} [{attrs}];"))

    def render(self) -> str:
        if not self.lines and not self.edges:
            return "digraph tm {}\n"
        head = [
            "digraph tm {",
            f"  rankdir={self.options.get('rankdir', 'LR')};",
            "  compound=true;",
            '  node [shape=box, fontname="Helvetica"];',
        ]
        body = self.lines + [line for _, line in sorted(self.edges)]
        return "\n".join(head + body + ["}"]) + "\n"


def _stage_node(dot: _Dot, m: StaticModel, sid: str, node_id: str, depth: int, owner_label: bool = False) -> None:
    st = m.stages[sid]
    title = st.action.title
    if st.action is Action.TRANSFER:
        mid = f"{title} ({st.owner})" if owner_label else title
        dot.add(depth, f'{_q(node_id)} [shape=record, label="{{<in> in|{_esc(mid)}|<out> out}}"];')
    else:
        lines = (title, st.owner) if owner_label else (title,)
        dot.add(depth, f"{_q(node_id)} [label={_q(*lines)}];")


def _end(node_id: str, port: Port | None) -> str:
    return _q(node_id) if port is None else f"{_q(node_id)}:{port.value}"


def _arcs(dot: _Dot, m: StaticModel, keep=None, prefix: str = "") -> None:
    for f in m.flows:
        if keep is None or (f.src.stage in keep and f.dst.stage in keep):
            dot.edge(_end(prefix + f.src.stage, f.src.port), _end(prefix + f.dst.stage, f.dst.port), "style=solid")
    for t in m.triggers:
        if keep is None or (t.src in keep and t.dst in keep):
            attrs = "style=dashed"
            if t.polarity is Polarity.DECREATE:
                attrs += ', arrowhead=tee, label="decreate"'
            dot.edge(_q(prefix + t.src), _q(prefix + t.dst), attrs)


def _static(dot: _Dot, b: Bundle) -> None:
    m = b.model

    def cluster(tid: str, depth: int) -> None:
        t = m.thimacs[tid]
        dot.add(depth, f"subgraph {_q('cluster_' + tid)} {{")
        dot.add(depth + 1, f"label={_q(t.display or t.name)};")
        for sid in sorted(t.stages):
            _stage_node(dot, m, sid, sid, depth + 1)
        for child in sorted(t.children):
            cluster(child, depth + 1)
        dot.add(depth, "}")

    for root in sorted(m.roots):
        cluster(root, 1)
    _arcs(dot, m)


def _events(dot: _Dot, b: Bundle) -> None:
    m = b.model
    nested = {s for e in b.events.values() for s in e.sub_events}

    def cluster(ev: Event, prefix: str, depth: int) -> None:
        path = f"{prefix}{ev.id}/"
        dot.add(depth, f"subgraph {_q('cluster_event_' + path.rstrip('/'))} {{")
        dot.add(depth + 1, f"label={_q(f'{ev.id}: {ev.name}' if ev.name != ev.id else ev.id)};")
        dot.add(depth + 1, "style=dashed;")
        if ev.sub_events:
            for sub in ev.sub_events:
                cluster(b.event(sub), path, depth + 1)
        else:
            for sid in sorted(ev.region):
                if sid in m.stages:
                    _stage_node(dot, m, sid, path + sid, depth + 1, owner_label=True)
            _arcs(dot, m, keep=ev.region, prefix=path)
        dot.add(depth, "}")

    for eid in sorted(b.events):
        if eid not in nested:
            cluster(b.events[eid], "", 1)


def _behavior(dot: _Dot, b: Bundle) -> None:
    for cid in sorted(b.chronologies):
        c = b.chronologies[cid]
        members = set(c.events)
        # each member sits under the first composite member that lists it
        parent: dict[str, str] = {}
        for ev in c.events:
            for sub in b.events[ev].sub_events if ev in b.events else ():
                if sub in members and sub not in parent and sub != ev:
                    parent[sub] = ev
        kids: dict[str | None, list[str]] = {}
        for ev in c.events:
            kids.setdefault(parent.get(ev), []).append(ev)
        nid = lambda ev: _q(f"{cid}/{ev}")

        def place(ev: str, depth: int) -> None:
            e = b.events.get(ev)
            label = _q(ev, e.name) if e is not None and e.name != ev else _q(ev)
            if ev in kids:
                dot.add(depth, f"subgraph {_q(f'cluster_composite_{cid}/{ev}')} {{")
                dot.add(depth + 1, f"label={_q(ev)};")
                dot.add(depth + 1, "style=dashed;")
                dot.add(depth + 1, f"{nid(ev)} [label={label}, style=bold];")
                for k in sorted(kids[ev]):
                    place(k, depth + 1)
                dot.add(depth, "}")
            else:
                dot.add(depth, f"{nid(ev)} [label={label}];")

        dot.add(1, f"subgraph {_q('cluster_chronology_' + cid)} {{")
        dot.add(2, f"label={_q(cid)};")
        for ev in sorted(kids.get(None, [])):
            place(ev, 2)
        dot.add(1, "}")
        for e in c.edges:
            if e.kind is EdgeKind.REPEAT:
                dot.edge(nid(e.src), nid(e.dst), 'label="repeat"')
            else:
                g = c.group_of(e)
                attrs = "style=solid" if g is None else f"style=solid, label={_q('alt ' + g.id)}"
                dot.edge(nid(e.src), nid(e.dst), attrs)


def to_dot(level: str, bundle: Bundle, options: Mapping | None = None) -> str:
    """Render one modeling level as a Graphviz digraph named ``tm``."""
    renderers = {"static": _static, "events": _events, "behavior": _behavior}
    if level not in renderers:
        raise UnknownLevel(f"unknown level {level!r}; expected one of {', '.join(LEVELS)}")
    dot = _Dot(options)
    renderers[level](dot, bundle)
    return dot.render()


# -- JSON ------------------------------------------------------------------


def schema() -> dict:
    text = resources.files("tmkit").joinpath("schema/tm-bundle-1.0.schema.json").read_text("utf-8")
    return json.loads(text)


def bundle_to_dict(b: Bundle) -> dict:
    m = b.model
    return {
        "tmVersion": TM_VERSION,
        "thimacs": [
            {
                "id": t.id,
                "name": t.name,
                "parent": t.parent,
                "display": t.display,
                "annotations": dict(t.annotations),
            }
            for t in m.thimacs.values()
        ],
        "stages": [{"id": s.id, "action": s.action.value, "owner": s.owner} for s in m.stages.values()],
        "flows": [
            {
                "id": f.id,
                "from": {"stage": f.src.stage, "port": f.src.port.value if f.src.port else None},
                "to": {"stage": f.dst.stage, "port": f.dst.port.value if f.dst.port else None},
            }
            for f in m.flows
        ],
        "triggers": [
            {"id": t.id, "from": t.src, "to": t.dst, "polarity": t.polarity.value} for t in m.triggers
        ],
        "events": [
            {
                "id": e.id,
                "name": e.name,
                "region": m.ordered(e.region),
                "timeRef": e.time_ref,
                "duration": e.duration.value,
                "subEvents": list(e.sub_events),
                "annotations": dict(e.annotations),
            }
            for e in b.events.values()
        ],
        "chronologies": [
            {
                "id": c.id,
                "events": list(c.events),
                "start": c.start,
                "edges": [{"from": e.src, "to": e.dst, "kind": e.kind.value} for e in c.edges],
                "branchGroups": [
                    {"id": g.id, "edges": [{"from": e.src, "to": e.dst} for e in g.edges]}
                    for g in c.branch_groups
                ],
            }
            for c in b.chronologies.values()
        ],
        "recurrences": [
            {"event": r.event, "interval": r.interval, "count": r.count, "unifiers": dict(r.unifiers)}
            for r in b.recurrences
        ],
    }


def to_json(b: Bundle) -> str:
    return json.dumps(bundle_to_dict(b), indent=2) + "\n"


def _port(p: str | None) -> Port | None:
    return Port(p) if p is not None else None


def bundle_from_dict(data) -> Bundle:
    if not isinstance(data, dict) or "tmVersion" not in data:
        raise SchemaMismatch("missing tmVersion")
    if data["tmVersion"] != TM_VERSION:
        raise SchemaMismatch(f"unsupported tmVersion {data['tmVersion']!r}")
    try:
        jsonschema.validate(data, schema())
    except jsonschema.ValidationError as exc:
        raise SchemaMismatch(exc.message) from None
    try:
        m = StaticModel()
        for t in data["thimacs"]:
            m = m.add_thimac(t["name"], t["parent"], t.get("display"), t.get("annotations"))
            if t["id"] not in m.thimacs:
                raise SchemaMismatch(f"thimac id {t['id']!r} does not match its name and parent")
        for s in data["stages"]:
            m = m.add_stage(s["owner"], s["action"])
            if s["id"] not in m.stages:
                raise SchemaMismatch(f"stage id {s['id']!r} does not match its owner and action")
        flows = []
        for f in data["flows"]:
            a, z = f["from"], f["to"]
            for end in (a, z):
                if end["stage"] not in m.stages:
                    raise SchemaMismatch(f"flow {f['id']} references unknown stage {end['stage']!r}")
            flows.append(FlowArc(f["id"], Endpoint(a["stage"], _port(a["port"])), Endpoint(z["stage"], _port(z["port"]))))
        triggers = []
        for t in data["triggers"]:
            for sid in (t["from"], t["to"]):
                if sid not in m.stages:
                    raise SchemaMismatch(f"trigger {t['id']} references unknown stage {sid!r}")
            triggers.append(TriggerArc(t["id"], t["from"], t["to"], Polarity(t["polarity"])))
        m = StaticModel(m.thimacs, m.stages, tuple(flows), tuple(triggers), m.roots)
    except ModelError as exc:
        raise SchemaMismatch(str(exc)) from None

    events = {}
    for e in data["events"]:
        if e["id"] in events:
            raise SchemaMismatch(f"duplicate event {e['id']!r}")
        events[e["id"]] = Event(
            e["id"],
            e["name"],
            frozenset(e["region"]),
            e["timeRef"],
            Duration(e["duration"]),
            tuple(e["subEvents"]),
            dict(e["annotations"]),
        )
    chrons = {}
    for c in data["chronologies"]:
        edges = tuple(Edge(x["from"], x["to"], EdgeKind(x["kind"])) for x in c["edges"])
        groups = tuple(
            BranchGroup(g["id"], tuple(Edge(x["from"], x["to"]) for x in g["edges"])) for g in c["branchGroups"]
        )
        chrons[c["id"]] = Chronology(c["id"], tuple(c["events"]), edges, groups, c["start"])
    recs = tuple(Recurrence(r["event"], r["interval"], r["count"], dict(r["unifiers"])) for r in data["recurrences"])
    return Bundle(m, events, chrons, recs)


def from_json(text: str) -> Bundle:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from None
    return bundle_from_dict(data)
