import json

import pydot
import pytest

from tmkit.dsl import normalize
from tmkit.errors import MalformedJson, SchemaMismatch, UnknownLevel
from tmkit.export import LEVELS, bundle_to_dict, from_json, schema, to_dot, to_json
from tmkit.model import Bundle

from conftest import VALID_FIXTURES, load


def parse_dot(text):
    graphs = pydot.graph_from_dot_data(text)
    assert graphs and len(graphs) == 1
    return graphs[0]


def walk(g):
    yield g
    for sub in g.get_subgraphs():
        yield from walk(sub)


def nodes(g):
    return {n.get_name().strip('"') for s in walk(g) for n in s.get_nodes() if n.get_name() not in ("node", "edge", "graph")}


def edges(g):
    return [e for s in walk(g) for e in s.get_edges()]


def clusters(g):
    return [s for s in walk(g) if s.get_name().strip('"').startswith("cluster")]


def test_every_level_parses_for_every_fixture():
    for path in VALID_FIXTURES:
        b = load(path.stem)
        for level in LEVELS:
            g = parse_dot(to_dot(level, b))
            assert g.get_name() == "tm"


def test_gate_static():
    g = parse_dot(to_dot("static", load("gate")))
    assert len(clusters(g)) >= 2
    dashed = [e for e in edges(g) if e.get("style") == "dashed"]
    assert len(dashed) == 1
    assert "gate.open.create" in nodes(g)


def test_transfer_nodes_have_ports():
    text = to_dot("static", load("gate"))
    assert 'shape=record, label="{<in> in|Transfer|<out> out}"' in text
    assert '"car.transfer":out -> "area.transfer":in' in text


def test_caesar_decreate_arc():
    text = to_dot("static", load("caesar"))
    assert 'arrowhead=tee, label="decreate"' in text


def test_empty_model():
    assert to_dot("static", Bundle()) == "digraph tm {}\n"
    parse_dot("digraph tm {}\n")


def test_unknown_level():
    with pytest.raises(UnknownLevel):
        to_dot("physical", load("gate"))


def test_caesar_behavior():
    g = parse_dot(to_dot("behavior", load("caesar")))
    assert nodes(g) == {f"murder/{e}" for e in ("e", "e1", "e11", "e12", "e2")}
    pairs = {(e.get_source().strip('"'), e.get_destination().strip('"')) for e in edges(g)}
    assert pairs == {("murder/e11", "murder/e12"), ("murder/e12", "murder/e2")}
    names = {c.get_name().strip('"') for c in clusters(g)}
    assert {"cluster_composite_murder/e", "cluster_composite_murder/e1"} <= names


def test_repeat_self_loop():
    g = parse_dot(to_dot("behavior", load("ball")))
    loops = [e for e in edges(g) if e.get_source() == e.get_destination()]
    assert len(loops) == 2 and all(e.get("label").strip('"') == "repeat" for e in loops)


def test_events_level_copies_stages_per_event():
    g = parse_dot(to_dot("events", load("gate")))
    ns = nodes(g)
    assert all("/" in n for n in ns)
    assert len(clusters(g)) == 5


def test_dot_is_deterministic():
    for path in VALID_FIXTURES:
        for level in LEVELS:
            assert to_dot(level, load(path.stem)) == to_dot(level, load(path.stem))


def test_json_round_trip():
    for path in VALID_FIXTURES:
        b = load(path.stem)
        text = to_json(b)
        again = from_json(text)
        assert normalize(again) == normalize(b), path.name
        assert to_json(again) == text


def test_gate_json_shape():
    data = json.loads(to_json(load("gate")))
    assert data["tmVersion"] == "1.0"
    assert len(data["events"]) == 5


def test_schema_rejects():
    with pytest.raises(SchemaMismatch):
        from_json("{}")
    data = bundle_to_dict(load("gate"))
    data["tmVersion"] = "2.0"
    with pytest.raises(SchemaMismatch):
        from_json(json.dumps(data))
    data = bundle_to_dict(load("gate"))
    data["extra"] = 1
    with pytest.raises(SchemaMismatch):
        from_json(json.dumps(data))
    data = bundle_to_dict(load("gate"))
    data["flows"][0]["to"]["stage"] = "ghost.receive"
    with pytest.raises(SchemaMismatch):
        from_json(json.dumps(data))


def test_malformed_json():
    with pytest.raises(MalformedJson):
        from_json("{not json")


def test_schema_is_a_2020_12_document():
    s = schema()
    assert s["$schema"].endswith("2020-12/schema")
    assert s["properties"]["tmVersion"]["const"] == "1.0"
