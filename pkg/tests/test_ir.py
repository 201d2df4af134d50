import json

import pytest

from dfhls import fixtures
from dfhls.ir import (
    MapEntry,
    Memlet,
    SchemaError,
    Sdfg,
    StorageKind,
    Tasklet,
    from_dict,
    load,
    save,
    to_dict,
    validate,
)
from dfhls.ir.tasklang import TaskletSyntaxError, parse_tasklet
from dfhls.ir.validate import errors


def copy_kernel(n=8):
    s = Sdfg("copy")
    s.add_array("a", [n])
    s.add_array("b", [n])
    st = s.add_state("main", is_start=True)
    e, x = st.add_map("copy", {"i": f"0:{n}"})
    t = st.add_tasklet("copy", ["v"], ["o"], "o = v")
    st.add_memlet_path(st.add_access("a"), e, t, memlet=Memlet.simple("a", "i"), dst_conn="v")
    st.add_memlet_path(t, x, st.add_access("b"), memlet=Memlet.simple("b", "i"), src_conn="o")
    return s, st, t


def rules(s):
    return {d.rule for d in errors(validate(s))}


@pytest.mark.parametrize("name", sorted(fixtures.FIXTURES))
def test_fixtures_validate(name):
    assert errors(validate(fixtures.build(name))) == []


def test_memlet_path_creates_scope_connectors():
    s, st, t = copy_kernel()
    (entry,) = st.nodes_of(MapEntry)
    assert [e.dst_conn for e in st.in_edges(entry)] == ["IN_a"]
    assert [(e.src_conn, e.dst_conn) for e in st.out_edges(entry)] == [("OUT_a", "v")]
    assert st.scope_dict()[t.id] == entry.id
    assert [m.label for m in st.enclosing_maps(t.id)] == ["copy"]


def test_input_less_map_has_no_scope_cycle():
    s = Sdfg("init")
    s.add_array("b", [4])
    st = s.add_state("main", is_start=True)
    e, x = st.add_map("fill", {"i": "0:4"})
    t = st.add_tasklet("fill", [], ["o"], "o = 0")
    st.add_edge(e, None, t, None, Memlet.empty())
    st.add_memlet_path(t, x, st.add_access("b"), memlet=Memlet.simple("b", "i"), src_conn="o")
    scope = st.scope_dict()
    assert scope[e.id] is None and scope[x.id] is None and scope[t.id] == e.id
    assert errors(validate(s)) == []


def test_undeclared_connector():
    s, st, t = copy_kernel()
    t.code = "o = w"
    assert "tasklet-free-name" in rules(s)


def test_external_container_on_chip():
    s, _, _ = copy_kernel()
    s.containers["a"].storage = StorageKind.OnChipLocal
    assert "external-storage" in rules(s)


def test_two_writers_on_one_stream():
    s = fixtures.four_pe_kernel()
    st = s.states["kernel"]
    t = st.add_tasklet("rogue", [], ["o"], "o = 1")
    st.add_edge(t, "o", st.add_access("c_pipe"), None, Memlet("c_pipe", (), 1))
    assert "single-producer" in rules(s)


def test_cycle_and_missing_start():
    s, st, t = copy_kernel()
    s.start_state = None
    assert "start-state" in rules(s)
    s.start_state = "main"
    a = st.access_nodes("a")[0]
    st.add_edge(t, "o", a, None, Memlet.simple("a", "0"))
    t.outputs = ("o",)
    assert "cycle" in rules(s)


def test_diagnostic_rendering():
    s, st, t = copy_kernel()
    t.code = "o = ("
    (d,) = [d for d in validate(s) if d.rule == "tasklet-syntax"]
    assert str(d).startswith("error: tasklet-syntax [main node")
    assert d.as_dict()["state"] == "main"


# serialization -------------------------------------------------------------


def test_document_layout():
    doc = to_dict(fixtures.axpydot())
    assert doc["schema_version"] == 1
    assert set(doc) == {"schema_version", "name", "symbols", "constants", "start_state", "containers", "states", "interstate_edges"}
    assert {"kind", "element", "shape", "storage", "capacity", "transient", "bank"} == set(doc["containers"]["x"])
    json.dumps(doc)


def test_save_is_stable(tmp_path):
    s = fixtures.gemver()
    text = save(s, tmp_path / "g.json")
    assert save(load(tmp_path / "g.json")) == text
    assert load(text) == s


def test_schema_version_mismatch():
    doc = to_dict(fixtures.dot())
    doc["schema_version"] = 99
    with pytest.raises(SchemaError, match="schema_version"):
        from_dict(doc)


def test_unknown_field_ignored_with_warning():
    doc = to_dict(fixtures.dot())
    doc["containers"]["x"]["colour"] = "red"
    with pytest.warns(UserWarning, match="colour"):
        s = from_dict(doc)
    assert s == fixtures.dot()


def test_dangling_edge_rejected():
    doc = to_dict(fixtures.dot())
    doc["states"][0]["edges"][0]["dst"] = 999
    with pytest.raises(SchemaError, match="missing node 999"):
        from_dict(doc)


def test_invalid_json():
    with pytest.raises(SchemaError, match="invalid JSON"):
        load("{not json")


# tasklet language ----------------------------------------------------------


def test_tasklet_guards_and_reads():
    p = parse_tasklet("if i < 3:\n    o = a[1] + min(b, 2)\nq = a[0]")
    assert p.reads == {"a", "b", "i"}
    assert p.writes == ("o", "q")
    assert p.guarded == {"o"}
    assert p.run({"a": [1, 2], "b": 5}, {"i": 1}) == {"o": 4, "q": 1}
    assert p.run({"a": [1, 2], "b": 5}, {"i": 7}) == {"q": 1}


@pytest.mark.parametrize("code", ["import os", "o = open(1)", "for i in x:\n    o = i", "o = (", "def f(): pass"])
def test_tasklet_rejects(code):
    with pytest.raises(TaskletSyntaxError):
        parse_tasklet(code)


def test_tasklet_node_connectors():
    _, _, t = copy_kernel()
    assert isinstance(t, Tasklet)
    assert t.in_connectors == ("v",) and t.out_connectors == ("o",)
