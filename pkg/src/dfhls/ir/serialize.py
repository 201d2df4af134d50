"""JSON document format for SDFGs.

Layout (``schema_version`` 1)::

    {"schema_version": 1, "name": str, "symbols": {name: "int"},
     "constants": {name: int}, "start_state": str,
     "containers": {name: {"kind", "element", "shape", "storage",
                           "capacity", "transient", "bank"}},
     "states": [{"name", "nodes": [...], "edges": [...]}],
     "interstate_edges": [{"src", "dst", "condition", "assignments"}]}

Node and edge ids are written out and restored verbatim.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path
from typing import Any, Dict, Union

from ..symbolic import parse_expr
from .core import (
    AccessNode,
    DataDescriptor,
    DataKind,
    ElementType,
    LibraryNode,
    MapEntry,
    MapExit,
    Memlet,
    NestedSdfg,
    Schedule,
    Sdfg,
    StorageKind,
    Tasklet,
    parse_subset,
    subset_str,
)

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


def _plain(obj):
    return json.loads(json.dumps(obj))


def _memlet_to(m: Memlet) -> Dict[str, Any]:
    if m.is_empty:
        return {"data": None}
    d = {"data": m.data, "subset": subset_str(m.subset), "volume": str(m.volume)}
    if m.dynamic:
        d["dynamic"] = True
    if m.wcr:
        d["wcr"] = m.wcr
    return d


def _node_to(n) -> Dict[str, Any]:
    if isinstance(n, AccessNode):
        return {"id": n.id, "type": "AccessNode", "data": n.data}
    if isinstance(n, Tasklet):
        d = {"id": n.id, "type": "Tasklet", "label": n.label, "inputs": list(n.inputs), "outputs": list(n.outputs), "code": n.code}
        if n.tables:
            d["tables"] = _plain(n.tables)
        return d
    if isinstance(n, MapEntry):
        return {
            "id": n.id,
            "type": "MapEntry",
            "label": n.label,
            "params": list(n.params),
            "ranges": [[str(r.begin), str(r.end), str(r.stride)] for r in n.ranges],
            "schedule": n.schedule.value,
        }
    if isinstance(n, MapExit):
        return {"id": n.id, "type": "MapExit", "label": n.label, "entry": n.entry}
    if isinstance(n, LibraryNode):
        return {
            "id": n.id,
            "type": "LibraryNode",
            "label": n.label,
            "kind": n.kind,
            "attrs": _plain(n.attrs),
            "inputs": list(n.inputs),
            "outputs": list(n.outputs),
        }
    if isinstance(n, NestedSdfg):
        return {
            "id": n.id,
            "type": "NestedSdfg",
            "label": n.label,
            "sdfg": to_dict(n.sdfg),
            "inputs": list(n.inputs),
            "outputs": list(n.outputs),
            "symbol_mapping": {k: str(v) for k, v in sorted(n.symbol_mapping.items())},
        }
    raise SchemaError(f"cannot serialize node {n!r}")


def to_dict(s: Sdfg) -> Dict[str, Any]:
    containers = {}
    for name, d in sorted(s.containers.items()):
        containers[name] = {
            "kind": d.kind.value,
            "element": str(d.element),
            "shape": [str(x) for x in d.shape],
            "storage": d.storage.value,
            "capacity": d.capacity,
            "transient": d.transient,
            "bank": d.bank,
        }
    states = []
    for st in s.states.values():
        states.append(
            {
                "name": st.name,
                "nodes": [_node_to(st.nodes[i]) for i in sorted(st.nodes)],
                "edges": [
                    {
                        "id": e.id,
                        "src": e.src,
                        "src_conn": e.src_conn,
                        "dst": e.dst,
                        "dst_conn": e.dst_conn,
                        "memlet": _memlet_to(e.memlet),
                    }
                    for e in sorted(st.edges.values(), key=lambda e: e.id)
                ],
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "symbols": dict(sorted(s.symbols.items())),
        "constants": dict(sorted(s.constants.items())),
        "start_state": s.start_state,
        "containers": containers,
        "states": states,
        "interstate_edges": [
            {
                "src": e.src,
                "dst": e.dst,
                "condition": e.condition,
                "assignments": {k: str(v) for k, v in sorted(e.assignments.items())},
            }
            for e in s.interstate_edges
        ],
    }


_KNOWN = {
    "sdfg": {"schema_version", "name", "symbols", "constants", "start_state", "containers", "states", "interstate_edges"},
    "container": {"kind", "element", "shape", "storage", "capacity", "transient", "bank"},
    "state": {"name", "nodes", "edges"},
    "edge": {"id", "src", "src_conn", "dst", "dst_conn", "memlet"},
    "memlet": {"data", "subset", "volume", "dynamic", "wcr"},
    "AccessNode": {"id", "type", "data"},
    "Tasklet": {"id", "type", "label", "inputs", "outputs", "code", "tables"},
    "MapEntry": {"id", "type", "label", "params", "ranges", "schedule"},
    "MapExit": {"id", "type", "label", "entry"},
    "LibraryNode": {"id", "type", "label", "kind", "attrs", "inputs", "outputs"},
    "NestedSdfg": {"id", "type", "label", "sdfg", "inputs", "outputs", "symbol_mapping"},
}


def _extra(kind: str, d: Dict[str, Any], where: str):
    unknown = sorted(set(d) - _KNOWN[kind])
    if unknown:
        warnings.warn(f"ignoring unknown attribute(s) {unknown} on {where}", stacklevel=3)


def _memlet_from(d) -> Memlet:
    _extra("memlet", d, "memlet")
    if d.get("data") is None:
        return Memlet.empty()
    return Memlet(d["data"], parse_subset(d.get("subset", "")), parse_expr(d["volume"]), bool(d.get("dynamic", False)), d.get("wcr"))


def _node_from(d):
    t = d.get("type")
    if t not in _KNOWN or t in ("sdfg", "container", "state", "edge", "memlet"):
        raise SchemaError(f"unknown node type '{t}'")
    _extra(t, d, f"{t} {d.get('id')}")
    if t == "AccessNode":
        return AccessNode(d["data"])
    if t == "Tasklet":
        return Tasklet(d["label"], tuple(d["inputs"]), tuple(d["outputs"]), d["code"], dict(d.get("tables", {})))
    if t == "MapEntry":
        from .core import Range

        rngs = tuple(Range(parse_expr(b), parse_expr(e), parse_expr(s)) for b, e, s in d["ranges"])
        return MapEntry(d["label"], tuple(d["params"]), rngs, Schedule(d.get("schedule", "Pipelined")))
    if t == "MapExit":
        return MapExit(d["label"], d["entry"])
    if t == "LibraryNode":
        return LibraryNode(d["label"], d["kind"], dict(d.get("attrs", {})), tuple(d["inputs"]), tuple(d["outputs"]))
    return NestedSdfg(
        d["label"],
        from_dict(d["sdfg"]),
        tuple(d["inputs"]),
        tuple(d["outputs"]),
        {k: parse_expr(v) for k, v in d.get("symbol_mapping", {}).items()},
    )


def from_dict(doc: Dict[str, Any]) -> Sdfg:
    if not isinstance(doc, dict):
        raise SchemaError("document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    _extra("sdfg", doc, "document")
    s = Sdfg(doc["name"])
    s.constants = {k: int(v) for k, v in doc.get("constants", {}).items()}
    for name, c in doc.get("containers", {}).items():
        _extra("container", c, f"container '{name}'")
        s.containers[name] = DataDescriptor(
            name,
            DataKind(c["kind"]),
            ElementType.parse(c["element"]),
            tuple(parse_expr(x) for x in c.get("shape", [])),
            StorageKind(c.get("storage", "HostDram")),
            c.get("capacity"),
            bool(c.get("transient", False)),
            c.get("bank"),
        )
    s.symbols = dict(doc.get("symbols", {}))
    for sd in doc.get("states", []):
        _extra("state", sd, f"state '{sd.get('name')}'")
        st = s.add_state(sd["name"])
        for nd in sd.get("nodes", []):
            st.add_node(_node_from(nd), id=nd["id"])
        for ed in sd.get("edges", []):
            _extra("edge", ed, f"edge {ed.get('id')}")
            m = _memlet_from(ed["memlet"])
            if m.data is not None and m.data not in s.containers:
                raise SchemaError(f"state '{st.name}': memlet refers to undeclared container '{m.data}'")
            for end in (ed["src"], ed["dst"]):
                if end not in st.nodes:
                    raise SchemaError(f"state '{st.name}': edge {ed['id']} refers to missing node {end}")
            st.add_edge(ed["src"], ed.get("src_conn"), ed["dst"], ed.get("dst_conn"), m, id=ed["id"])
        for n in st.access_nodes():
            if n.data not in s.containers:
                raise SchemaError(f"state '{st.name}': access node refers to undeclared container '{n.data}'")
    s.start_state = doc.get("start_state")
    for ie in doc.get("interstate_edges", []):
        s.add_interstate_edge(ie["src"], ie["dst"], ie.get("condition"), {k: parse_expr(v) for k, v in ie.get("assignments", {}).items()})
    return s


def save(s: Sdfg, path: Union[str, Path, None] = None) -> str:
    text = json.dumps(to_dict(s), indent=1, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load(src: Union[str, Path, Dict[str, Any]]) -> Sdfg:
    """Load from a dict, a JSON string, or a file path."""
    if isinstance(src, dict):
        return from_dict(src)
    text = str(src)
    if isinstance(src, Path) or not text.lstrip().startswith("{"):
        text = Path(src).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return from_dict(doc)
