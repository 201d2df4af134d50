"""Structural validation of SDFGs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from ..symbolic import ExprSyntaxError, SymExpr, parse_expr
from .core import (
    AccessNode,
    CycleError,
    LibraryNode,
    MapEntry,
    MapExit,
    NestedSdfg,
    Sdfg,
    State,
    StorageKind,
    Tasklet,
)
from .tasklang import TaskletSyntaxError, parse_tasklet

DEVICE_STORAGE = {StorageKind.DeviceDram, StorageKind.OnChipLocal, StorageKind.OnChipRegister, StorageKind.ShiftRegister}
CONDITION_OPS = ("==", "!=", "<=", ">=", "<", ">")


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning | info
    rule: str
    message: str
    state: Optional[str] = None
    node: Optional[int] = None
    edge: Optional[int] = None

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}

    def __str__(self):
        where = ""
        if self.state is not None:
            where = f" [{self.state}"
            if self.node is not None:
                where += f" node {self.node}"
            if self.edge is not None:
                where += f" edge {self.edge}"
            where += "]"
        return f"{self.severity}: {self.rule}{where}: {self.message}"


def errors(diags: List[Diagnostic]) -> List[Diagnostic]:
    return [d for d in diags if d.severity == "error"]


def parse_condition(text: str):
    """Split ``lhs op rhs`` into (SymExpr, op, SymExpr)."""
    for op in CONDITION_OPS:
        idx = text.find(op)
        if idx > 0:
            return parse_expr(text[:idx]), op, parse_expr(text[idx + len(op):])
    raise ExprSyntaxError(f"condition '{text}' has no comparison operator", 0, text)


def is_device_kernel_state(s: Sdfg, st: State) -> bool:
    """True iff every container accessed in ``st`` lives on the device."""
    names = {n.data for n in st.access_nodes()}
    names |= {e.memlet.data for e in st.edges.values() if e.memlet.data is not None}
    return all(n in s.containers and s.containers[n].storage in DEVICE_STORAGE for n in names)


def validate(s: Sdfg) -> List[Diagnostic]:
    diags: List[Diagnostic] = []
    _check_containers(s, diags)
    _check_control_flow(s, diags)
    for st in s.states.values():
        _check_state(s, st, diags)
    return diags


def _check_containers(s: Sdfg, diags):
    for name, d in s.containers.items():
        if d.is_stream:
            if d.capacity is None or d.capacity < 1:
                diags.append(Diagnostic("error", "stream-capacity", f"stream '{name}' needs a capacity >= 1"))
        elif d.capacity is not None:
            diags.append(Diagnostic("error", "capacity-on-array", f"'{name}' is not a stream but declares a capacity"))
        if not d.transient and not d.storage.is_dram:
            diags.append(Diagnostic("error", "external-storage", f"non-transient '{name}' must live in DRAM, not {d.storage.value}"))
        if d.storage is StorageKind.ShiftRegister and d.ndim != 1:
            diags.append(Diagnostic("error", "shift-register-rank", f"shift register '{name}' must be one-dimensional"))
        if d.kind.value == "scalar" and d.shape:
            diags.append(Diagnostic("error", "scalar-shape", f"scalar '{name}' cannot have a shape"))


def _check_control_flow(s: Sdfg, diags):
    if s.states and (s.start_state is None or s.start_state not in s.states):
        diags.append(Diagnostic("error", "start-state", "SDFG needs exactly one existing start state"))
    for e in s.interstate_edges:
        for end in (e.src, e.dst):
            if end not in s.states:
                diags.append(Diagnostic("error", "interstate-endpoint", f"inter-state edge references unknown state '{end}'"))
        if e.condition:
            try:
                parse_condition(e.condition)
            except ExprSyntaxError as exc:
                diags.append(Diagnostic("error", "interstate-condition", str(exc), e.src))


def _check_state(s: Sdfg, st: State, diags):
    def err(rule, msg, node=None, edge=None, severity="error"):
        diags.append(Diagnostic(severity, rule, msg, st.name, node, edge))

    try:
        st.topological_order()
    except CycleError as exc:
        err("cycle", str(exc))
        return

    for nid, n in st.nodes.items():
        if isinstance(n, AccessNode) and n.data not in s.containers:
            err("undeclared-container", f"access node refers to undeclared '{n.data}'", node=nid)
        if isinstance(n, MapExit) and not isinstance(st.nodes.get(n.entry), MapEntry):
            err("map-pairing", "map exit without a matching entry", node=nid)
        if isinstance(n, LibraryNode):
            from ..library.registry import check_library_node

            for msg in check_library_node(n):
                err("library-connectors", msg, node=nid)
        if isinstance(n, NestedSdfg):
            for d in validate(n.sdfg):
                diags.append(Diagnostic(d.severity, d.rule, f"nested '{n.label}': {d.message}", st.name, nid))

    entries = st.nodes_of(MapEntry)
    exits = st.nodes_of(MapExit)
    paired = {x.entry for x in exits}
    for en in entries:
        count = sum(1 for x in exits if x.entry == en.id)
        if count != 1:
            err("map-pairing", f"map '{en.label}' has {count} exits", node=en.id)
    for eid in paired:
        if sum(1 for x in exits if x.entry == eid) > 1:
            err("map-pairing", "map entry shared by several exits", node=eid)

    for e in st.edges.values():
        if e.src not in st.nodes or e.dst not in st.nodes:
            err("dangling-edge", "edge endpoint does not exist", edge=e.id)
            continue
        _check_edge(s, st, e, err)

    _check_map_connectors(st, err)
    _check_tasklets(s, st, err)
    _check_streams(s, st, err)


def _check_edge(s, st, e, err):
    src, dst = st.nodes[e.src], st.nodes[e.dst]
    m = e.memlet
    for node, conn, side in ((src, e.src_conn, "out"), (dst, e.dst_conn, "in")):
        if isinstance(node, AccessNode):
            if conn is not None:
                err("connector", f"access node '{node.data}' has no connectors (got '{conn}')", node=node.id, edge=e.id)
        elif isinstance(node, (MapEntry, MapExit)):
            prefix = "IN_" if side == "in" else "OUT_"
            if conn is None:
                if not m.is_empty:
                    err("connector", f"non-empty memlet attached to map '{node.label}' without a connector", node=node.id, edge=e.id)
            elif not conn.startswith(prefix):
                err("connector", f"map connector '{conn}' should start with {prefix}", node=node.id, edge=e.id)
        else:
            declared = node.in_connectors if side == "in" else node.out_connectors
            if conn is None:
                if not m.is_empty:
                    err("connector", f"memlet into '{node.label}' needs a connector", node=node.id, edge=e.id)
            elif conn not in declared:
                err("connector", f"'{conn}' is not a declared {side}put connector of '{node.label}'", node=node.id, edge=e.id)
    if m.is_empty:
        return
    if m.data not in s.containers:
        err("undeclared-container", f"memlet refers to undeclared '{m.data}'", edge=e.id)
        return
    desc = s.containers[m.data]
    ndim = desc.ndim
    if len(m.subset) != ndim and not (ndim == 0 and len(m.subset) == 1 and m.subset[0].begin == m.subset[0].end == SymExpr.const(0)):
        err("dimensionality", f"memlet on '{m.data}' has {len(m.subset)}-D subset but container is {ndim}-D", edge=e.id)
    if isinstance(src, AccessNode) and isinstance(dst, AccessNode):
        if src.data == dst.data and desc.is_stream:
            err("stream-self-edge", f"edge connects two access nodes of stream '{src.data}'", edge=e.id)
    if m.wcr is not None and desc.is_stream:
        err("stream-wcr", f"write-conflict resolution on stream '{m.data}'", edge=e.id)
    # volume consistency for innermost non-dynamic array memlets
    inner = isinstance(src, (Tasklet,)) or isinstance(dst, (Tasklet,))
    if inner and not m.dynamic and not desc.is_stream and len(m.subset) == ndim:
        if m.volume != m.num_elements():
            err("volume", f"volume {m.volume} differs from subset size {m.num_elements()}", edge=e.id, severity="warning")


def _check_map_connectors(st, err):
    for n in st.nodes.values():
        if not isinstance(n, (MapEntry, MapExit)):
            continue
        ins = {e.dst_conn[3:] for e in st.in_edges(n) if e.dst_conn}
        outs = {e.src_conn[4:] for e in st.out_edges(n) if e.src_conn}
        for c in sorted(outs - ins):
            err("map-connector", f"'OUT_{c}' of '{n.label}' has no matching input", node=n.id)
        for c in sorted(ins - outs):
            err("map-connector", f"'IN_{c}' of '{n.label}' has no matching output", node=n.id)
        if isinstance(n, MapEntry) and not st.out_edges(n):
            err("map-scope", f"map '{n.label}' has an empty scope", node=n.id)


def _check_tasklets(s, st, err):
    for t in st.nodes_of(Tasklet):
        try:
            prog = parse_tasklet(t.code)
        except TaskletSyntaxError as exc:
            err("tasklet-syntax", str(exc), node=t.id)
            continue
        params = {p for m in st.enclosing_maps(t.id) for p in m.params}
        known = set(t.inputs) | set(prog.writes) | set(s.symbols) | set(s.constants) | params | set(t.tables)
        for name in sorted(prog.reads - known):
            err("tasklet-free-name", f"tasklet '{t.label}' reads '{name}' which is not a connector, symbol or map parameter", node=t.id)
        for name in t.outputs:
            if name not in prog.writes:
                err("tasklet-output", f"output '{name}' of '{t.label}' is never assigned", node=t.id, severity="warning")


def _producers(st: State, stream: str, writing: bool):
    """(lineage id, outer subset) pairs writing (reading) ``stream``."""
    out = []
    for an in st.access_nodes(stream):
        edges = st.in_edges(an) if writing else st.out_edges(an)
        for e in edges:
            if e.memlet.is_empty:
                continue
            other = st.nodes[e.src if writing else e.dst]
            if isinstance(other, (MapEntry, MapExit)):
                lineage = other.id if isinstance(other, MapEntry) else other.entry
                # outermost enclosing map identifies the lineage
                maps = st.enclosing_maps(lineage)
                lineage = maps[0].id if maps else lineage
            else:
                maps = st.enclosing_maps(other.id)
                lineage = maps[0].id if maps else other.id
            out.append((lineage, e.memlet.subset))
    return out


def _disjoint(a, b, consts) -> bool:
    for ra, rb in zip(a, b):
        try:
            ea, ba = ra.end.substitute(consts), ra.begin.substitute(consts)
            eb, bb = rb.end.substitute(consts), rb.begin.substitute(consts)
            d1, d2 = bb - ea, ba - eb
            if (d1.is_constant and d1.value > 0) or (d2.is_constant and d2.value > 0):
                return True
        except Exception:
            continue
    return False


def _check_streams(s, st, err):
    consts = dict(s.constants)
    for name, desc in s.containers.items():
        if not desc.is_stream:
            continue
        for writing, rule in ((True, "single-producer"), (False, "single-consumer")):
            sides = _producers(st, name, writing)
            lineages = {}
            for lin, subset in sides:
                lineages.setdefault(lin, []).append(subset)
            ids = sorted(lineages)
            for i in range(len(ids)):
                for j in range(i + 1, len(ids)):
                    if all(_disjoint(a, b, consts) for a in lineages[ids[i]] for b in lineages[ids[j]]):
                        continue
                    what = "written" if writing else "read"
                    err(rule, f"stream '{name}' is {what} by several lineages (nodes {ids[i]} and {ids[j]})", node=ids[j])
