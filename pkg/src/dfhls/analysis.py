"""Read-only analyses: processing elements, off-chip volume, stream balance, reachability."""

from __future__ import annotations

import ast
import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .ir.core import AccessNode, LibraryNode, MapEntry, MapExit, NestedSdfg, Schedule, Sdfg, State, Tasklet
from .ir.validate import Diagnostic
from .symbolic import SymExpr, evaluate, product

GIB = 2**30


# processing elements -------------------------------------------------------


@dataclass
class Component:
    nodes: Tuple[int, ...]
    role: str  # reader | writer | compute | unknown
    containers: Tuple[str, ...]
    dram_reads: Tuple[str, ...] = ()
    dram_writes: Tuple[str, ...] = ()
    streams_in: Tuple[str, ...] = ()
    streams_out: Tuple[str, ...] = ()
    name: str = ""
    unrolled: Optional[int] = None  # id of the outermost unrolled map entry, if replicated


@dataclass
class PeSet:
    state: str
    components: List[Component]

    def __len__(self):
        return len(self.components)

    def names(self) -> List[str]:
        return [c.name for c in self.components]


def weakly_connected(st: State) -> List[Tuple[int, ...]]:
    parent = {n: n for n in st.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in st.edges.values():
        a, b = find(e.src), find(e.dst)
        if a != b:
            parent[max(a, b)] = min(a, b)
    groups: Dict[int, List[int]] = {}
    for n in sorted(st.nodes):
        groups.setdefault(find(n), []).append(n)
    return sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])


def _is_copy(code: str) -> bool:
    try:
        body = ast.parse(code).body
    except SyntaxError:
        return False
    return len(body) == 1 and isinstance(body[0], ast.Assign) and isinstance(body[0].value, ast.Name)


def _classify(s: Optional[Sdfg], st: State, nodes: Sequence[int]) -> Component:
    reads, writes, s_in, s_out, names = set(), set(), set(), set(), set()
    has_compute = False
    for nid in nodes:
        n = st.nodes[nid]
        if isinstance(n, (LibraryNode, NestedSdfg)) or isinstance(n, Tasklet) and not _is_copy(n.code):
            has_compute = True
        if not isinstance(n, AccessNode):
            continue
        names.add(n.data)
        desc = s.containers.get(n.data) if s is not None else None
        is_stream = desc is not None and desc.is_stream
        is_dram = desc is not None and desc.storage.is_dram and not is_stream
        if st.out_edges(n):
            (s_in if is_stream else reads if is_dram else set()).add(n.data)
        if st.in_edges(n):
            (s_out if is_stream else writes if is_dram else set()).add(n.data)
    if reads and not writes and not s_in and s_out and not has_compute:
        role = "reader"
    elif writes and not reads and s_in and not s_out and not has_compute:
        role = "writer"
    elif has_compute:
        role = "compute"
    else:
        role = "unknown"
    return Component(tuple(nodes), role, tuple(sorted(names)), tuple(sorted(reads)), tuple(sorted(writes)), tuple(sorted(s_in)), tuple(sorted(s_out)))


def _top_unrolled(st: State, nodes: Sequence[int]) -> Optional[MapEntry]:
    scope = st.scope_dict()
    top = [st.nodes[n] for n in nodes if scope[n] is None and not isinstance(st.nodes[n], AccessNode)]
    entries = [n for n in top if isinstance(n, MapEntry)]
    if len(entries) == 1 and entries[0].schedule is Schedule.Unrolled and all(isinstance(n, (MapEntry, MapExit)) for n in top):
        return entries[0]
    return None


def unrolled_extent(s: Optional[Sdfg], entry: MapEntry, binding: Mapping[str, int] = None) -> Optional[int]:
    env = dict(s.constants) if s is not None else {}
    env.update(binding or {})
    try:
        return evaluate(entry.trip_count(), env)
    except Exception:
        return None


def _host_name(container: str) -> str:
    # device twins are named after their host container
    return container[5:] if container.startswith("fpga_") else container


def _name_components(comps: List[Component]):
    used: Dict[str, int] = {}

    def unique(base):
        if base not in used:
            used[base] = 0
            return base
        used[base] += 1
        while f"{base}_{used[base]}" in used:
            used[base] += 1
        name = f"{base}_{used[base]}"
        used[name] = 0
        return name

    for c in comps:
        if c.role == "reader":
            c.name = unique("read_" + "_".join(_host_name(d) for d in c.dram_reads))
        elif c.role == "writer":
            c.name = unique("write_" + "_".join(_host_name(d) for d in c.dram_writes))
        else:
            c.name = unique("compute")


def connected_components(st: State, s: Optional[Sdfg] = None) -> PeSet:
    """Weakly connected components of ``st``, ordered by smallest node id."""
    comps = [_classify(s, st, g) for g in weakly_connected(st)]
    _name_components(comps)
    return PeSet(st.name, comps)


@dataclass
class PeInstance:
    name: str
    component: Component
    bindings: Dict[str, int] = field(default_factory=dict)  # fixed unrolled parameters


def processing_elements(st: State, s: Optional[Sdfg] = None, binding: Mapping[str, int] = None, split: bool = True) -> List[PeInstance]:
    """Processing elements after replicating outermost unrolled maps.

    A component whose only top-level computation is an Unrolled map becomes one
    PE per parameter value (when the extent can be evaluated).
    """
    env = dict(s.constants) if s is not None else {}
    env.update(binding or {})
    out: List[Tuple[Component, Dict[str, int]]] = []
    for c in (_classify(s, st, g) for g in weakly_connected(st)):
        entry = _top_unrolled(st, c.nodes) if split else None
        values = None
        if entry is not None:
            try:
                values = [
                    dict(zip(entry.params, combo))
                    for combo in itertools.product(
                        *[range(evaluate(r.begin, env), evaluate(r.end, env) + 1, evaluate(r.stride, env)) for r in entry.ranges]
                    )
                ]
            except Exception:
                values = None
        if values is None:
            out.append((c, {}))
        else:
            c.unrolled = entry.id
            for v in values:
                out.append((c, v))
    # naming: replicate instances of the same component share the base name
    comps = [c for c, _ in out]
    used: Dict[str, int] = {}
    names = []
    for c in comps:
        base = {
            "reader": "read_" + "_".join(_host_name(d) for d in c.dram_reads),
            "writer": "write_" + "_".join(_host_name(d) for d in c.dram_writes),
        }.get(c.role, "compute")
        k = used.get(base, 0)
        used[base] = k + 1
        names.append(base if k == 0 else f"{base}_{k}")
    return [PeInstance(n, c, b) for n, (c, b) in zip(names, out)]


# volume accounting ---------------------------------------------------------


@dataclass
class ContainerVolume:
    name: str
    storage: str
    read_bytes: SymExpr
    write_bytes: SymExpr
    read_value: Optional[int] = None
    write_value: Optional[int] = None

    @property
    def total_value(self):
        if self.read_value is None or self.write_value is None:
            return None
        return self.read_value + self.write_value


@dataclass
class VolumeReport:
    containers: Dict[str, ContainerVolume]
    copy_bytes: SymExpr
    copy_value: Optional[int]
    unbounded: List[str]

    @property
    def total_bytes(self) -> SymExpr:
        tot = SymExpr.const(0)
        for c in self.containers.values():
            tot = tot + c.read_bytes + c.write_bytes
        return tot

    @property
    def total_value(self) -> Optional[int]:
        vals = [c.total_value for c in self.containers.values()]
        if any(v is None for v in vals):
            return None
        return sum(vals)

    @property
    def total_gib(self) -> Optional[float]:
        v = self.total_value
        return None if v is None else v / GIB

    def per_storage(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for c in self.containers.values():
            if c.total_value is not None:
                out[c.storage] = out.get(c.storage, 0) + c.total_value
        return out

    def as_dict(self):
        return {
            "containers": {
                n: {
                    "storage": c.storage,
                    "read_bytes": str(c.read_bytes),
                    "write_bytes": str(c.write_bytes),
                    "read_value": c.read_value,
                    "write_value": c.write_value,
                }
                for n, c in sorted(self.containers.items())
            },
            "total_bytes": str(self.total_bytes),
            "total_value": self.total_value,
            "total_gib": self.total_gib,
            "copy_bytes": str(self.copy_bytes),
            "copy_value": self.copy_value,
            "per_storage": self.per_storage(),
            "unbounded": list(self.unbounded),
        }

    def table(self) -> str:
        rows = [("container", "storage", "read", "written")]
        for n, c in sorted(self.containers.items()):
            rows.append((n, c.storage, _fmt_bytes(c.read_value), _fmt_bytes(c.write_value)))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in rows]
        lines.append(f"total off-chip: {_fmt_bytes(self.total_value)}")
        lines.append(f"host<->device copies: {_fmt_bytes(self.copy_value)}")
        if self.unbounded:
            lines.append("unbounded (dynamic) memlets on: " + ", ".join(self.unbounded))
        return "\n".join(lines)


def _fmt_bytes(v):
    if v is None:
        return "?"
    return f"{v} B ({v / GIB:.3f} GiB)"


def is_compute_state(st: State) -> bool:
    return any(isinstance(n, (Tasklet, MapEntry, LibraryNode, NestedSdfg)) for n in st.nodes.values())


def offchip_volume(s: Sdfg, binding: Mapping[str, int] = None) -> VolumeReport:
    """Bytes moved to or from DRAM-class containers by computation states.

    Host/device copies in pure copy states are reported separately in
    ``copy_bytes`` and are not part of the total.
    """
    env = dict(s.constants)
    env.update(binding or {})
    vols: Dict[str, List[SymExpr]] = {}
    unbounded: List[str] = []
    copy_bytes = SymExpr.const(0)

    def account(name, vol, write, unit):
        r, w = vols.setdefault(name, [SymExpr.const(0), SymExpr.const(0)])
        nbytes = vol * unit
        vols[name][1 if write else 0] = (w if write else r) + nbytes

    for st in s.state_order():
        compute = is_compute_state(st)
        for e in sorted(st.edges.values(), key=lambda e: e.id):
            m = e.memlet
            if m.is_empty:
                continue
            for nid, write in ((e.src, False), (e.dst, True)):
                n = st.nodes[nid]
                if not isinstance(n, AccessNode):
                    continue
                desc = s.containers[n.data]
                if desc.is_stream or not desc.storage.is_dram:
                    continue
                # volumes count elements of the memlet's own container
                unit = s.containers[m.data].element.nbytes
                if not compute:
                    copy_bytes = copy_bytes + m.volume * unit
                    continue
                if m.dynamic and n.data not in unbounded:
                    unbounded.append(n.data)
                account(n.data, m.volume, write, unit)
    report = {}
    for name, (r, w) in sorted(vols.items()):
        try:
            rv, wv = evaluate(r, env), evaluate(w, env)
        except KeyError:
            rv = wv = None
        report[name] = ContainerVolume(name, s.containers[name].storage.value, r, w, rv, wv)
    try:
        cv = evaluate(copy_bytes, env)
    except KeyError:
        cv = None
    return VolumeReport(report, copy_bytes, cv, unbounded)


# stream balance ------------------------------------------------------------


def _stream_sides(s: Optional[Sdfg], st: State, env) -> Dict[Tuple[str, Tuple[int, ...]], Dict[str, list]]:
    """Per (stream, index): lists of (volume, dynamic) for producers and consumers."""
    table: Dict[Tuple[str, Tuple[int, ...]], Dict[str, list]] = {}
    for e in sorted(st.edges.values(), key=lambda e: e.id):
        m = e.memlet
        if m.is_empty or s is None:
            continue
        src, dst = st.nodes[e.src], st.nodes[e.dst]
        if isinstance(src, AccessNode) and isinstance(dst, AccessNode) and m.data in s.containers:
            # a direct copy pushes (pops) the whole memlet volume at once
            for node, side in ((dst, "producers"), (src, "consumers")):
                if node.data != m.data and s.containers[node.data].is_stream:
                    maps = st.enclosing_maps(node.id)
                    vol = m.volume * product(mp.trip_count() for mp in maps)
                    table.setdefault((node.data, ()), {"producers": [], "consumers": []})[side].append((vol, m.dynamic))
        if m.data not in s.containers or not s.containers[m.data].is_stream:
            continue
        if isinstance(src, (MapEntry, MapExit)) and isinstance(dst, (MapEntry, MapExit)):
            continue
        if isinstance(src, AccessNode) and src.data == m.data:
            side, inner_node = "consumers", dst
        elif isinstance(dst, AccessNode) and dst.data == m.data:
            side, inner_node = "producers", src
        else:
            # innermost edge: producer if it leaves a computation
            side = "producers" if isinstance(src, (Tasklet, LibraryNode, NestedSdfg)) else "consumers"
            inner_node = src if side == "producers" else dst
        if isinstance(inner_node, (MapEntry, MapExit)):
            continue  # accounted for at the innermost edge
        maps = st.enclosing_maps(inner_node.id)
        idx_params = set()
        for r in m.subset:
            idx_params |= set(r.begin.free_symbols) | set(r.end.free_symbols)
        enum_maps = [mp for mp in maps if set(mp.params) & idx_params]
        other = [mp for mp in maps if mp not in enum_maps]
        combos = [{}]
        for mp in enum_maps:
            new = []
            for c in combos:
                ranges = [r.substitute(c) for r in mp.ranges]
                try:
                    vals = itertools.product(
                        *[range(evaluate(r.begin, env), evaluate(r.end, env) + 1, evaluate(r.stride, env)) for r in ranges]
                    )
                except KeyError:
                    new = None
                    break
                for v in vals:
                    new.append({**c, **dict(zip(mp.params, v))})
            if new is None:
                combos = None
                break
            combos = new
        dynamic = m.dynamic
        if combos is None:
            key = (m.data, ("*",))
            vol = m.volume * product(mp.trip_count() for mp in maps)
            table.setdefault(key, {"producers": [], "consumers": []})[side].append((vol, True))
            continue
        for c in combos:
            try:
                index = tuple(evaluate(r.begin.substitute(c), env) for r in m.subset)
            except KeyError:
                index = ("*",)
            vol = m.volume.substitute(c) * product(mp.trip_count().substitute(c) for mp in other)
            table.setdefault((m.data, index), {"producers": [], "consumers": []})[side].append((vol, dynamic))
    return table


def _is_zero(v: SymExpr, env) -> bool:
    v = v.substitute(env)
    return v.is_constant and v.value == 0


def stream_balance_check(st: State, s: Optional[Sdfg] = None) -> List[Diagnostic]:
    """Compare total pushed and popped volumes per stream (and per stream-array index)."""
    env = dict(s.constants) if s is not None else {}
    diags = []
    for (name, index), sides in sorted(_stream_sides(s, st, env).items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        label = name if index == () else f"{name}[{', '.join(map(str, index))}]"
        prods, cons = ([(v, d) for v, d in sides[k] if not _is_zero(v, env)] for k in ("producers", "consumers"))
        if not prods and not cons:
            continue
        if not prods or not cons:
            which = "producer" if not prods else "consumer"
            # e.g. the spare end slot of a systolic stream array, only touched under a guard
            sev = "info" if all(d for _, d in prods + cons) else "warning"
            diags.append(Diagnostic(sev, "stream-unmatched", f"{label} has no {which} in this state", st.name))
            continue
        if any(d for _, d in prods) or any(d for _, d in cons):
            diags.append(Diagnostic("info", "stream-undecidable", f"{label}: dynamic volume, balance undecidable", st.name))
            continue
        pv = sum((v for v, _ in prods), SymExpr.const(0))
        cv = sum((v for v, _ in cons), SymExpr.const(0))
        pv_c, cv_c = pv.substitute(env), cv.substitute(env)
        if pv_c != cv_c:
            diags.append(Diagnostic("error", "stream-imbalance", f"{label}: produced {pv} but consumed {cv}", st.name))
    return diags


def stream_volumes(st: State, s: Sdfg, name: str) -> Dict[str, List[SymExpr]]:
    """Outer-edge volumes of all pushes/pops of ``name`` (one entry per access-node edge)."""
    out = {"producers": [], "consumers": []}
    for an in st.access_nodes(name):
        out["producers"].extend(e.memlet.volume for e in st.in_edges(an) if not e.memlet.is_empty)
        out["consumers"].extend(e.memlet.volume for e in st.out_edges(an) if not e.memlet.is_empty)
    return out


# reachability --------------------------------------------------------------


def depends(st: State, a, b) -> bool:
    """True iff ``b`` is reachable from ``a`` along dataflow edges (reflexive)."""
    a = a.id if not isinstance(a, int) else a
    b = b.id if not isinstance(b, int) else b
    if a == b:
        return True
    seen, stack = {a}, [a]
    while stack:
        n = stack.pop()
        for e in st.out_edges(n):
            if e.dst == b:
                return True
            if e.dst not in seen:
                seen.add(e.dst)
                stack.append(e.dst)
    return False
