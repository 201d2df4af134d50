"""Core data model: containers, memlets, nodes, states and the SDFG itself."""

from __future__ import annotations

import copy
import enum
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..symbolic import SymExpr, as_expr, parse_expr, product

SCALAR_TYPES = {"f32": np.float32, "f64": np.float64, "i32": np.int32, "i64": np.int64}
SCALAR_BYTES = {"f32": 4, "f64": 8, "i32": 4, "i64": 8}
DEFAULT_STREAM_CAPACITY = 4


@dataclass(frozen=True)
class ElementType:
    base: str
    vector: Optional[int] = None

    def __post_init__(self):
        if self.base not in SCALAR_TYPES:
            raise ValueError(f"unknown element type '{self.base}'")
        if self.vector is not None and self.vector < 1:
            raise ValueError("vector width must be >= 1")

    @property
    def width(self) -> int:
        return self.vector or 1

    @property
    def is_vector(self) -> bool:
        return self.vector is not None

    @property
    def nbytes(self) -> int:
        return SCALAR_BYTES[self.base] * self.width

    @property
    def dtype(self):
        return SCALAR_TYPES[self.base]

    def scalar(self) -> "ElementType":
        return ElementType(self.base)

    def vectorized(self, width: int) -> "ElementType":
        if self.is_vector:
            raise ValueError("vector of vector is not allowed")
        return ElementType(self.base, width)

    def __str__(self):
        return f"vector({self.base},{self.vector})" if self.is_vector else self.base

    @staticmethod
    def parse(text: str) -> "ElementType":
        m = re.fullmatch(r"\s*vector\(\s*(\w+)\s*,\s*(\d+)\s*\)\s*", text)
        if m:
            if m.group(1).startswith("vector"):
                raise ValueError("vector of vector is not allowed")
            return ElementType(m.group(1), int(m.group(2)))
        aliases = {"float32": "f32", "float64": "f64", "int32": "i32", "int64": "i64"}
        text = text.strip()
        return ElementType(aliases.get(text, text))


f32 = ElementType("f32")
f64 = ElementType("f64")
i32 = ElementType("i32")
i64 = ElementType("i64")


class StorageKind(enum.Enum):
    HostDram = "HostDram"
    DeviceDram = "DeviceDram"
    OnChipLocal = "OnChipLocal"
    OnChipRegister = "OnChipRegister"
    ShiftRegister = "ShiftRegister"

    @property
    def is_dram(self) -> bool:
        return self in (StorageKind.HostDram, StorageKind.DeviceDram)

    @property
    def on_device(self) -> bool:
        return self is not StorageKind.HostDram

    @property
    def on_chip(self) -> bool:
        return not self.is_dram


class DataKind(enum.Enum):
    array = "array"
    stream = "stream"
    scalar = "scalar"


@dataclass
class DataDescriptor:
    name: str
    kind: DataKind
    element: ElementType
    shape: Tuple[SymExpr, ...] = ()
    storage: StorageKind = StorageKind.HostDram
    capacity: Optional[int] = None
    transient: bool = False
    bank: Optional[int] = None

    def __post_init__(self):
        self.shape = tuple(as_expr(s) for s in self.shape)
        if isinstance(self.kind, str):
            self.kind = DataKind(self.kind)
        if isinstance(self.storage, str):
            self.storage = StorageKind(self.storage)

    @property
    def is_stream(self) -> bool:
        return self.kind is DataKind.stream

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def total_size(self) -> SymExpr:
        return product(self.shape)


# subsets -------------------------------------------------------------------


@dataclass(frozen=True)
class Range:
    """Inclusive range ``begin..end`` with ``stride``."""

    begin: SymExpr
    end: SymExpr
    stride: SymExpr = field(default_factory=lambda: SymExpr.const(1))

    @staticmethod
    def point(e) -> "Range":
        e = as_expr(e)
        return Range(e, e, SymExpr.const(1))

    def size(self) -> SymExpr:
        return (self.end - self.begin) // self.stride + 1

    def substitute(self, mapping) -> "Range":
        return Range(self.begin.substitute(mapping), self.end.substitute(mapping), self.stride.substitute(mapping))

    def __str__(self):
        if self.begin == self.end:
            return str(self.begin)
        s = f"{self.begin}:{self.end + 1}"
        if self.stride != SymExpr.const(1):
            s += f":{self.stride}"
        return s


def _split_top(text: str, sep: str) -> List[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def parse_subset(text: str) -> Tuple[Range, ...]:
    """Parse ``"i, 0:N, 0:N:2"`` (python-style exclusive ends) into ranges."""
    text = text.strip()
    if not text:
        return ()
    out = []
    for dim in _split_top(text, ","):
        pieces = _split_top(dim, ":")
        if len(pieces) == 1:
            out.append(Range.point(parse_expr(pieces[0])))
        elif len(pieces) in (2, 3):
            b = parse_expr(pieces[0])
            e = parse_expr(pieces[1]) - 1
            s = parse_expr(pieces[2]) if len(pieces) == 3 else SymExpr.const(1)
            out.append(Range(b, e, s))
        else:
            raise ValueError(f"malformed subset dimension '{dim}'")
    return tuple(out)


def subset_str(subset: Sequence[Range]) -> str:
    return ", ".join(str(r) for r in subset)


@dataclass
class Memlet:
    data: Optional[str]
    subset: Tuple[Range, ...] = ()
    volume: SymExpr = field(default_factory=lambda: SymExpr.const(1))
    dynamic: bool = False
    wcr: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.subset, str):
            self.subset = parse_subset(self.subset)
        self.subset = tuple(self.subset)
        self.volume = as_expr(self.volume)
        if self.wcr is not None and self.wcr not in ("sum", "min", "max"):
            raise ValueError(f"unsupported write-conflict resolution '{self.wcr}'")

    @staticmethod
    def simple(data: str, subset: str = "0", volume=None, dynamic: bool = False, wcr: Optional[str] = None) -> "Memlet":
        ranges = parse_subset(subset)
        if volume is None:
            volume = product(r.size() for r in ranges)
        return Memlet(data, ranges, as_expr(volume), dynamic, wcr)

    @staticmethod
    def empty() -> "Memlet":
        return Memlet(None, (), SymExpr.const(0))

    @property
    def is_empty(self) -> bool:
        return self.data is None

    def num_elements(self) -> SymExpr:
        return product(r.size() for r in self.subset)

    def substitute(self, mapping) -> "Memlet":
        return Memlet(
            self.data,
            tuple(r.substitute(mapping) for r in self.subset),
            self.volume.substitute(mapping),
            self.dynamic,
            self.wcr,
        )

    def __str__(self):
        if self.is_empty:
            return "<empty>"
        s = f"{self.data}[{subset_str(self.subset)}] (vol {self.volume}{', dyn' if self.dynamic else ''})"
        return s + (f" wcr={self.wcr}" if self.wcr else "")


# nodes ---------------------------------------------------------------------


class Schedule(enum.Enum):
    Pipelined = "Pipelined"
    Unrolled = "Unrolled"


class Node:
    @property
    def in_connectors(self) -> Tuple[str, ...]:
        return ()

    @property
    def out_connectors(self) -> Tuple[str, ...]:
        return ()

    def __repr__(self):
        return f"{type(self).__name__}({self.label!r}, id={self.id})"


@dataclass(repr=False, eq=False)
class AccessNode(Node):
    data: str
    id: int = -1

    @property
    def label(self):
        return self.data


@dataclass(repr=False, eq=False)
class Tasklet(Node):
    label: str
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]
    code: str
    tables: Dict[str, list] = field(default_factory=dict)
    id: int = -1

    def __post_init__(self):
        self.inputs = tuple(self.inputs)
        self.outputs = tuple(self.outputs)

    @property
    def in_connectors(self):
        return self.inputs

    @property
    def out_connectors(self):
        return self.outputs


@dataclass(repr=False, eq=False)
class MapEntry(Node):
    label: str
    params: Tuple[str, ...]
    ranges: Tuple[Range, ...]
    schedule: Schedule = Schedule.Pipelined
    id: int = -1

    def __post_init__(self):
        self.params = tuple(self.params)
        self.ranges = tuple(self.ranges)

    def trip_count(self) -> SymExpr:
        return product(r.size() for r in self.ranges)


@dataclass(repr=False, eq=False)
class MapExit(Node):
    label: str
    entry: int = -1
    id: int = -1


@dataclass(repr=False, eq=False)
class LibraryNode(Node):
    label: str
    kind: str
    attrs: Dict[str, object] = field(default_factory=dict)
    inputs: Tuple[str, ...] = ()
    outputs: Tuple[str, ...] = ()
    id: int = -1

    def __post_init__(self):
        self.inputs = tuple(self.inputs)
        self.outputs = tuple(self.outputs)

    @property
    def in_connectors(self):
        return self.inputs

    @property
    def out_connectors(self):
        return self.outputs


@dataclass(repr=False, eq=False)
class NestedSdfg(Node):
    label: str
    sdfg: "Sdfg"
    inputs: Tuple[str, ...] = ()
    outputs: Tuple[str, ...] = ()
    symbol_mapping: Dict[str, SymExpr] = field(default_factory=dict)
    id: int = -1

    def __post_init__(self):
        self.inputs = tuple(self.inputs)
        self.outputs = tuple(self.outputs)
        self.symbol_mapping = {k: as_expr(v) for k, v in self.symbol_mapping.items()}

    @property
    def in_connectors(self):
        return self.inputs

    @property
    def out_connectors(self):
        return self.outputs


@dataclass(eq=False)
class Edge:
    src: int
    src_conn: Optional[str]
    dst: int
    dst_conn: Optional[str]
    memlet: Memlet
    id: int = -1

    def __repr__(self):
        return f"Edge#{self.id}({self.src}.{self.src_conn} -> {self.dst}.{self.dst_conn}: {self.memlet})"


# states --------------------------------------------------------------------


class State:
    """A dataflow multigraph of nodes connected by memlet edges."""

    def __init__(self, name: str):
        self.name = name
        self.nodes: Dict[int, Node] = {}
        self.edges: Dict[int, Edge] = {}
        self._next_node = 0
        self._next_edge = 0
        self._cache = {}
        self.sdfg: Optional["Sdfg"] = None

    def _touch(self):
        self._cache.clear()

    # construction
    def add_node(self, node: Node, id: Optional[int] = None) -> Node:
        if id is None:
            id = self._next_node
        if id in self.nodes:
            raise ValueError(f"duplicate node id {id} in state '{self.name}'")
        node.id = id
        self.nodes[id] = node
        self._next_node = max(self._next_node, id + 1)
        self._touch()
        return node

    def add_access(self, data: str) -> AccessNode:
        return self.add_node(AccessNode(data))

    def add_tasklet(self, label, inputs, outputs, code, tables=None) -> Tasklet:
        return self.add_node(Tasklet(label, tuple(inputs), tuple(outputs), code, dict(tables or {})))

    def add_map(self, label: str, ranges: Dict[str, str], schedule: Schedule = Schedule.Pipelined):
        """Add a map scope; ``ranges`` maps parameter -> ``"begin:end[:stride]"`` (exclusive end)."""
        params = tuple(ranges)
        rngs = tuple(parse_subset(r)[0] for r in ranges.values())
        entry = self.add_node(MapEntry(label, params, rngs, schedule))
        exit_ = self.add_node(MapExit(label, entry.id))
        return entry, exit_

    def add_library(self, label, kind, inputs, outputs, **attrs) -> LibraryNode:
        return self.add_node(LibraryNode(label, kind, dict(attrs), tuple(inputs), tuple(outputs)))

    def add_edge(self, src, src_conn, dst, dst_conn, memlet: Memlet, id: Optional[int] = None) -> Edge:
        src = src.id if isinstance(src, Node) else src
        dst = dst.id if isinstance(dst, Node) else dst
        if id is None:
            id = self._next_edge
        e = Edge(src, src_conn, dst, dst_conn, memlet, id)
        self.edges[id] = e
        self._next_edge = max(self._next_edge, id + 1)
        self._touch()
        return e

    def add_memlet_path(self, *path: Node, memlet: Memlet, src_conn=None, dst_conn=None) -> List[Edge]:
        """Connect ``path[0] -> ... -> path[-1]`` through map entries or exits.

        ``memlet`` is the innermost memlet (adjacent to the computation). Outer
        edges get subsets widened over the crossed map ranges and volumes
        multiplied by their trip counts.
        """
        nodes = list(path)
        if len(nodes) < 2:
            raise ValueError("path needs at least two nodes")
        scopes = nodes[1:-1]
        if not all(isinstance(n, (MapEntry, MapExit)) for n in scopes):
            raise ValueError("interior path nodes must be map entries or exits")
        reading = all(isinstance(n, MapEntry) for n in scopes)
        if not reading and not all(isinstance(n, MapExit) for n in scopes):
            raise ValueError("path mixes map entries and exits")
        sfx = {n.id: self._free_suffix(n, memlet.data or "e") for n in scopes}
        edges = []
        for i in range(len(nodes) - 1):
            a, b = nodes[i], nodes[i + 1]
            crossed = scopes[i:] if reading else scopes[:i]
            mm = self._outer_memlet(memlet, crossed)
            sc = src_conn if i == 0 else "OUT_" + sfx[a.id]
            dc = dst_conn if i == len(nodes) - 2 else "IN_" + sfx[b.id]
            edges.append(self.add_edge(a, sc, b, dc, mm))
        return edges

    def _free_suffix(self, node: Node, base: str) -> str:
        used = {e.dst_conn for e in self.in_edges(node)} | {e.src_conn for e in self.out_edges(node)}
        cand, i = base, 1
        while "IN_" + cand in used or "OUT_" + cand in used:
            cand = f"{base}_{i}"
            i += 1
        return cand

    def _entries(self, maps) -> List[MapEntry]:
        return [m if isinstance(m, MapEntry) else self.nodes[m.entry] for m in maps]

    def _outer_memlet(self, memlet: Memlet, crossed) -> Memlet:
        if not crossed or memlet.is_empty:
            return copy.copy(memlet)
        entries = self._entries(crossed)
        vol = memlet.volume
        dynamic = memlet.dynamic
        for entry in entries:
            vol = vol * entry.trip_count()
        # inner ranges may depend on outer parameters: keep an upper bound
        for entry in entries:
            for p, r in zip(entry.params, entry.ranges):
                if p in vol.free_symbols:
                    vol = _bound(vol, p, r, lower=False)
                    dynamic = True
        shape = None
        if self.sdfg is not None and memlet.data in self.sdfg.containers:
            shape = self.sdfg.containers[memlet.data].shape
        return Memlet(memlet.data, self._widen(memlet.subset, entries, shape), vol, dynamic, memlet.wcr)

    def _widen(self, subset, entries, shape=None) -> Tuple[Range, ...]:
        """Bounding subset of ``subset`` over the parameter ranges of ``entries``."""
        out = []
        for d, r in enumerate(subset):
            b, e = r.begin, r.end
            for entry in reversed(entries):
                for p, pr in zip(entry.params, entry.ranges):
                    if p in b.free_symbols or p in e.free_symbols:
                        if shape is not None and d < len(shape) and not (_linear_in(b, p) and _linear_in(e, p)):
                            b, e = SymExpr.const(0), shape[d] - 1
                            continue
                        b, e = _bound(b, p, pr, lower=True), _bound(e, p, pr, lower=False)
            out.append(Range(b, e, r.stride if b == r.begin else SymExpr.const(1)))
        return tuple(out)

    # removal
    def remove_edge(self, e: Union[Edge, int]):
        eid = e.id if isinstance(e, Edge) else e
        del self.edges[eid]
        self._touch()

    def remove_node(self, n: Union[Node, int]):
        nid = n.id if isinstance(n, Node) else n
        for e in list(self.edges.values()):
            if e.src == nid or e.dst == nid:
                del self.edges[e.id]
        del self.nodes[nid]
        self._touch()

    # queries
    def node(self, nid: int) -> Node:
        return self.nodes[nid]

    def in_edges(self, n) -> List[Edge]:
        nid = n.id if isinstance(n, Node) else n
        idx = self._cache.get("in")
        if idx is None:
            idx = {k: [] for k in self.nodes}
            for e in sorted(self.edges.values(), key=lambda e: e.id):
                idx.setdefault(e.dst, []).append(e)
            self._cache["in"] = idx
        return list(idx.get(nid, ()))

    def out_edges(self, n) -> List[Edge]:
        nid = n.id if isinstance(n, Node) else n
        idx = self._cache.get("out")
        if idx is None:
            idx = {k: [] for k in self.nodes}
            for e in sorted(self.edges.values(), key=lambda e: e.id):
                idx.setdefault(e.src, []).append(e)
            self._cache["out"] = idx
        return list(idx.get(nid, ()))

    def access_nodes(self, data: Optional[str] = None) -> List[AccessNode]:
        return [n for _, n in sorted(self.nodes.items()) if isinstance(n, AccessNode) and (data is None or n.data == data)]

    def nodes_of(self, cls) -> List[Node]:
        return [n for _, n in sorted(self.nodes.items()) if isinstance(n, cls)]

    def exit_of(self, entry: Union[MapEntry, int]) -> MapExit:
        eid = entry.id if isinstance(entry, Node) else entry
        for n in self.nodes.values():
            if isinstance(n, MapExit) and n.entry == eid:
                return n
        raise KeyError(f"map entry {eid} has no exit")

    def entry_of(self, exit_: MapExit) -> MapEntry:
        return self.nodes[exit_.entry]

    def topological_order(self) -> List[int]:
        """Stable topological order (ties broken by node id); raises on cycles."""
        cached = self._cache.get("topo")
        if cached is not None:
            return list(cached)
        import heapq

        indeg = {n: 0 for n in self.nodes}
        for e in self.edges.values():
            indeg[e.dst] += 1
        heap = [n for n, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            n = heapq.heappop(heap)
            order.append(n)
            for e in self.out_edges(n):
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    heapq.heappush(heap, e.dst)
        if len(order) != len(self.nodes):
            raise CycleError(f"state '{self.name}' contains a dataflow cycle")
        self._cache["topo"] = order
        return list(order)

    def scope_dict(self) -> Dict[int, Optional[int]]:
        """Map each node id to the id of its innermost enclosing map entry.

        Map exits belong to the scope enclosing their entry. Nodes without
        inputs take the deepest scope among their successors.
        """
        cached = self._cache.get("scope")
        if cached is not None:
            return cached
        scope: Dict[int, Optional[int]] = {}
        order = self.topological_order()
        for nid in order:
            node = self.nodes[nid]
            if isinstance(node, MapExit):
                scope[nid] = scope.get(node.entry)
                continue
            best, seen = None, False
            for e in self.in_edges(nid):
                src = self.nodes[e.src]
                s = src.id if isinstance(src, MapEntry) else scope[src.id]
                if not seen or self._depth(scope, s) > self._depth(scope, best):
                    best, seen = s, True
            scope[nid] = best
        for nid in reversed(order):
            if self.in_edges(nid) or isinstance(self.nodes[nid], MapExit):
                continue
            best = None
            for e in self.out_edges(nid):
                dst = self.nodes[e.dst]
                s = dst.entry if isinstance(dst, MapExit) else scope[dst.id]
                if s == nid:
                    continue  # own scope of an input-less map entry
                if self._depth(scope, s) > self._depth(scope, best):
                    best = s
            scope[nid] = best
        for nid, node in self.nodes.items():
            if isinstance(node, MapExit):
                scope[nid] = scope.get(node.entry)
        self._cache["scope"] = scope
        return scope

    @staticmethod
    def _depth(scope, s) -> int:
        d = 0
        while s is not None:
            d += 1
            s = scope.get(s)
        return d

    def scope_children(self) -> Dict[Optional[int], List[int]]:
        """Children of each scope (``None`` is the top level), in topological order."""
        cached = self._cache.get("children")
        if cached is not None:
            return cached
        scope = self.scope_dict()
        children: Dict[Optional[int], List[int]] = {None: []}
        for nid in self.topological_order():
            children.setdefault(scope[nid], []).append(nid)
        self._cache["children"] = children
        return children

    def enclosing_maps(self, nid: int) -> List[MapEntry]:
        """Enclosing map entries, outermost first."""
        scope = self.scope_dict()
        out = []
        s = scope[nid]
        while s is not None:
            out.append(self.nodes[s])
            s = scope[s]
        return out[::-1]

    def next_edges(self, e: Edge) -> List[Edge]:
        """Edges continuing ``e``'s memlet on the other side of a map node."""
        dst = self.nodes[e.dst]
        if isinstance(dst, (MapEntry, MapExit)) and e.dst_conn and e.dst_conn.startswith("IN_"):
            conn = "OUT_" + e.dst_conn[3:]
            return [o for o in self.out_edges(dst) if o.src_conn == conn]
        return []

    def prev_edges(self, e: Edge) -> List[Edge]:
        src = self.nodes[e.src]
        if isinstance(src, (MapEntry, MapExit)) and e.src_conn and e.src_conn.startswith("OUT_"):
            conn = "IN_" + e.src_conn[4:]
            return [i for i in self.in_edges(src) if i.dst_conn == conn]
        return []

    def memlet_tree(self, e: Edge) -> List[Edge]:
        """All edges sharing ``e``'s memlet across map boundaries, root first."""
        root = e
        while True:
            prev = self.prev_edges(root)
            if len(prev) != 1:
                break
            root = prev[0]
        out, frontier = [], [root]
        while frontier:
            cur = frontier.pop(0)
            out.append(cur)
            frontier.extend(self.next_edges(cur))
        return out

    def inner_edges(self, e: Edge) -> List[Edge]:
        """Innermost edges (adjacent to the computation) of ``e``'s memlet tree."""
        tree = self.memlet_tree(e)
        if isinstance(self.nodes[tree[0].dst], MapExit):
            return [tree[0]]
        return [t for t in tree if not self.next_edges(t)]

    def outer_edge(self, e: Edge) -> Edge:
        """The edge of ``e``'s memlet path that touches an access node outside the crossed maps."""
        cur = e
        while True:
            prev = self.prev_edges(cur)
            if not prev:
                break
            cur = prev[0]
        if isinstance(self.nodes[cur.dst], MapExit):
            while True:
                nxt = self.next_edges(cur)
                if not nxt:
                    break
                cur = nxt[0]
        return cur

    def copy(self) -> "State":
        return copy.deepcopy(self)


def _linear_in(e: SymExpr, p: str) -> bool:
    for m, _ in e.terms:
        for a, k in m:
            if a == p and (k != 1 or len(m) != 1):
                return False
            if not isinstance(a, str) and p in a.free_symbols():
                return False
    return True


def _bound(e: SymExpr, p: str, r: Range, lower: bool) -> SymExpr:
    """Substitute ``p`` by the bound of ``r`` that extremizes ``e`` (linear, sign from coefficient)."""
    coeff = None
    for m, c in e.terms:
        if m == ((p, 1),):
            coeff = c
        elif any(a == p for a, _ in m) or any(not isinstance(a, str) and p in a.free_symbols() for a, _ in m):
            coeff = None
            break
    if coeff is None:
        # non-linear in p: fall back to the range endpoints in order
        return e.substitute({p: r.begin if lower else r.end})
    use_begin = (coeff > 0) == lower
    return e.substitute({p: r.begin if use_begin else r.end})


class CycleError(ValueError):
    pass


# sdfg ----------------------------------------------------------------------


@dataclass
class InterstateEdge:
    src: str
    dst: str
    condition: Optional[str] = None
    assignments: Dict[str, SymExpr] = field(default_factory=dict)

    def __post_init__(self):
        self.assignments = {k: as_expr(v) for k, v in self.assignments.items()}


class Sdfg:
    """Control-flow graph of dataflow states plus the container declarations."""

    def __init__(self, name: str):
        self.name = name
        self.containers: Dict[str, DataDescriptor] = {}
        self.symbols: Dict[str, str] = {}
        self.constants: Dict[str, int] = {}
        self.states: Dict[str, State] = {}
        self.interstate_edges: List[InterstateEdge] = []
        self.start_state: Optional[str] = None

    # containers
    def add_container(self, desc: DataDescriptor) -> DataDescriptor:
        if desc.name in self.containers:
            raise ValueError(f"container '{desc.name}' already declared")
        self.containers[desc.name] = desc
        for s in desc.shape:
            for sym in s.free_symbols:
                if sym not in self.constants:
                    self.symbols.setdefault(sym, "int")
        return desc

    def add_array(self, name, shape, element=f32, storage=StorageKind.HostDram, transient=False, bank=None):
        return self.add_container(
            DataDescriptor(name, DataKind.array, element, tuple(as_expr(s) for s in shape), storage, None, transient, bank)
        )

    def add_scalar(self, name, element=f32, storage=StorageKind.HostDram, transient=False):
        return self.add_container(DataDescriptor(name, DataKind.scalar, element, (), storage, None, transient))

    def add_stream(self, name, element=f32, shape=(), capacity=DEFAULT_STREAM_CAPACITY, storage=StorageKind.OnChipLocal, transient=True):
        return self.add_container(
            DataDescriptor(name, DataKind.stream, element, tuple(as_expr(s) for s in shape), storage, capacity, transient)
        )

    def unique_name(self, base: str) -> str:
        if base not in self.containers:
            return base
        i = 1
        while f"{base}_{i}" in self.containers:
            i += 1
        return f"{base}_{i}"

    def add_symbol(self, name: str):
        self.symbols.setdefault(name, "int")

    # states
    def add_state(self, name: str, is_start: bool = False) -> State:
        if name in self.states:
            raise ValueError(f"state '{name}' already exists")
        st = State(name)
        st.sdfg = self
        self.states[name] = st
        if is_start or self.start_state is None:
            self.start_state = name
        return st

    def unique_state_name(self, base: str) -> str:
        if base not in self.states:
            return base
        i = 1
        while f"{base}_{i}" in self.states:
            i += 1
        return f"{base}_{i}"

    def add_interstate_edge(self, src, dst, condition=None, assignments=None) -> InterstateEdge:
        src = src.name if isinstance(src, State) else src
        dst = dst.name if isinstance(dst, State) else dst
        e = InterstateEdge(src, dst, condition, dict(assignments or {}))
        self.interstate_edges.append(e)
        return e

    def state_order(self) -> List[State]:
        """States reachable from the start, in BFS order, then unreachable ones."""
        if not self.states:
            return []
        seen, order = set(), []
        queue = [self.start_state] if self.start_state else []
        while queue:
            s = queue.pop(0)
            if s in seen or s not in self.states:
                continue
            seen.add(s)
            order.append(self.states[s])
            for e in self.interstate_edges:
                if e.src == s:
                    queue.append(e.dst)
        order.extend(st for name, st in self.states.items() if name not in seen)
        return order

    def out_interstate(self, state: str) -> List[InterstateEdge]:
        return [e for e in self.interstate_edges if e.src == state]

    def all_library_nodes(self) -> Iterator[Tuple[State, LibraryNode]]:
        for st in self.state_order():
            for n in st.nodes_of(LibraryNode):
                yield st, n

    def copy(self) -> "Sdfg":
        return copy.deepcopy(self)

    def __eq__(self, other):
        if not isinstance(other, Sdfg):
            return NotImplemented
        from .serialize import to_dict

        return to_dict(self) == to_dict(other)

    def __repr__(self):
        return f"Sdfg({self.name!r}, states={list(self.states)})"
