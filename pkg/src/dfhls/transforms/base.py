"""Pass results and graph helpers shared by the transformations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

from ..ir.core import AccessNode, Edge, MapEntry, MapExit, Range, Sdfg, State, Tasklet
from ..symbolic import sym


@dataclass
class PassReport:
    pass_id: str
    applied: bool
    sites: List[Tuple[str, str]] = field(default_factory=list)  # (state, node or container)
    reason: Optional[str] = None
    notes: List[str] = field(default_factory=list)

    def as_dict(self):
        d = {"pass": self.pass_id, "applied": self.applied, "sites": [list(x) for x in self.sites]}
        if self.reason:
            d["reason"] = self.reason
        if self.notes:
            d["notes"] = list(self.notes)
        return d

    def __str__(self):
        if not self.applied:
            return f"{self.pass_id}: not applied ({self.reason})"
        where = ", ".join(f"{a}:{b}" for a, b in self.sites)
        return f"{self.pass_id}: applied at {where}"


class PassResult(NamedTuple):
    sdfg: Sdfg
    report: PassReport


class PassError(ValueError):
    """A pass was asked to do something it cannot do safely."""


def unchanged(s: Sdfg, pass_id: str, reason: str) -> PassResult:
    return PassResult(s, PassReport(pass_id, False, reason=reason))


# memlet paths ----------------------------------------------------------------


@dataclass
class Lineage:
    """One memlet tree between an access node and a single computation endpoint."""

    access: AccessNode
    edges: List[Edge]  # every edge of the tree
    outer: Edge  # edge touching the access node
    inner: Edge  # edge touching the computation
    maps: List[MapEntry]  # crossed scopes, outermost first
    write: bool

    @property
    def endpoint(self) -> int:
        return self.inner.src if self.write else self.inner.dst

    @property
    def conn(self) -> Optional[str]:
        return self.inner.src_conn if self.write else self.inner.dst_conn


def lineage(st: State, outer: Edge, write: bool) -> Optional[Lineage]:
    """Trace ``outer`` to its single computation endpoint, or None if it fans out."""
    tree = st.memlet_tree(outer)
    if write:
        inner = tree[0]
        if any(len(st.next_edges(e)) > 1 for e in tree):
            return None
        crossed = [st.nodes[e.dst] for e in tree if isinstance(st.nodes[e.dst], MapExit)]
        maps = [st.entry_of(x) for x in reversed(crossed)]
        access = st.nodes[outer.dst]
    else:
        leaves = [e for e in tree if not st.next_edges(e)]
        if len(leaves) != 1:
            return None
        inner = leaves[0]
        maps = [st.nodes[e.dst] for e in tree if isinstance(st.nodes[e.dst], MapEntry)]
        access = st.nodes[outer.src]
    if not isinstance(access, AccessNode):
        return None
    return Lineage(access, tree, outer, inner, maps, write)


def canonical_order(lin: Lineage) -> Tuple:
    """Ranges and indices of a lineage over positional parameter names."""
    params = [p for m in lin.maps for p in m.params]
    mapping = {p: sym(f"_{k}") for k, p in enumerate(params)}
    ranges = tuple(str(r.substitute(mapping)) for m in lin.maps for r in m.ranges)
    subset = tuple(str(r.substitute(mapping)) for r in lin.inner.memlet.subset)
    return ranges, subset


def point_subset(subset) -> bool:
    return all(r.begin == r.end for r in subset)


def full_range(subset, shape) -> bool:
    if len(subset) != len(shape):
        return False
    return all(r.begin == 0 and r.end == n - 1 and r.stride == 1 for r, n in zip(subset, shape))


def replicate_maps(st: State, maps: List[MapEntry], prefix: str) -> List[Tuple[MapEntry, MapExit]]:
    """Copies of a chain of map scopes (outermost first), nested in order."""
    out = []
    for m in maps:
        e = MapEntry(f"{prefix}_{m.label}", m.params, tuple(Range(r.begin, r.end, r.stride) for r in m.ranges), m.schedule)
        st.add_node(e)
        x = st.add_node(MapExit(e.label, e.id))
        out.append((e, x))
    return out


def remove_tree(st: State, lin: Lineage):
    for e in lin.edges:
        if e.id in st.edges:
            st.remove_edge(e)


def drop_if_isolated(st: State, node):
    if node.id in st.nodes and not st.in_edges(node) and not st.out_edges(node):
        st.remove_node(node)


def access_sites(s: Sdfg, name: str):
    """All (state, access node) pairs for container ``name``."""
    return [(st, n) for st in s.state_order() for n in st.access_nodes(name)]


def is_computation(node) -> bool:
    return isinstance(node, Tasklet)
