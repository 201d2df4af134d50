"""Widening containers to vector element types."""

from __future__ import annotations

import ast
from typing import Dict, Set, Tuple

from ..ir.core import LibraryNode, MapEntry, Memlet, Range, Sdfg, State, Tasklet
from ..symbolic import SymExpr, evaluate, sym
from .base import PassError, PassReport, PassResult, unchanged

PASS_ID = "vectorize"
VECTOR_KINDS = {"Axpy", "Dot", "Stencil"}


class _Refused(Exception):
    pass


def _divisible(e: SymExpr, W: int, env, what: str, notes):
    try:
        if evaluate(e, env) % W:
            raise _Refused(f"{what} {e} is not divisible by W={W}")
    except KeyError:
        notes.append(f"assumes {what} {e} is a multiple of {W}")


def _subscripts_connectors(code: str) -> bool:
    return any(isinstance(n, ast.Subscript) for n in ast.walk(ast.parse(code)))


def _collect(s: Sdfg, start: str, W: int, env, notes):
    """Containers and innermost maps that must be widened together."""
    C: Set[str] = set()
    maps: Dict[Tuple[str, int], str] = {}
    libs: Set[Tuple[str, int]] = set()
    queue = [start]
    while queue:
        c = queue.pop()
        if c in C:
            continue
        C.add(c)
        d = s.containers[c]
        if d.element.is_vector:
            raise _Refused(f"'{c}' is already a vector container")
        if not d.is_stream:
            if not d.shape:
                raise _Refused(f"'{c}' is a scalar")
            _divisible(d.shape[-1], W, env, f"innermost extent of '{c}'", notes)
        for st in s.state_order():
            for e in list(st.edges.values()):
                if e.memlet.data != c:
                    continue
                src, dst = st.nodes[e.src], st.nodes[e.dst]
                lib = src if isinstance(src, LibraryNode) else dst if isinstance(dst, LibraryNode) else None
                if lib is not None:
                    if lib.kind not in VECTOR_KINDS:
                        raise _Refused(f"library node '{lib.label}' ({lib.kind}) does not take vector operands")
                    if not d.is_stream and not _full_innermost(e.memlet, d):
                        raise _Refused(f"'{lib.label}' reads a partial row of '{c}'")
                    libs.add((st.name, lib.id))
                    continue
                t = src if isinstance(src, Tasklet) else dst if isinstance(dst, Tasklet) else None
                if t is None:
                    continue
                scope = st.enclosing_maps(t.id)
                if not scope:
                    raise _Refused(f"tasklet '{t.label}' accesses '{c}' outside a map")
                inner = scope[-1]
                p, r = inner.params[-1], inner.ranges[-1]
                if not d.is_stream:
                    idx = e.memlet.subset[-1]
                    if idx.begin != idx.end or idx.begin != sym(p):
                        raise _Refused(f"'{t.label}' does not access '{c}' contiguously along '{p}'")
                if r.begin != 0 or r.stride != 1:
                    raise _Refused(f"map '{inner.label}' does not start at 0 with unit stride")
                _divisible(r.end + 1, W, env, f"extent of map '{inner.label}'", notes)
                if (st.name, inner.id) not in maps:
                    maps[(st.name, inner.id)] = p
                    queue.extend(_map_partners(s, st, inner, p))
    return C, maps, libs


def _full_innermost(m: Memlet, d) -> bool:
    r = m.subset[-1]
    return r.begin == 0 and r.end == d.shape[-1] - 1 and r.stride == 1


def _map_partners(s: Sdfg, st: State, entry: MapEntry, p: str):
    """Containers accessed per iteration of ``p`` by the tasklets of ``entry``."""
    out = []
    for nid in st.scope_children().get(entry.id, []):
        t = st.nodes[nid]
        if not isinstance(t, Tasklet):
            continue
        if _subscripts_connectors(t.code):
            raise _Refused(f"tasklet '{t.label}' indexes its connectors")
        for e in st.in_edges(t) + st.out_edges(t):
            m = e.memlet
            if m.is_empty:
                continue
            d = s.containers[m.data]
            along = d.is_stream or (m.subset and m.subset[-1].begin == sym(p) and m.subset[-1].end == sym(p))
            if along:
                out.append(m.data)
            elif e.src == t.id:
                raise _Refused(f"tasklet '{t.label}' writes '{m.data}' independently of '{p}'")
    return out


def _rescale(m: Memlet, W: int, inner: bool) -> Memlet:
    subset = list(m.subset)
    if subset:
        r = subset[-1]
        if r.begin != r.end:
            subset[-1] = Range(r.begin // W, (r.end + 1) // W - 1, SymExpr.const(1))
        elif not inner:
            raise PassError("point access on an outer memlet")
    vol = m.volume if inner else m.volume // W
    return Memlet(m.data, tuple(subset), vol, m.dynamic, m.wcr)


def vectorize(s: Sdfg, container: str, W: int) -> PassResult:
    """Give ``container`` (and everything accessed in lockstep) ``W``-wide elements."""
    if W < 1:
        raise PassError("vector width must be >= 1")
    if container not in s.containers:
        raise PassError(f"unknown container '{container}'")
    if W == 1:
        return unchanged(s, PASS_ID, "W=1 is the identity")
    notes = []
    try:
        C, maps, libs = _collect(s, container, W, dict(s.constants), notes)
    except _Refused as why:
        return unchanged(s, PASS_ID, str(why))
    out = s.copy()
    for c in sorted(C):
        d = out.containers[c]
        d.element = d.element.vectorized(W)
        if not d.is_stream:
            d.shape = d.shape[:-1] + (d.shape[-1] // W,)
    for st in out.state_order():
        for e in st.edges.values():
            if e.memlet.data in C:
                inner = isinstance(st.nodes[e.src], Tasklet) or isinstance(st.nodes[e.dst], Tasklet)
                e.memlet = _rescale(e.memlet, W, inner)
        for (sname, mid), p in maps.items():
            if sname != st.name:
                continue
            m = st.nodes[mid]
            r = m.ranges[-1]
            m.ranges = m.ranges[:-1] + (Range(r.begin, (r.end + 1) // W - 1, r.stride),)
        for sname, lid in libs:
            if sname == st.name:
                st.nodes[lid].attrs["W"] = W
        st._touch()
    sites = [("*", c) for c in sorted(C)] + [(sn, out.states[sn].nodes[mid].label) for sn, mid in sorted(maps)]
    return PassResult(out, PassReport(PASS_ID, True, sites, notes=notes))


def vectorize_all(s: Sdfg, W: int) -> PassResult:
    """Vectorize every device array that can be widened on its own terms."""
    from ..ir.core import StorageKind

    if W == 1:
        return unchanged(s, PASS_ID, "W=1 is the identity")
    cur, sites, notes = s, [], []
    for name in sorted(s.containers):
        d = cur.containers.get(name)
        if d is None or d.element.is_vector or d.storage is StorageKind.HostDram:
            continue
        res = vectorize(cur, name, W)
        if res.report.applied:
            cur = res.sdfg
            sites += res.report.sites
            notes += res.report.notes
    if not sites:
        return unchanged(s, PASS_ID, "no container can be vectorized")
    return PassResult(cur, PassReport(PASS_ID, True, sites, notes=sorted(set(notes))))
