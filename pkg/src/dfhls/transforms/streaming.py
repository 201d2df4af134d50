"""Turning off-chip and transient containers into streams."""

from __future__ import annotations

import dataclasses
from typing import List, Optional, Tuple

from ..analysis import depends, is_compute_state
from ..ir.core import (
    DataDescriptor,
    DataKind,
    LibraryNode,
    Memlet,
    Sdfg,
    State,
    StorageKind,
    Tasklet,
)
from ..symbolic import SymExpr
from .base import (
    Lineage,
    PassError,
    PassReport,
    PassResult,
    access_sites,
    canonical_order,
    drop_if_isolated,
    lineage,
    point_subset,
    remove_tree,
    replicate_maps,
    unchanged,
)

COMPOSED_CAPACITY = 4


def _pop(name: str) -> Memlet:
    return Memlet(name, (), SymExpr.const(1))


def _is_mover(s: Sdfg, st: State, t: Tasklet) -> bool:
    """A one-in one-out copy tasklet with a stream on one side."""
    ins = [e for e in st.in_edges(t) if not e.memlet.is_empty]
    outs = [e for e in st.out_edges(t) if not e.memlet.is_empty]
    if len(ins) != 1 or not outs:
        return False
    data = [ins[0].memlet.data] + [e.memlet.data for e in outs]
    return any(s.containers[d].is_stream for d in data)


def _eligible(s: Sdfg, st: State, lin: Optional[Lineage]) -> Optional[str]:
    if lin is None:
        return "memlet tree fans out"
    t = st.nodes[lin.endpoint]
    if not isinstance(t, Tasklet):
        return f"endpoint '{t.label}' is not a tasklet"
    m = lin.inner.memlet
    if not lin.maps:
        return f"'{t.label}' accesses '{m.data}' outside a map"
    if not point_subset(m.subset) or m.dynamic or m.wcr is not None:
        return f"'{t.label}' does not access one element of '{m.data}' per iteration"
    if _is_mover(s, st, t):
        return f"'{t.label}' already moves '{m.data}' through a stream"
    return None


def _new_stream(s: Sdfg, base: str, element, capacity=None) -> str:
    name = s.unique_name(base)
    kw = {} if capacity is None else {"capacity": capacity}
    s.add_stream(name, element=element, storage=StorageKind.OnChipLocal, transient=True, **kw)
    return name


def _exits(st: State, pairs):
    return [x for _, x in reversed(pairs)]


def _extract_readers(s: Sdfg, st: State, acc, sites, notes):
    name = acc.data
    desc = s.containers[name]
    groups: List[Tuple[Tuple, List[Lineage]]] = []
    for e in st.out_edges(acc):
        if e.memlet.is_empty:
            continue
        lin = lineage(st, e, False)
        why = _eligible(s, st, lin)
        if why:
            notes.append(f"{st.name}: read of '{name}' kept ({why})")
            continue
        order = canonical_order(lin)
        for key, members in groups:
            # a consumer fed by another member would starve behind a shared reader
            if key == order and not any(depends(st, m.endpoint, lin.endpoint) or depends(st, lin.endpoint, m.endpoint) for m in members):
                members.append(lin)
                break
        else:
            groups.append((order, [lin]))
    for _, members in groups:
        first = members[0]
        src = st.add_access(name)
        pairs = replicate_maps(st, first.maps, f"read_{name}")
        t = st.add_tasklet(f"read_{name}", ["v"], ["o"], "o = v")
        st.add_memlet_path(src, *[en for en, _ in pairs], t, memlet=dataclasses.replace(first.inner.memlet), dst_conn="v")
        for lin in members:
            stream = _new_stream(s, f"{name}_in", desc.element)
            st.add_memlet_path(t, *_exits(st, pairs), st.add_access(stream), memlet=_pop(stream), src_conn="o")
            remove_tree(st, lin)
            st.add_memlet_path(st.add_access(stream), *lin.maps, st.nodes[lin.endpoint], memlet=_pop(stream), dst_conn=lin.conn)
            sites.append((st.name, stream))
    drop_if_isolated(st, acc)


def _extract_writers(s: Sdfg, st: State, acc, sites, notes):
    name = acc.data
    desc = s.containers[name]
    for e in st.in_edges(acc):
        if e.memlet.is_empty:
            continue
        lin = lineage(st, e, True)
        why = _eligible(s, st, lin)
        if why:
            notes.append(f"{st.name}: write of '{name}' kept ({why})")
            continue
        stream = _new_stream(s, f"{name}_out", desc.element)
        remove_tree(st, lin)
        inner_exits = [st.exit_of(m) for m in reversed(lin.maps)]
        st.add_memlet_path(st.nodes[lin.endpoint], *inner_exits, st.add_access(stream), memlet=_pop(stream), src_conn=lin.conn)
        pairs = replicate_maps(st, lin.maps, f"write_{name}")
        t = st.add_tasklet(f"write_{name}", ["v"], ["o"], "o = v")
        st.add_memlet_path(st.add_access(stream), *[en for en, _ in pairs], t, memlet=_pop(stream), dst_conn="v")
        st.add_memlet_path(t, *_exits(st, pairs), st.add_access(name), memlet=dataclasses.replace(lin.inner.memlet), src_conn="o")
        sites.append((st.name, stream))
    drop_if_isolated(st, acc)


def streaming_memory(s: Sdfg, container: Optional[str] = None) -> PassResult:
    """Move element-wise device memory accesses into dedicated reader/writer modules."""
    pid = "streaming_memory"
    if container is not None:
        if container not in s.containers:
            raise PassError(f"unknown container '{container}'")
        if s.containers[container].storage is not StorageKind.DeviceDram:
            return unchanged(s, pid, f"'{container}' is not in device memory")
    out = s.copy()
    sites: List[Tuple[str, str]] = []
    notes: List[str] = []
    for st in out.state_order():
        if not is_compute_state(st):
            continue
        for acc in st.access_nodes():
            name = acc.data
            desc = out.containers[name]
            if desc.is_stream or desc.storage is not StorageKind.DeviceDram:
                continue
            if container is not None and name != container:
                continue
            if container is None and _composition_site(out, name)[0] is not None:
                notes.append(f"'{name}' left for streaming_composition")
                continue
            ins = [e for e in st.in_edges(acc) if not e.memlet.is_empty]
            outs = [e for e in st.out_edges(acc) if not e.memlet.is_empty]
            if ins and outs:
                notes.append(f"{st.name}: '{name}' is read and written by one access node")
                continue
            if outs:
                _extract_readers(out, st, acc, sites, notes)
            elif ins:
                _extract_writers(out, st, acc, sites, notes)
    if not sites:
        reason = "no element-wise device memory access found"
        if notes:
            reason += " (" + "; ".join(dict.fromkeys(notes)) + ")"
        return unchanged(s, pid, reason)
    return PassResult(out, PassReport(pid, True, sites, notes=list(dict.fromkeys(notes))))


# composition ---------------------------------------------------------------


def _composition_site(s: Sdfg, name: str):
    """(state, write lineage, read lineage) or (None, reason)."""
    d = s.containers[name]
    if d.is_stream:
        return None, f"'{name}' is already a stream"
    if not d.transient:
        return None, f"'{name}' is not transient"
    sites = access_sites(s, name)
    states = {st.name for st, _ in sites}
    if len(states) != 1:
        return None, f"'{name}' is accessed in {len(states)} states"
    st = sites[0][0]
    scope = st.scope_dict()
    if any(scope[n.id] is not None for _, n in sites):
        return None, f"'{name}' is local to a map scope"
    writes = [e for _, n in sites for e in st.in_edges(n) if not e.memlet.is_empty]
    reads = [e for _, n in sites for e in st.out_edges(n) if not e.memlet.is_empty]
    if len(writes) != 1 or len(reads) != 1:
        return None, f"'{name}' has {len(writes)} writers and {len(reads)} readers"
    wl, rl = lineage(st, writes[0], True), lineage(st, reads[0], False)
    for lin, what in ((wl, "write"), (rl, "read")):
        if lin is None:
            return None, f"the {what} of '{name}' fans out"
        if not isinstance(st.nodes[lin.endpoint], Tasklet):
            return None, f"the {what} of '{name}' is not done by a tasklet"
        m = lin.inner.memlet
        if m.wcr is not None or not point_subset(m.subset):
            return None, f"the {what} of '{name}' is not element-wise"
    if canonical_order(wl) != canonical_order(rl):
        return None, f"'{name}' is written and read in different orders"
    return st, (wl, rl)


def _compose(s: Sdfg, name: str):
    st, (wl, rl) = _composition_site(s, name)
    old = s.containers[name]
    s.containers[name] = DataDescriptor(name, DataKind.stream, old.element, (), StorageKind.OnChipLocal, COMPOSED_CAPACITY, True)
    for e in wl.edges + rl.edges:
        e.memlet = Memlet(name, (), e.memlet.volume, False, None)
    if wl.access.id == rl.access.id:
        reader = st.add_access(name)
        for e in st.out_edges(wl.access):
            e.src = reader.id
    st._touch()


def streaming_composition(s: Sdfg, container: Optional[str] = None) -> PassResult:
    """Replace transient buffers written and read in the same order by streams."""
    pid = "streaming_composition"
    if container is not None and container not in s.containers:
        raise PassError(f"unknown container '{container}'")
    names = [container] if container is not None else sorted(s.containers)
    out = s.copy()
    sites, reasons = [], []
    for name in names:
        st, why = _composition_site(out, name)
        if st is None:
            if container is not None or out.containers[name].transient and not out.containers[name].is_stream:
                reasons.append(why)
            continue
        _compose(out, name)
        sites.append((st.name, name))
    if not sites:
        return unchanged(s, pid, "; ".join(reasons) or "no transient container to compose")
    return PassResult(out, PassReport(pid, True, sites, notes=reasons))


# replication ---------------------------------------------------------------


def _rename_tree(st: State, tree, name: str):
    for e in tree:
        e.memlet = dataclasses.replace(e.memlet, data=name)


def replicate_container(s: Sdfg, name: str) -> PassResult:
    """Give each but the last reader of ``name`` its own copy, written alongside the original."""
    pid = "replicate_container"
    if name not in s.containers:
        raise PassError(f"unknown container '{name}'")
    desc = s.containers[name]
    if desc.is_stream:
        return unchanged(s, pid, f"'{name}' is a stream")
    writers, readers = [], []
    for st in s.state_order():
        if not is_compute_state(st):
            continue
        for n in st.access_nodes(name):
            writers += [(st, e) for e in st.in_edges(n) if not e.memlet.is_empty]
            readers += [(st, e) for e in st.out_edges(n) if not e.memlet.is_empty]
    if len(writers) != 1:
        return unchanged(s, pid, f"'{name}' has {len(writers)} writers")
    if len(readers) < 2:
        return unchanged(s, pid, f"'{name}' has {len(readers)} reader(s); at least two are needed")
    wst, we = writers[0]
    for st, e in readers[:-1]:
        if st.name != wst.name:
            return unchanged(s, pid, f"a reader of '{name}' in state '{st.name}' is not in the writer's state")
    out = s.copy()
    wst = out.states[wst.name]
    we = wst.edges[we.id]
    wsrc = wst.nodes[we.src]
    if isinstance(wsrc, (Tasklet, LibraryNode)):
        wlin = None
    else:
        wlin = lineage(wst, we, True)
        if wlin is None:
            return unchanged(s, pid, f"the write of '{name}' fans out")
    sites = []
    for st, e in readers[:-1]:
        copy = out.unique_name(f"{name}_copy")
        out.add_container(dataclasses.replace(desc, name=copy, transient=True))
        dst = wst.add_access(copy)
        if wlin is None:
            wst.add_edge(wsrc, we.src_conn, dst, None, dataclasses.replace(we.memlet, data=copy))
        else:
            exits = [wst.exit_of(m) for m in reversed(wlin.maps)]
            wst.add_memlet_path(wst.nodes[wlin.endpoint], *exits, dst, memlet=dataclasses.replace(wlin.inner.memlet, data=copy), src_conn=wlin.conn)
        re = wst.edges[e.id]
        tree = wst.memlet_tree(re)
        re.src = dst.id
        _rename_tree(wst, tree, copy)
        wst._touch()
        for n in wst.access_nodes(name):
            drop_if_isolated(wst, n)
        sites.append((wst.name, copy))
    return PassResult(out, PassReport(pid, True, sites))
