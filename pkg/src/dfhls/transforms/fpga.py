"""Offloading a host program to the device."""

from __future__ import annotations

from ..analysis import is_compute_state
from ..ir.core import Memlet, Sdfg, StorageKind
from .base import PassReport, PassResult, unchanged

PASS_ID = "fpga-transform"


def _full(desc) -> str:
    return ", ".join(f"0:{n}" for n in desc.shape) if desc.shape else ""


def fpga_transform(s: Sdfg) -> PassResult:
    """Move host DRAM accessed by computation to device twins named ``fpga_<X>``.

    A pre-state copies inputs to the device and a post-state copies outputs
    back. Transient host containers move to device memory without copies.
    """
    for d in s.containers.values():
        if d.storage is StorageKind.DeviceDram:
            return unchanged(s, PASS_ID, f"device container '{d.name}' already present")
    compute = [st for st in s.state_order() if is_compute_state(st)]
    used, read, written = set(), set(), set()
    for st in compute:
        for n in st.access_nodes():
            d = s.containers[n.data]
            if d.is_stream or d.storage is not StorageKind.HostDram:
                continue
            used.add(n.data)
            if st.out_edges(n):
                read.add(n.data)
            if st.in_edges(n):
                written.add(n.data)
    if not used:
        return unchanged(s, PASS_ID, "no host DRAM is accessed by computation")

    out = s.copy()
    rename = {}
    sites = []
    for name in sorted(used):
        d = out.containers[name]
        if d.transient:
            d.storage = StorageKind.DeviceDram
            sites.append(("*", name))
            continue
        twin = out.unique_name("fpga_" + name)
        out.add_array(twin, list(d.shape), element=d.element, storage=StorageKind.DeviceDram, transient=True, bank=d.bank)
        rename[name] = twin
        sites.append(("*", f"{name}->{twin}"))
    for st in out.state_order():
        if not is_compute_state(st):
            continue
        for n in st.access_nodes():
            if n.data in rename:
                n.data = rename[n.data]
        for e in st.edges.values():
            if e.memlet.data in rename:
                e.memlet = Memlet(rename[e.memlet.data], e.memlet.subset, e.memlet.volume, e.memlet.dynamic, e.memlet.wcr)
        st._touch()

    start = out.start_state
    terminals = [st.name for st in out.state_order() if not out.out_interstate(st.name)]
    pre = out.add_state(out.unique_state_name(f"pre_{s.name}"))
    for host in sorted(rename):
        if host in read:
            _copy(out, pre, host, rename[host])
    post = out.add_state(out.unique_state_name(f"post_{s.name}"))
    for host in sorted(rename):
        if host in written:
            _copy(out, post, rename[host], host)
    out.add_interstate_edge(pre.name, start)
    for t in terminals:
        out.add_interstate_edge(t, post.name)
    out.start_state = pre.name
    return PassResult(out, PassReport(PASS_ID, True, sites))


def _copy(s: Sdfg, st, src: str, dst: str):
    a, b = st.add_access(src), st.add_access(dst)
    st.add_edge(a, None, b, None, Memlet.simple(src, _full(s.containers[src])))
