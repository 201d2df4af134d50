"""Folding read-only inputs into the computation."""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

from ..analysis import is_compute_state
from ..ir.core import AccessNode, LibraryNode, Memlet, Sdfg, Tasklet
from ..ir.tasklang import substitute_names
from ..symbolic import evaluate
from .base import PassError, PassReport, PassResult, lineage, unchanged

PASS_ID = "input_to_constant"


def _flat_index(subset, shape) -> str:
    terms, stride = [], "1"
    for r, n in reversed(list(zip(subset, shape))):
        terms.append(f"({r.begin}) * {stride}" if stride != "1" else f"({r.begin})")
        stride = f"{n}" if stride == "1" else f"{stride} * ({n})"
    return " + ".join(reversed(terms)) or "0"


def _writers(s: Sdfg, names) -> List[str]:
    out = []
    for st in s.state_order():
        for n in st.access_nodes():
            if n.data not in names:
                continue
            for e in st.in_edges(n):
                if e.memlet.is_empty:
                    continue
                src = st.nodes[e.src]
                # the host-to-device copy of the value itself does not count
                if isinstance(src, AccessNode) and src.data in names:
                    continue
                out.append(f"{st.name}:{st.nodes[e.src].label}")
    return out


def input_to_constant(s: Sdfg, name: str, values) -> PassResult:
    """Replace every read of the never-written input ``name`` by the given values."""
    if name not in s.containers:
        raise PassError(f"unknown container '{name}'")
    desc = s.containers[name]
    if desc.is_stream:
        return unchanged(s, PASS_ID, f"'{name}' is a stream")
    names = {name, f"fpga_{name}"} & set(s.containers)
    if _writers(s, names):
        return unchanged(s, PASS_ID, f"'{name}' is written by {', '.join(_writers(s, names))}")
    env = dict(s.constants)
    try:
        shape = tuple(evaluate(x, env) for x in desc.shape)
    except KeyError as exc:
        return unchanged(s, PASS_ID, f"the shape of '{name}' depends on unbound symbol {exc}")
    vals = np.asarray(values, dtype=desc.element.dtype).reshape(-1)
    need = int(np.prod(shape, dtype=np.int64)) * desc.element.width
    if vals.size != need:
        raise PassError(f"'{name}' needs {need} values, got {vals.size}")
    table = f"const_{name}"
    out = s.copy()
    sites: List[Tuple[str, str]] = []
    for st in out.state_order():
        compute = is_compute_state(st)
        for acc in st.access_nodes():
            if acc.data not in names:
                continue
            for e in st.out_edges(acc):
                if e.memlet.is_empty:
                    continue
                dst = st.nodes[e.dst]
                if isinstance(dst, AccessNode) and not compute:
                    continue
                if isinstance(dst, LibraryNode):
                    if dst.kind != "Stencil" or need != 1:
                        return unchanged(s, PASS_ID, f"library node '{dst.label}' ({dst.kind}) reads '{name}' as an array")
                    lit = vals[0].item()
                    dst.attrs["computation"] = substitute_names(dst.attrs["computation"], {e.dst_conn: lit})
                    dst.inputs = tuple(c for c in dst.inputs if c != e.dst_conn)
                    st.remove_edge(e)
                    sites.append((st.name, dst.label))
                    continue
                lin = lineage(st, e, False)
                t = st.nodes[lin.endpoint] if lin is not None else None
                if not isinstance(t, Tasklet) or any(r.begin != r.end for r in lin.inner.memlet.subset):
                    return unchanged(s, PASS_ID, f"'{name}' is read by something other than element-wise tasklets")
                if desc.element.is_vector:
                    return unchanged(s, PASS_ID, f"'{name}' has vector elements")
                idx = _flat_index(lin.inner.memlet.subset, desc.shape) if desc.shape else "0"
                t.tables[table] = vals.tolist()
                t.code = substitute_names(t.code, {lin.conn: f"{table}[{idx}]"})
                t.inputs = tuple(c for c in t.inputs if c != lin.conn)
                for x in lin.edges:
                    if x.id in st.edges:
                        st.remove_edge(x)
                if lin.maps and not st.in_edges(t):
                    st.add_edge(lin.maps[-1], None, t, None, Memlet.empty())
                sites.append((st.name, t.label))
        stale = True
        while stale:
            stale = [a for a in st.access_nodes() if a.data in names and not st.out_edges(a)]
            for a in stale:
                st.remove_node(a)
    for n in names:
        if not any(st.access_nodes(n) for st in out.state_order()):
            del out.containers[n]
    if not sites:
        return unchanged(s, PASS_ID, f"'{name}' is never read by a computation")
    return PassResult(out, PassReport(PASS_ID, True, sites))
