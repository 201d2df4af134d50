"""Library node kinds and the expansion registry."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from ..ir.core import AccessNode, DataDescriptor, Edge, LibraryNode, Sdfg, State
from .targets import TargetCapabilities

# fixed connector arity per kind; Stencil connectors depend on its fields
CONNECTORS = {
    "Axpy": (("x", "y"), ("z",)),
    "Dot": (("x", "y"), ("r",)),
    "Gemv": (("A", "x"), ("y",)),
    "Ger": (("A", "x", "y"), ("A_out",)),
    "Gemm": (("A", "B"), ("C",)),
    "MatMul": (("A", "B"), ("C",)),
}
KINDS = tuple(CONNECTORS) + ("Stencil",)


class ExpansionError(RuntimeError):
    pass


def check_library_node(n: LibraryNode) -> List[str]:
    if n.kind not in KINDS:
        return [f"unknown library node kind '{n.kind}'"]
    if n.kind == "Stencil":
        if len(n.outputs) != 1:
            return ["Stencil nodes have exactly one output"]
        return []
    ins, outs = CONNECTORS[n.kind]
    if tuple(n.inputs) != ins or tuple(n.outputs) != outs:
        return [f"{n.kind} expects inputs {ins} and outputs {outs}, got {tuple(n.inputs)} / {tuple(n.outputs)}"]
    return []


@dataclass
class Port:
    access: AccessNode
    edge: Edge
    desc: DataDescriptor


@dataclass
class ExpansionContext:
    sdfg: Sdfg
    state: State
    node: LibraryNode
    target: TargetCapabilities
    inputs: Dict[str, Port] = field(default_factory=dict)
    outputs: Dict[str, List[Port]] = field(default_factory=dict)

    @staticmethod
    def build(s: Sdfg, st: State, node: LibraryNode, target: TargetCapabilities) -> "ExpansionContext":
        ctx = ExpansionContext(s, st, node, target)
        for e in st.in_edges(node):
            src = st.nodes[e.src]
            if e.memlet.is_empty:
                continue
            if not isinstance(src, AccessNode):
                raise ExpansionError(f"input '{e.dst_conn}' of '{node.label}' must come from an access node")
            ctx.inputs[e.dst_conn] = Port(src, e, s.containers[src.data])
        for e in st.out_edges(node):
            dst = st.nodes[e.dst]
            if e.memlet.is_empty:
                continue
            if not isinstance(dst, AccessNode):
                raise ExpansionError(f"output '{e.src_conn}' of '{node.label}' must go to an access node")
            ctx.outputs.setdefault(e.src_conn, []).append(Port(dst, e, s.containers[dst.data]))
        for c in node.inputs:
            if c not in ctx.inputs:
                raise ExpansionError(f"input connector '{c}' of '{node.label}' is not connected")
        for c in node.outputs:
            if c not in ctx.outputs:
                raise ExpansionError(f"output connector '{c}' of '{node.label}' is not connected")
        return ctx

    def out(self, conn: str) -> Port:
        return self.outputs[conn][0]

    def attr(self, key, default=None):
        return self.node.attrs.get(key, default)

    def transient(self, base: str, **kw):
        """Declare a fresh transient container named after the node."""
        name = self.sdfg.unique_name(f"{self.node.label}_{base}")
        kind = kw.pop("kind", "array")
        if kind == "stream":
            return self.sdfg.add_stream(name, **kw)
        return self.sdfg.add_array(name, transient=True, **kw)


@dataclass(frozen=True)
class Expansion:
    id: str
    kind: str
    priority: int  # higher wins; target-specialized expansions rank above generic ones
    applicable: Callable[[ExpansionContext], Optional[str]]  # None if applicable, else reason
    lower: Callable[[ExpansionContext], None]


REGISTRY: Dict[str, List[Expansion]] = {}


def register(kind: str, id: str, priority: int = 0, applicable=None):
    def deco(fn):
        exp = Expansion(id, kind, priority, applicable or (lambda ctx: None), fn)
        REGISTRY.setdefault(kind, []).append(exp)
        REGISTRY[kind].sort(key=lambda e: (-e.priority, e.id))
        return fn

    return deco


def expansions_for(kind: str) -> List[Expansion]:
    _ensure_loaded()
    return list(REGISTRY.get(kind, []))


def _ensure_loaded():
    from . import blas, stencil  # noqa: F401  (registration side effects)


def select_expansion(ctx: ExpansionContext, expansion_id: Optional[str] = None) -> Expansion:
    cands = expansions_for(ctx.node.kind)
    if not cands:
        raise ExpansionError(f"no expansions registered for kind '{ctx.node.kind}'")
    reasons = []
    for exp in cands:
        if expansion_id is not None and exp.id != expansion_id:
            continue
        why = exp.applicable(ctx)
        if why is None:
            return exp
        reasons.append(f"{exp.id}: {why}")
    if expansion_id is not None and not reasons:
        raise ExpansionError(f"unknown expansion '{expansion_id}' for kind '{ctx.node.kind}'")
    raise ExpansionError(f"no applicable expansion for '{ctx.node.label}' ({ctx.node.kind}) on target '{ctx.target.name}': " + "; ".join(reasons))


def _signature(n: LibraryNode) -> Tuple[str, str]:
    return (n.kind, json.dumps(n.attrs, sort_keys=True, default=str))


def _apply(s: Sdfg, st: State, node: LibraryNode, target: TargetCapabilities, expansion_id=None) -> Tuple[str, List[int]]:
    ctx = ExpansionContext.build(s, st, node, target)
    exp = select_expansion(ctx, expansion_id)
    before = set(st.nodes)
    attached = {p.access.id for p in ctx.inputs.values()} | {p.access.id for ps in ctx.outputs.values() for p in ps}
    exp.lower(ctx)
    st.remove_node(node)
    for aid in attached:
        if aid in st.nodes and not st.in_edges(aid) and not st.out_edges(aid):
            raise ExpansionError(f"expansion '{exp.id}' left boundary access node {aid} of '{node.label}' disconnected")
    new_libs = [nid for nid in st.nodes if nid not in before and isinstance(st.nodes[nid], LibraryNode)]
    return exp.id, new_libs


def expand_node(s: Sdfg, node, expansion_id: Optional[str] = None, target: Optional[TargetCapabilities] = None, state: Optional[str] = None) -> Sdfg:
    """Return a copy of ``s`` with one library node (by label or id) expanded."""
    from .targets import load_target

    target = load_target(target)
    out = s.copy()
    st, n = _find(out, node, state)
    _apply(out, st, n, target, expansion_id)
    return out


def _find(s: Sdfg, node, state=None):
    label = node.label if isinstance(node, LibraryNode) else node
    for st in s.state_order():
        if state is not None and st.name != state:
            continue
        for n in st.nodes_of(LibraryNode):
            if n.label == label or n.id == label:
                return st, n
    raise KeyError(f"library node '{label}' not found")


@dataclass
class ExpansionLog:
    steps: List[Tuple[str, str, str, str]] = field(default_factory=list)  # (state, label, kind, expansion)


def expand_all(s: Sdfg, target: Optional[TargetCapabilities] = None, overrides: Optional[Dict[str, str]] = None, log: Optional[ExpansionLog] = None) -> Sdfg:
    """Expand library nodes until none remain; returns a new SDFG."""
    from .targets import load_target

    target = load_target(target)
    overrides = dict(overrides or {})
    out = s.copy()
    chains: Dict[Tuple[str, int], List[Tuple[str, str]]] = {}
    guard = 0
    while True:
        found = None
        for st in out.state_order():
            libs = st.nodes_of(LibraryNode)
            if libs:
                found = (st, libs[0])
                break
        if found is None:
            return out
        st, n = found
        chain = chains.get((st.name, n.id), [])
        sig = _signature(n)
        if sig in chain:
            trace = " -> ".join(k for k, _ in chain + [sig])
            raise ExpansionError(f"expansion cycle detected: {trace}")
        exp_id, new = _apply(out, st, n, target, overrides.get(n.label))
        if log is not None:
            log.steps.append((st.name, n.label, n.kind, exp_id))
        for nid in new:
            chains[(st.name, nid)] = chain + [sig]
        guard += 1
        if guard > 10000:
            raise ExpansionError("expansion did not reach a fixpoint")
