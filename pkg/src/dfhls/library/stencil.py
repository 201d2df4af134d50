"""Stencil library node: offset tables, computation parsing and expansions.

A Stencil node consumes one stream of ``W``-wide vectors per array field in
row-major order and produces one output stream in the same order. Scalar
inputs are read once per use from their containers.

Node attributes::

    shape       extents of the iteration domain (integers)
    W           vector width
    dims        dimension names used in the computation, outermost first
    computation expression over field[dim+offset, ...] and scalar names
    boundary    {field: {"type": "constant", "value": v}}
    output      name of the output connector
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..ir.core import ElementType, Memlet, Schedule, StorageKind
from ..symbolic import evaluate, parse_expr, sym
from .registry import ExpansionContext, ExpansionError, register

Offset = Tuple[int, ...]


# offset tables -------------------------------------------------------------


@dataclass(frozen=True)
class OffsetTable:
    W: int
    base: int  # earliest flattened offset rounded down to a vector boundary
    offsets: Tuple[int, ...]  # unique scalar offsets relative to ``base``, sorted
    access: Tuple[int, ...]  # per access, flattened offset relative to ``base``

    @property
    def majors(self) -> Tuple[int, ...]:
        return tuple(o // self.W for o in self.offsets)

    @property
    def minors(self) -> Tuple[int, ...]:
        return tuple(o % self.W for o in self.offsets)

    @property
    def access_points(self) -> Tuple[int, ...]:
        return tuple(sorted(set(self.majors)))

    @property
    def front(self) -> int:
        return max(self.majors)

    def __len__(self):
        return len(self.offsets)


def row_major_strides(shape: Sequence[int]) -> Tuple[int, ...]:
    strides, acc = [], 1
    for n in reversed(shape):
        strides.append(acc)
        acc *= n
    return tuple(reversed(strides))


def stencil_offsets(accesses: Sequence[Offset], strides: Sequence[int], W: int, halo: Optional[Sequence[int]] = None, shape: Optional[Sequence[int]] = None) -> OffsetTable:
    """Unique scalar offsets read by one ``W``-wide output vector.

    ``halo`` bounds the absolute offset per dimension; ``shape`` (if given)
    checks that the innermost extent is a multiple of ``W``.
    """
    if W < 1:
        raise ValueError("vector width must be >= 1")
    if not accesses:
        raise ValueError("a stencil needs at least one access")
    if shape is not None and shape[-1] % W:
        raise ValueError(f"innermost extent {shape[-1]} is not divisible by W={W}")
    flat = []
    for off in accesses:
        if len(off) != len(strides):
            raise ValueError(f"offset {tuple(off)} does not match {len(strides)} dimensions")
        if halo is not None:
            for o, h in zip(off, halo):
                if abs(o) > h:
                    raise ValueError(f"offset {tuple(off)} exceeds halo {tuple(halo)}")
        flat.append(sum(int(o) * int(s) for o, s in zip(off, strides)))
    base = (min(flat) // W) * W
    scalars = sorted({d - base + l for d in flat for l in range(W)})
    return OffsetTable(W, base, tuple(scalars), tuple(d - base for d in flat))


# computation strings --------------------------------------------------------

_ALLOWED_CALLS = {"min", "max", "abs"}
_LHS = re.compile(r"^\s*[A-Za-z_]\w*\s*=(?!=)")


class StencilSyntaxError(ValueError):
    pass


@dataclass
class Computation:
    tree: ast.expr
    dims: Tuple[str, ...]
    accesses: Dict[str, List[Offset]] = field(default_factory=dict)  # first-use order
    scalars: List[str] = field(default_factory=list)

    def render(self, access_code, scalar_code=lambda n: n) -> str:
        """Expression text with accesses and scalars replaced by code snippets."""

        dims = self.dims

        class R(ast.NodeTransformer):
            def visit_Subscript(self, node):
                f, off = _access_of(node, dims)
                return ast.Name(id=f"({access_code(f, off)})", ctx=ast.Load())

            def visit_Name(self, node):
                return ast.Name(id=scalar_code(node.id), ctx=ast.Load())

            def visit_Call(self, node):
                node.args = [self.visit(a) for a in node.args]
                return node

        return ast.unparse(R().visit(_clone(self.tree)))

    @property
    def inputs(self) -> List[str]:
        return list(self.accesses) + [s for s in self.scalars if s not in self.accesses]


def _clone(tree):
    return ast.parse(ast.unparse(tree), mode="eval").body


def _index_parts(node: ast.Subscript):
    idx = node.slice
    return list(idx.elts) if isinstance(idx, ast.Tuple) else [idx]


def _access_of(node, dims):
    if not isinstance(node.value, ast.Name):
        raise StencilSyntaxError("only named fields can be indexed")
    parts = _index_parts(node)
    if len(parts) != len(dims):
        raise StencilSyntaxError(f"access {ast.unparse(node)} has {len(parts)} indices, expected {len(dims)}")
    off = []
    for p, d in zip(parts, dims):
        try:
            e = parse_expr(ast.unparse(p)) - sym(d)
        except Exception as exc:
            raise StencilSyntaxError(f"malformed index '{ast.unparse(p)}' in {ast.unparse(node)}: {exc}") from None
        if not e.is_constant:
            raise StencilSyntaxError(f"index '{ast.unparse(p)}' is not '{d}' plus a constant")
        off.append(int(e.value))
    return node.value.id, tuple(off)


def parse_computation(text: str, dims: Sequence[str]) -> Computation:
    """Parse ``[lhs =] expr`` where fields are indexed relative to ``dims``."""
    body = _LHS.sub("", text, count=1).strip()
    try:
        tree = ast.parse(body, mode="eval").body
    except SyntaxError as exc:
        raise StencilSyntaxError(f"cannot parse computation '{text}': {exc.msg}") from None
    comp = Computation(tree, tuple(dims))

    def walk(n):
        if isinstance(n, ast.Constant):
            if not isinstance(n.value, (int, float)):
                raise StencilSyntaxError(f"unsupported constant {n.value!r}")
        elif isinstance(n, ast.Name):
            if n.id in dims:
                raise StencilSyntaxError(f"dimension '{n.id}' used outside an index")
            if n.id not in comp.scalars:
                comp.scalars.append(n.id)
        elif isinstance(n, ast.Subscript):
            f, off = _access_of(n, dims)
            lst = comp.accesses.setdefault(f, [])
            if off not in lst:
                lst.append(off)
        elif isinstance(n, ast.BinOp) and isinstance(n.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, ast.UnaryOp) and isinstance(n.op, (ast.USub, ast.UAdd)):
            walk(n.operand)
        elif isinstance(n, ast.Call) and isinstance(n.func, ast.Name) and n.func.id in _ALLOWED_CALLS and not n.keywords:
            for a in n.args:
                walk(a)
        else:
            raise StencilSyntaxError(f"unsupported construct '{ast.unparse(n)}' in computation")

    walk(tree)
    both = set(comp.scalars) & set(comp.accesses)
    if both:
        raise StencilSyntaxError(f"'{sorted(both)[0]}' is used both as a field and as a scalar")
    return comp


# expansion plan --------------------------------------------------------------


@dataclass
class FieldPlan:
    name: str
    table: OffsetTable
    front: int  # vector slot of the newest input vector
    points: Tuple[int, ...]  # access points including the front


@dataclass
class StencilPlan:
    shape: Tuple[int, ...]
    strides: Tuple[int, ...]
    W: int
    nvec: int
    lead: int  # iterations before the first output vector is complete
    comp: Computation
    fields: Dict[str, FieldPlan]
    boundary: Dict[str, float]
    output: str
    dims: Tuple[str, ...]


def plan_node(ctx: ExpansionContext) -> StencilPlan:
    a = ctx.node.attrs
    env = dict(ctx.sdfg.constants)
    try:
        shape = tuple(int(evaluate(parse_expr(str(x)), env)) for x in a["shape"])
    except KeyError as exc:
        raise ExpansionError(f"stencil '{ctx.node.label}' needs a concrete shape: {exc}") from None
    W = int(a.get("W", 1))
    dims = tuple(a.get("dims") or [f"d{i}" for i in range(len(shape))])
    comp = parse_computation(a["computation"], dims)
    strides = row_major_strides(shape)
    if shape[-1] % W:
        raise ExpansionError(f"innermost extent {shape[-1]} is not divisible by W={W}")
    tables = {f: stencil_offsets(offs, strides, W, shape=shape) for f, offs in comp.accesses.items()}
    lead = max([0] + [t.base // W + t.front for t in tables.values()])
    fields = {}
    for f, t in tables.items():
        front = lead - t.base // W
        fields[f] = FieldPlan(f, t, front, tuple(sorted(set(t.access_points) | {front})))
    boundary = {}
    for f in comp.accesses:
        pol = (a.get("boundary") or {}).get(f, {"type": "constant", "value": 0})
        if pol.get("type") != "constant":
            raise ExpansionError(f"unsupported boundary policy '{pol.get('type')}' for '{f}'")
        boundary[f] = float(pol.get("value", 0))
    total = 1
    for n in shape:
        total *= n
    return StencilPlan(shape, strides, W, total // W, lead, comp, fields, boundary, a.get("output", ctx.node.outputs[0]), dims)


def _stream_inputs(ctx) -> Optional[str]:
    comp = parse_computation(ctx.attr("computation"), ctx.attr("dims") or [f"d{i}" for i in range(len(ctx.attr("shape")))])
    for f in comp.accesses:
        if f not in ctx.inputs:
            return f"field '{f}' is not connected"
        if not ctx.inputs[f].desc.is_stream:
            return f"field '{f}' must arrive on a stream"
    for ports in ctx.outputs.values():
        for p in ports:
            if not p.desc.is_stream:
                return "the output must be a stream"
    return None


def boundary_check(plan: StencilPlan, off: Offset) -> Optional[str]:
    """Condition text under which ``off`` stays inside the domain, or None."""
    x = f"((i - {plan.lead}) * {plan.W} + l)"
    conds = []
    for k, (o, n, s) in enumerate(zip(off, plan.shape, plan.strides)):
        if o == 0:
            continue
        if s == 1:
            c = f"{x} % {n}" if k else x
        else:
            c = f"{x} // {s}" if k == 0 else f"{x} // {s} % {n}"
        conds.append(f"{c} >= {-o}" if o < 0 else f"{c} < {n - o}")
    return " and ".join(conds) if conds else None


def _masked(plan: StencilPlan, f: str, off: Offset, value: str) -> str:
    cond = boundary_check(plan, off)
    if cond is None:
        return value
    return f"{value} if {cond} else {plan.boundary[f]!r}"


def _fname(f: str, k: int) -> str:
    return f"{f}_{k}"


def _common(ctx: ExpansionContext, plan: StencilPlan):
    """Main loop scope, the scalar inputs, and the output register."""
    st, label = ctx.state, ctx.node.label
    base = next(iter(ctx.outputs.values()))[0].desc.element.scalar()
    em, xm = st.add_map(f"{label}_main", {"i": f"0:{plan.nvec + plan.lead}"})
    outvec = ctx.transient("out", shape=[plan.W], element=base, storage=StorageKind.OnChipRegister).name
    return em, xm, outvec, base


def _emit_output(ctx, plan, em, xm, outvec, lane_exit, compute):
    st = ctx.state
    o1 = st.add_access(outvec)
    st.add_memlet_path(compute, lane_exit, o1, memlet=Memlet.simple(outvec, "l"), src_conn="o")
    tp = st.add_tasklet("push", ["v"], ["o"], f"if i >= {plan.lead}:\n    o = v")
    sub = "0" if plan.W == 1 else f"0:{plan.W}"
    st.add_edge(o1, None, tp, "v", Memlet.simple(outvec, sub))
    for ports in ctx.outputs.values():
        for p in ports:
            m = Memlet(p.desc.name, p.edge.memlet.subset, parse_expr("1"), dynamic=True)
            st.add_memlet_path(tp, xm, p.access, memlet=m, src_conn="o")


def _wire_scalars(ctx, plan, em, lane_entry, compute):
    for s_name in plan.comp.scalars:
        port = ctx.inputs[s_name]
        sub = () if not port.desc.shape else Memlet.simple(port.desc.name, "0").subset
        ctx.state.add_memlet_path(port.access, em, lane_entry, compute, memlet=Memlet(port.desc.name, sub, parse_expr("1")), dst_conn=f"s_{s_name}")


def _pop_code(plan) -> str:
    return f"if i < {plan.nvec}:\n    o = x"


def _needs_shift_registers(ctx):
    if not ctx.target.shift_registers:
        return f"target '{ctx.target.name}' has no shift registers"
    return _stream_inputs(ctx)


@register("Stencil", "shift_register", priority=10, applicable=_needs_shift_registers)
def stencil_shift_register(ctx: ExpansionContext):
    """One shift register per field, shifted by W and fed at the front."""
    st, label = ctx.state, ctx.node.label
    plan = plan_node(ctx)
    W = plan.W
    em, xm, outvec, base = _common(ctx, plan)
    el, xl = st.add_map(f"{label}_lanes", {"l": f"0:{W}"}, schedule=Schedule.Unrolled)
    conns, reads = [], []
    code_for = {}
    for f, fp in plan.fields.items():
        size = (fp.front + 1) * W
        sr = ctx.transient(f"sr_{f}", shape=[size], element=ElementType(base.base), storage=StorageKind.ShiftRegister).name
        port = ctx.inputs[f]
        ins = st.add_tasklet(f"insert_{f}", ["x"], ["o"], _pop_code(plan))
        st.add_memlet_path(port.access, em, ins, memlet=Memlet(port.desc.name, port.edge.memlet.subset, parse_expr("1"), dynamic=True), dst_conn="x")
        if fp.front > 0:
            s0 = st.add_access(sr)
            sh = st.add_tasklet(f"shift_{f}", ["v"], ["o"], "o = v")
            st.add_memlet_path(s0, em, sh, memlet=Memlet.simple(sr, f"{W}:{size}"), dst_conn="v")
            s1 = st.add_access(sr)
            st.add_edge(sh, "o", s1, None, Memlet.simple(sr, f"0:{size - W}"))
            st.add_edge(s1, None, ins, None, Memlet.empty())
        front_sub = f"{fp.front * W}" if W == 1 else f"{fp.front * W}:{size}"
        s2 = st.add_access(sr)
        st.add_edge(ins, "o", s2, None, Memlet(sr, Memlet.simple(sr, front_sub).subset, parse_expr(str(W)), dynamic=True))
        for k, off in enumerate(plan.comp.accesses[f]):
            c = _fname(f, k)
            rel = fp.table.access[k]
            conns.append(c)
            reads.append((s2, sr, f"l + {rel}", c))
            code_for[(f, off)] = _masked(plan, f, off, c)
    scalars = [f"s_{n}" for n in plan.comp.scalars]
    body = plan.comp.render(lambda f, off: code_for[(f, off)], lambda n: f"s_{n}")
    compute = st.add_tasklet("compute", conns + scalars, ["o"], f"o = {body}")
    for acc, sr, idx, c in reads:
        st.add_memlet_path(acc, el, compute, memlet=Memlet.simple(sr, idx), dst_conn=c)
    _wire_scalars(ctx, plan, em, el, compute)
    _emit_output(ctx, plan, em, xm, outvec, xl, compute)


@register("Stencil", "explicit_buffers", applicable=_stream_inputs)
def stencil_explicit_buffers(ctx: ExpansionContext):
    """Cyclic on-chip buffers between consecutive access points."""
    st, label = ctx.state, ctx.node.label
    plan = plan_node(ctx)
    W = plan.W
    em, xm, outvec, base = _common(ctx, plan)
    el, xl = st.add_map(f"{label}_lanes", {"l": f"0:{W}"}, schedule=Schedule.Unrolled)
    vec = base.vectorized(W) if W > 1 else base
    conns, tables, code_for, wins = [], {}, {}, []
    for f, fp in plan.fields.items():
        pts = fp.points
        npts = len(pts)
        win = ctx.transient(f"win_{f}", shape=[npts * W], element=base, storage=StorageKind.OnChipRegister).name
        bufs = []
        for j in range(npts - 1):
            gap = pts[j + 1] - pts[j]
            bufs.append((ctx.transient(f"buf_{f}_{j}", shape=[gap], element=vec, storage=StorageKind.OnChipLocal).name, gap))
        outs = [f"p{j}" for j in range(npts)]
        lines = [f"p{j} = b{j}" for j in range(npts - 1)] + [f"if i < {plan.nvec}:", f"    p{npts - 1} = x"]
        ex = st.add_tasklet(f"extract_{f}", [f"b{j}" for j in range(npts - 1)] + ["x"], outs, "\n".join(lines))
        port = ctx.inputs[f]
        st.add_memlet_path(port.access, em, ex, memlet=Memlet(port.desc.name, port.edge.memlet.subset, parse_expr("1"), dynamic=True), dst_conn="x")
        w1 = st.add_access(win)
        for j, (b, gap) in enumerate(bufs):
            b0 = st.add_access(b)
            st.add_memlet_path(b0, em, ex, memlet=Memlet.simple(b, f"i % {gap}"), dst_conn=f"b{j}")
        for j in range(npts):
            sub = f"{j * W}" if W == 1 else f"{j * W}:{(j + 1) * W}"
            dyn = j == npts - 1
            st.add_edge(ex, f"p{j}", w1, None, Memlet(win, Memlet.simple(win, sub).subset, parse_expr(str(W)), dynamic=dyn))
        # each buffer takes the vector now at the following access point
        for j, (b, gap) in enumerate(bufs):
            up = st.add_tasklet(f"update_{f}_{j}", ["v"], ["o"], "o = v")
            sub = f"{(j + 1) * W}" if W == 1 else f"{(j + 1) * W}:{(j + 2) * W}"
            st.add_edge(w1, None, up, "v", Memlet.simple(win, sub))
            b1 = st.add_access(b)
            st.add_edge(up, "o", b1, None, Memlet.simple(b, f"i % {gap}"))
        slot = {m: j for j, m in enumerate(pts)}
        wc = f"w_{f}"
        conns.append(wc)
        wins.append((w1, win, npts * W, wc))
        for k, off in enumerate(plan.comp.accesses[f]):
            rel = fp.table.access[k]
            tname = f"T_{f}_{k}"
            tables[tname] = [slot[(rel + l) // W] * W + (rel + l) % W for l in range(W)]
            # a one-element window is read as a scalar
            ref = wc if npts * W == 1 else f"{wc}[{tname}[l]]"
            code_for[(f, off)] = _masked(plan, f, off, ref)
    scalars = [f"s_{n}" for n in plan.comp.scalars]
    body = plan.comp.render(lambda f, off: code_for[(f, off)], lambda n: f"s_{n}")
    compute = st.add_tasklet("compute", conns + scalars, ["o"], f"o = {body}", tables=tables)
    for w1, win, n, wc in wins:
        st.add_memlet_path(w1, el, compute, memlet=Memlet.simple(win, f"0:{n}"), dst_conn=wc)
    _wire_scalars(ctx, plan, em, el, compute)
    _emit_output(ctx, plan, em, xm, outvec, xl, compute)
