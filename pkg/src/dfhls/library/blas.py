"""Expansions for the linear-algebra library nodes."""

from __future__ import annotations

from typing import Callable, List, Optional, Tuple

from ..ir.core import (
    AccessNode,
    ElementType,
    Memlet,
    Schedule,
    StorageKind,
)
from ..symbolic import SymExpr, as_expr, evaluate, parse_expr
from .registry import CONNECTORS, ExpansionContext, ExpansionError, Port, register

LOCAL = StorageKind.OnChipLocal
REG = StorageKind.OnChipRegister


# helpers -------------------------------------------------------------------


def elem(port: Port, index: str) -> Memlet:
    """One element of ``port`` at ``index``; on a stream, one pop or push."""
    if port.desc.is_stream:
        return Memlet(port.desc.name, port.edge.memlet.subset, SymExpr.const(1))
    if not port.desc.shape:
        return Memlet(port.desc.name, (), SymExpr.const(1))
    return Memlet.simple(port.desc.name, index)


def length(ctx: ExpansionContext, port: Port, dim: int = 0, attr: Optional[str] = None) -> SymExpr:
    if not port.desc.is_stream and port.desc.shape:
        return port.desc.shape[dim]
    if attr is not None and ctx.attr(attr) is not None:
        return as_expr(ctx.attr(attr))
    if port.desc.is_stream and dim == 0:
        return port.edge.memlet.volume
    raise ExpansionError(f"cannot infer extent of '{port.desc.name}' for '{ctx.node.label}'")


def scalar_code(ctx: ExpansionContext, key: str, default=1, avoid=()) -> str:
    """Literal or symbol name used for a scaling attribute."""
    v = ctx.attr(key, default)
    if isinstance(v, str):
        if v in avoid:
            raise ExpansionError(f"'{ctx.node.label}': symbol '{v}' collides with a tasklet connector")
        ctx.sdfg.add_symbol(v)
        return v
    return repr(v)


def base_type(port: Port) -> ElementType:
    return port.desc.element.scalar()


def no_vectors(ctx: ExpansionContext) -> Optional[str]:
    for p in list(ctx.inputs.values()) + [q for ps in ctx.outputs.values() for q in ps]:
        if p.desc.element.is_vector:
            return "vector operands are not supported by this expansion"
    return None


def write_out(ctx: ExpansionContext, st, tasklet, conn: str, out_conn: str, index: str, scope_exit=None):
    """Wire tasklet output ``conn`` to every access node attached to ``out_conn``."""
    for port in ctx.outputs[out_conn]:
        if scope_exit is None:
            st.add_edge(tasklet, conn, port.access, None, elem(port, index))
        else:
            st.add_memlet_path(tasklet, *scope_exit, port.access, memlet=elem(port, index), src_conn=conn)


def copy_in(ctx, st, port: Port, buf_name: str, n, label: str) -> AccessNode:
    """Load ``port`` into an on-chip buffer; returns the buffer access node."""
    en, ex = st.add_map(label, {"q": f"0:{n}"})
    t = st.add_tasklet(label, ["v"], ["o"], "o = v")
    st.add_memlet_path(port.access, en, t, memlet=elem(port, "q"), dst_conn="v")
    buf = st.add_access(buf_name)
    st.add_memlet_path(t, ex, buf, memlet=Memlet.simple(buf_name, "q"), src_conn="o")
    return buf


def init_buffer(st, buf_name: str, n, label: str) -> AccessNode:
    en, ex = st.add_map(label, {"q": f"0:{n}"})
    t = st.add_tasklet(label, [], ["o"], "o = 0")
    st.add_edge(en, None, t, None, Memlet.empty())
    buf = st.add_access(buf_name)
    st.add_memlet_path(t, ex, buf, memlet=Memlet.simple(buf_name, "q"), src_conn="o")
    return buf


def adder_tree(st, leaves: List[Callable], prefix: str, tmp_name: str, finish: Callable) -> int:
    """Reduce ``leaves`` pairwise with ``len(leaves) - 1`` adder tasklets.

    Each leaf is ``connect(tasklet, conn) -> expression``. Intermediate sums go
    to fresh access nodes of ``tmp_name``; ``finish(tasklet, conn)`` wires the
    final result. Returns the number of adders created.
    """
    counter = [0]
    slot = [0]

    def from_tmp(node, index):
        def connect(t, conn):
            st.add_edge(node, None, t, conn, Memlet.simple(tmp_name, str(index)))
            return conn

        return connect

    level = list(leaves)
    if len(level) == 1:
        t = st.add_tasklet(f"{prefix}_copy", ["a"], ["o"], "")
        expr = level[0](t, "a")
        t.code = f"o = {expr}"
        finish(t, "o")
        return 0
    while len(level) > 1:
        nxt = []
        for k in range(0, len(level) - 1, 2):
            t = st.add_tasklet(f"{prefix}_{counter[0]}", ["a", "b"], ["o"], "")
            counter[0] += 1
            ea = level[k](t, "a")
            eb = level[k + 1](t, "b")
            t.code = f"o = {ea} + {eb}"
            if len(level) == 2:
                finish(t, "o")
            else:
                idx = slot[0]
                slot[0] += 1
                acc = st.add_access(tmp_name)
                st.add_edge(t, "o", acc, None, Memlet.simple(tmp_name, str(idx)))
                nxt.append(from_tmp(acc, idx))
        if len(level) % 2 == 1:
            nxt.append(level[-1])
        level = nxt
    return counter[0]


# Axpy ----------------------------------------------------------------------


@register("Axpy", "pipelined")
def axpy(ctx: ExpansionContext):
    st = ctx.state
    X, Y = ctx.inputs["x"], ctx.inputs["y"]
    n = length(ctx, X, attr="n")
    alpha = scalar_code(ctx, "alpha", 1, avoid=("x_in", "y_in"))
    en, ex = st.add_map(f"{ctx.node.label}_map", {"i": f"0:{n}"})
    t = st.add_tasklet("axpy", ["x_in", "y_in"], ["o"], f"o = {alpha} * x_in + y_in")
    st.add_memlet_path(X.access, en, t, memlet=elem(X, "i"), dst_conn="x_in")
    st.add_memlet_path(Y.access, en, t, memlet=elem(Y, "i"), dst_conn="y_in")
    write_out(ctx, st, t, "o", "z", "i", scope_exit=(ex,))


# Dot -----------------------------------------------------------------------


def _dot_needs_partial(ctx):
    base = ctx.inputs["x"].desc.element.base
    if ctx.target.native_accumulation(base):
        return f"target '{ctx.target.name}' accumulates {base} natively"
    return None


def _dot_native_ok(ctx):
    base = ctx.inputs["x"].desc.element.base
    if not ctx.target.native_accumulation(base):
        return f"target '{ctx.target.name}' has no native {base} accumulation"
    return None


def partial_length(L: int, latency: int, W: int) -> int:
    """Partial-sum buffer length: above the add latency, whole vectors."""
    L = max(int(L), int(latency) + 1)
    return -(-L // W) * W


@register("Dot", "partial_sums", priority=10, applicable=_dot_needs_partial)
def dot_partial_sums(ctx: ExpansionContext):
    st, label = ctx.state, ctx.node.label
    X, Y = ctx.inputs["x"], ctx.inputs["y"]
    W = X.desc.element.width
    base = X.desc.element.scalar()
    L = partial_length(ctx.attr("L", 8), ctx.attr("latency", 5), W)
    n = length(ctx, X, attr="n")
    partial = ctx.transient("partial", shape=[L], element=base, storage=LOCAL).name
    prod = ctx.transient("prod", shape=[1], element=X.desc.element, storage=REG).name
    lanes = ctx.transient("lanes", shape=[max(W - 1, 1)], element=base, storage=REG).name
    lane_sum = ctx.transient("lane_sum", shape=[1], element=base, storage=REG).name
    chunk = ctx.transient("chunk", shape=[max(W - 1, 1)], element=base, storage=REG).name
    total = ctx.transient("total", shape=[1], element=base, storage=REG).name

    p0 = init_buffer(st, partial, L, f"{label}_init")

    # streaming stage: multiply, reduce the W lanes, accumulate cyclically
    em, xm = st.add_map(f"{label}_stream", {"i": f"0:{n}"})
    tm = st.add_tasklet("mul", ["a", "b"], ["p"], "p = a * b")
    st.add_memlet_path(X.access, em, tm, memlet=elem(X, "i"), dst_conn="a")
    st.add_memlet_path(Y.access, em, tm, memlet=elem(Y, "i"), dst_conn="b")
    pa = st.add_access(prod)
    st.add_edge(tm, "p", pa, None, Memlet.simple(prod, "0"))

    def lane(l):
        def connect(t, conn):
            st.add_edge(pa, None, t, conn, Memlet.simple(prod, "0"))
            return f"{conn}[{l}]" if W > 1 else conn

        return connect

    sa = st.add_access(lane_sum)

    def to_lane_sum(t, conn):
        st.add_edge(t, conn, sa, None, Memlet.simple(lane_sum, "0"))

    adder_tree(st, [lane(l) for l in range(W)], "unroll_add", lanes, to_lane_sum)
    tacc = st.add_tasklet("accumulate", ["acc", "v"], ["o"], "o = acc + v")
    st.add_memlet_path(p0, em, tacc, memlet=Memlet.simple(partial, f"i % {L}"), dst_conn="acc")
    st.add_edge(sa, None, tacc, "v", Memlet.simple(lane_sum, "0"))
    p1 = st.add_access(partial)
    st.add_memlet_path(tacc, xm, p1, memlet=Memlet.simple(partial, f"i % {L}"), src_conn="o")

    # reduce stage: collapse the L partial sums into one register
    ti = st.add_tasklet("init_total", [], ["o"], "o = 0")
    s0 = st.add_access(total)
    st.add_edge(ti, "o", s0, None, Memlet.simple(total, "0"))
    s1 = st.add_access(total)
    if ctx.attr("reduce", "tree") == "single":
        er, xr = st.add_map(f"{label}_reduce", {"c": f"0:{L}"})
        st.add_edge(s0, None, er, None, Memlet.empty())
        tr = st.add_tasklet("reduce_add", ["v"], ["o"], "o = v")
        st.add_memlet_path(p1, er, tr, memlet=Memlet.simple(partial, "c"), dst_conn="v")
        st.add_memlet_path(tr, xr, s1, memlet=Memlet.simple(total, "0", wcr="sum"), src_conn="o")
    else:
        er, xr = st.add_map(f"{label}_reduce", {"c": f"0:{L // W}"})
        st.add_edge(s0, None, er, None, Memlet.empty())

        def part(l):
            def connect(t, conn):
                st.add_memlet_path(p1, er, t, memlet=Memlet.simple(partial, f"c * {W} + {l}"), dst_conn=conn)
                return conn

            return connect

        def to_total(t, conn):
            st.add_memlet_path(t, xr, s1, memlet=Memlet.simple(total, "0", wcr="sum"), src_conn=conn)

        adder_tree(st, [part(l) for l in range(W)], "reduce_add", chunk, to_total)
        _empty_scope_guard(st, er)
    tw = st.add_tasklet("write_result", ["v"], ["o"], "o = v")
    st.add_edge(s1, None, tw, "v", Memlet.simple(total, "0"))
    write_out(ctx, st, tw, "o", "r", "0")


def _empty_scope_guard(st, entry):
    # a reduce scope whose tree only reads through the entry is already connected
    if not st.out_edges(entry):
        raise ExpansionError("reduce scope left empty")


@register("Dot", "accumulate", priority=10, applicable=_dot_native_ok)
def dot_accumulate(ctx: ExpansionContext):
    st, label = ctx.state, ctx.node.label
    X, Y = ctx.inputs["x"], ctx.inputs["y"]
    W = X.desc.element.width
    base = X.desc.element.scalar()
    n = length(ctx, X, attr="n")
    acc = ctx.transient("acc", shape=[1], element=base, storage=REG).name
    ti = st.add_tasklet("init_acc", [], ["o"], "o = 0")
    a0 = st.add_access(acc)
    st.add_edge(ti, "o", a0, None, Memlet.simple(acc, "0"))
    em, xm = st.add_map(f"{label}_stream", {"i": f"0:{n}"})
    terms = " + ".join(f"a[{l}] * b[{l}]" for l in range(W)) if W > 1 else "a * b"
    t = st.add_tasklet("accumulate", ["a", "b", "acc"], ["o"], f"o = acc + {terms}")
    st.add_memlet_path(X.access, em, t, memlet=elem(X, "i"), dst_conn="a")
    st.add_memlet_path(Y.access, em, t, memlet=elem(Y, "i"), dst_conn="b")
    st.add_memlet_path(a0, em, t, memlet=Memlet.simple(acc, "0"), dst_conn="acc")
    a1 = st.add_access(acc)
    st.add_memlet_path(t, xm, a1, memlet=Memlet.simple(acc, "0"), src_conn="o")
    tw = st.add_tasklet("write_result", ["v"], ["o"], "o = v")
    st.add_edge(a1, None, tw, "v", Memlet.simple(acc, "0"))
    write_out(ctx, st, tw, "o", "r", "0")


# Gemv / Ger ----------------------------------------------------------------


def loop_nest(tiling: str, rows, cols, T) -> Tuple[dict, str, str]:
    """Map ranges plus (row, column) index expressions for a traversal order."""
    if tiling == "RowMajor":
        return {"i": f"0:{rows}", "j": f"0:{cols}"}, "i", "j"
    if tiling == "ColumnTiles":
        return {"jt": f"0:({cols})/{T}", "i": f"0:{rows}", "jj": f"0:{T}"}, "i", f"jt * {T} + jj"
    raise ExpansionError(f"unknown tiling '{tiling}'")


def _tiling_ok(ctx) -> Optional[str]:
    why = no_vectors(ctx)
    if why:
        return why
    tiling = ctx.attr("tiling", "RowMajor")
    if tiling not in ("RowMajor", "ColumnTiles"):
        return f"unknown tiling '{tiling}'"
    if tiling == "ColumnTiles":
        A = ctx.inputs["A"]
        cols = length(ctx, A, 1, "cols")
        T = int(ctx.attr("tile", 4))
        env = dict(ctx.sdfg.constants)
        try:
            if evaluate(cols, env) % T:
                return f"tile {T} does not divide {cols}"
        except KeyError:
            pass
    return None


@register("Gemv", "buffered", applicable=_tiling_ok)
def gemv(ctx: ExpansionContext):
    st, label = ctx.state, ctx.node.label
    A, X = ctx.inputs["A"], ctx.inputs["x"]
    rows, cols = length(ctx, A, 0, "rows"), length(ctx, A, 1, "cols")
    transposed = bool(ctx.attr("transposed", False))
    tiling = ctx.attr("tiling", "RowMajor")
    T = int(ctx.attr("tile", 4))
    base = base_type(A)
    xlen, ylen = (rows, cols) if transposed else (cols, rows)
    xbuf = ctx.transient("xbuf", shape=[xlen], element=base, storage=LOCAL).name
    ybuf = ctx.transient("ybuf", shape=[ylen], element=base, storage=LOCAL).name
    xb = copy_in(ctx, st, X, xbuf, xlen, f"{label}_load_x")
    y0 = init_buffer(st, ybuf, ylen, f"{label}_init_y")
    ranges, r, c = loop_nest(tiling, rows, cols, T)
    xi, yi = (r, c) if transposed else (c, r)
    en, ex = st.add_map(f"{label}_{tiling}", ranges)
    t = st.add_tasklet("gemv_mac", ["a", "xv", "acc"], ["o"], "o = acc + a * xv")
    st.add_memlet_path(A.access, en, t, memlet=elem(A, f"{r}, {c}"), dst_conn="a")
    st.add_memlet_path(xb, en, t, memlet=Memlet.simple(xbuf, xi), dst_conn="xv")
    st.add_memlet_path(y0, en, t, memlet=Memlet.simple(ybuf, yi), dst_conn="acc")
    y1 = st.add_access(ybuf)
    st.add_memlet_path(t, ex, y1, memlet=Memlet.simple(ybuf, yi), src_conn="o")
    alpha = scalar_code(ctx, "alpha", 1, avoid=("v",))
    es, xs = st.add_map(f"{label}_store_y", {"q": f"0:{ylen}"})
    ts = st.add_tasklet("gemv_store", ["v"], ["o"], f"o = {alpha} * v")
    st.add_memlet_path(y1, es, ts, memlet=Memlet.simple(ybuf, "q"), dst_conn="v")
    write_out(ctx, st, ts, "o", "y", "q", scope_exit=(xs,))


@register("Ger", "buffered", applicable=_tiling_ok)
def ger(ctx: ExpansionContext):
    st, label = ctx.state, ctx.node.label
    A, X, Y = ctx.inputs["A"], ctx.inputs["x"], ctx.inputs["y"]
    rows, cols = length(ctx, A, 0, "rows"), length(ctx, A, 1, "cols")
    tiling = ctx.attr("tiling", "RowMajor")
    T = int(ctx.attr("tile", 4))
    base = base_type(A)
    xbuf = ctx.transient("xbuf", shape=[rows], element=base, storage=LOCAL).name
    ybuf = ctx.transient("ybuf", shape=[cols], element=base, storage=LOCAL).name
    xb = copy_in(ctx, st, X, xbuf, rows, f"{label}_load_x")
    yb = copy_in(ctx, st, Y, ybuf, cols, f"{label}_load_y")
    ranges, r, c = loop_nest(tiling, rows, cols, T)
    alpha = scalar_code(ctx, "alpha", 1, avoid=("a", "xv", "yv"))
    en, ex = st.add_map(f"{label}_{tiling}", ranges)
    t = st.add_tasklet("ger", ["a", "xv", "yv"], ["o"], f"o = a + {alpha} * xv * yv")
    st.add_memlet_path(A.access, en, t, memlet=elem(A, f"{r}, {c}"), dst_conn="a")
    st.add_memlet_path(xb, en, t, memlet=Memlet.simple(xbuf, r), dst_conn="xv")
    st.add_memlet_path(yb, en, t, memlet=Memlet.simple(ybuf, c), dst_conn="yv")
    write_out(ctx, st, t, "o", "A_out", f"{r}, {c}", scope_exit=(ex,))


# Gemm ----------------------------------------------------------------------


def _gemm_generic_ok(ctx):
    if ctx.attr("systolic_P"):
        return "node requests a systolic array"
    return no_vectors(ctx)


@register("Gemm", "triple_loop", applicable=_gemm_generic_ok)
def gemm_generic(ctx: ExpansionContext):
    st, label = ctx.state, ctx.node.label
    A, B = ctx.inputs["A"], ctx.inputs["B"]
    N, K = length(ctx, A, 0, "N"), length(ctx, A, 1, "K")
    M = length(ctx, B, 1, "M")
    acc = ctx.transient("acc", shape=[1], element=base_type(A), storage=REG).name
    eo, xo = st.add_map(f"{label}_ij", {"i": f"0:{N}", "j": f"0:{M}"})
    ti = st.add_tasklet("init_acc", [], ["o"], "o = 0")
    st.add_edge(eo, None, ti, None, Memlet.empty())
    a0 = st.add_access(acc)
    st.add_edge(ti, "o", a0, None, Memlet.simple(acc, "0"))
    ek, xk = st.add_map(f"{label}_k", {"k": f"0:{K}"})
    t = st.add_tasklet("gemm_mac", ["a", "b", "c"], ["o"], "o = c + a * b")
    st.add_memlet_path(A.access, eo, ek, t, memlet=elem(A, "i, k"), dst_conn="a")
    st.add_memlet_path(B.access, eo, ek, t, memlet=elem(B, "k, j"), dst_conn="b")
    st.add_memlet_path(a0, ek, t, memlet=Memlet.simple(acc, "0"), dst_conn="c")
    a1 = st.add_access(acc)
    st.add_memlet_path(t, xk, a1, memlet=Memlet.simple(acc, "0"), src_conn="o")
    tw = st.add_tasklet("write_c", ["v"], ["o"], "o = v")
    st.add_edge(a1, None, tw, "v", Memlet.simple(acc, "0"))
    write_out(ctx, st, tw, "o", "C", "i, j", scope_exit=(xo,))


def _systolic_ok(ctx):
    P = ctx.attr("systolic_P")
    if not P:
        return "no systolic_P attribute"
    if int(P) < 1:
        return "systolic_P must be positive"
    why = no_vectors(ctx)
    if why:
        return why
    A = ctx.inputs["A"]
    if A.desc.is_stream or ctx.inputs["B"].desc.is_stream:
        return "systolic expansion reads A and B from memory"
    return None


def _pe_symbol(ctx, P: int) -> str:
    s = ctx.sdfg
    name = "P"
    i = 1
    while (name in s.constants and s.constants[name] != P) or name in s.symbols or name in s.containers:
        name = f"P_{i}"
        i += 1
    s.constants[name] = P
    return name


@register("Gemm", "systolic", priority=10, applicable=_systolic_ok)
def gemm_systolic(ctx: ExpansionContext):
    """One-dimensional systolic array of P compute PEs chained by streams."""
    st, s = ctx.state, ctx.sdfg
    A, B = ctx.inputs["A"], ctx.inputs["B"]
    Pv = int(ctx.attr("systolic_P"))
    N, K = A.desc.shape
    M = B.desc.shape[1]
    try:
        if evaluate(N, s.constants) % Pv:
            raise ExpansionError(f"N={evaluate(N, s.constants)} is not divisible by P={Pv}")
    except KeyError:
        pass
    P = _pe_symbol(ctx, Pv)
    el = base_type(A)
    depth = int(ctx.attr("depth", 4))
    pipes = {}
    for nm in ("A_pipe", "B_pipe", "C_pipe"):
        pipes[nm] = s.add_stream(s.unique_name(nm), element=el, shape=[parse_expr(f"{P} + 1")], capacity=depth).name
    Ap, Bp, Cp = pipes["A_pipe"], pipes["B_pipe"], pipes["C_pipe"]
    nb = f"({N})/{P}"

    # read_A: for each block and k, the P rows' elements in PE order
    en, ex = st.add_map("read_A", {"n0": f"0:{nb}", "k": f"0:{K}", "a": f"0:{P}"})
    t = st.add_tasklet("read_A", ["v"], ["o"], "o = v")
    st.add_memlet_path(A.access, en, t, memlet=Memlet.simple(A.desc.name, f"n0 * {P} + a, k"), dst_conn="v")
    st.add_memlet_path(t, ex, st.add_access(Ap), memlet=Memlet.simple(Ap, "0"), src_conn="o")

    # read_B: B streamed once per row block
    en, ex = st.add_map("read_B", {"n0": f"0:{nb}", "k": f"0:{K}", "m": f"0:{M}"})
    t = st.add_tasklet("read_B", ["v"], ["o"], "o = v")
    st.add_memlet_path(B.access, en, t, memlet=Memlet.simple(B.desc.name, "k, m"), dst_conn="v")
    st.add_memlet_path(t, ex, st.add_access(Bp), memlet=Memlet.simple(Bp, "0"), src_conn="o")

    # compute: unrolled over the P PEs
    c_buf = ctx.transient("c_buf", shape=[P, M], element=el, storage=LOCAL).name
    a_reg = ctx.transient("a_reg", shape=[P], element=el, storage=REG).name
    a_in, a_out = st.add_access(Ap), st.add_access(Ap)
    b_in, b_out = st.add_access(Bp), st.add_access(Bp)
    c_in, c_out = st.add_access(Cp), st.add_access(Cp)
    ep, xp = st.add_map("compute", {"p": f"0:{P}"}, schedule=Schedule.Unrolled)
    en0, xn0 = st.add_map("compute_block", {"n0": f"0:{nb}"})
    st.add_edge(ep, None, en0, None, Memlet.empty())

    ei, xi = st.add_map("init_c", {"m": f"0:{M}"})
    st.add_edge(en0, None, ei, None, Memlet.empty())
    ti = st.add_tasklet("init_c", [], ["o"], "o = 0")
    st.add_edge(ei, None, ti, None, Memlet.empty())
    cb0 = st.add_access(c_buf)
    st.add_memlet_path(ti, xi, cb0, memlet=Memlet.simple(c_buf, "p, m"), src_conn="o")

    ek, xk = st.add_map("compute_k", {"k": f"0:{K}"})
    st.add_edge(cb0, None, ek, None, Memlet.empty())
    # keep the first A element for this PE, forward the rest downstream
    ea, xa = st.add_map("distribute_A", {"a": f"0:{P} - p"})
    td = st.add_tasklet("distribute_A", ["x"], ["keep", "fwd"], "if a == 0:\n    keep = x\nelse:\n    fwd = x")
    st.add_memlet_path(a_in, ep, en0, ek, ea, td, memlet=Memlet.simple(Ap, "p"), dst_conn="x")
    ar = st.add_access(a_reg)
    st.add_memlet_path(td, xa, ar, memlet=Memlet(a_reg, Memlet.simple(a_reg, "p").subset, SymExpr.const(1), dynamic=True), src_conn="keep")
    st.add_memlet_path(td, xa, xk, xn0, xp, a_out, memlet=Memlet(Ap, Memlet.simple(Ap, "p + 1").subset, SymExpr.const(1), dynamic=True), src_conn="fwd")

    em, xm = st.add_map("compute_m", {"m": f"0:{M}"})
    st.add_edge(ar, None, em, None, Memlet.empty())
    tm = st.add_tasklet("mac", ["av", "b", "c"], ["c_out", "fwd_b"], f"c_out = c + av * b\nif p < {P} - 1:\n    fwd_b = b")
    st.add_memlet_path(ar, em, tm, memlet=Memlet.simple(a_reg, "p"), dst_conn="av")
    st.add_memlet_path(b_in, ep, en0, ek, em, tm, memlet=Memlet.simple(Bp, "p"), dst_conn="b")
    st.add_memlet_path(cb0, ek, em, tm, memlet=Memlet.simple(c_buf, "p, m"), dst_conn="c")
    cb1 = st.add_access(c_buf)
    st.add_memlet_path(tm, xm, xk, cb1, memlet=Memlet.simple(c_buf, "p, m"), src_conn="c_out")
    st.add_memlet_path(tm, xm, xk, xn0, xp, b_out, memlet=Memlet(Bp, Memlet.simple(Bp, "p + 1").subset, SymExpr.const(1), dynamic=True), src_conn="fwd_b")

    # drain: pass on the rows of upstream PEs, then this PE's row
    ef, xf = st.add_map("forward_C", {"r": "0:p", "m": f"0:{M}"})
    st.add_edge(cb1, None, ef, None, Memlet.empty())
    tf = st.add_tasklet("forward_C", ["v"], ["o"], "o = v")
    st.add_memlet_path(c_in, ep, en0, ef, tf, memlet=Memlet.simple(Cp, "p"), dst_conn="v")
    ed, xd = st.add_map("drain_C", {"m": f"0:{M}"})
    st.add_edge(xf, None, ed, None, Memlet.empty())
    tdr = st.add_tasklet("drain_C", ["v"], ["o"], "o = v")
    st.add_memlet_path(cb1, ed, tdr, memlet=Memlet.simple(c_buf, "p, m"), dst_conn="v")
    # both drain tasklets push into C_pipe[p + 1] through the shared scopes
    st.add_memlet_path(tf, xf, xn0, xp, c_out, memlet=Memlet.simple(Cp, "p + 1"), src_conn="o")
    st.add_memlet_path(tdr, xd, xn0, xp, c_out, memlet=Memlet.simple(Cp, "p + 1"), src_conn="o")

    # write_C: rows arrive in PE order from the end of the chain
    en, ex = st.add_map("write_C", {"n0": f"0:{nb}", "a": f"0:{P}", "m": f"0:{M}"})
    t = st.add_tasklet("write_C", ["v"], ["o"], "o = v")
    st.add_memlet_path(st.add_access(Cp), en, t, memlet=Memlet.simple(Cp, P), dst_conn="v")
    for port in ctx.outputs["C"]:
        st.add_memlet_path(t, ex, port.access, memlet=Memlet.simple(port.desc.name, f"n0 * {P} + a, m"), src_conn="o")
    # the original A/B access nodes are reused by the readers; a/b/c pipes by compute
    del a_in, b_in, c_in


# MatMul dispatch -----------------------------------------------------------


def _rank(p: Port) -> int:
    return len(p.desc.shape)


def _matmul_ok(ctx):
    ra, rb = _rank(ctx.inputs["A"]), _rank(ctx.inputs["B"])
    if (ra, rb) in ((2, 2), (2, 1), (1, 1)):
        return None
    return f"unsupported operand ranks {ra}-D x {rb}-D"


@register("MatMul", "dispatch", applicable=_matmul_ok)
def matmul(ctx: ExpansionContext):
    st = ctx.state
    ra, rb = _rank(ctx.inputs["A"]), _rank(ctx.inputs["B"])
    kind, rename = {
        (2, 2): ("Gemm", {"A": "A", "B": "B", "C": "C"}),
        (2, 1): ("Gemv", {"A": "A", "B": "x", "C": "y"}),
        (1, 1): ("Dot", {"A": "x", "B": "y", "C": "r"}),
    }[(ra, rb)]
    ins, outs = CONNECTORS[kind]
    attrs = dict(ctx.node.attrs)
    if kind != "Gemm":
        attrs.pop("systolic_P", None)
    new = st.add_library(ctx.node.label + "_" + kind.lower(), kind, ins, outs, **attrs)
    for c, port in ctx.inputs.items():
        st.add_edge(port.access, None, new, rename[c], port.edge.memlet)
    for c, ports in ctx.outputs.items():
        for port in ports:
            st.add_edge(new, rename[c], port.access, None, port.edge.memlet)
