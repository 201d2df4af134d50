"""Example programs built with the graph builder API.

Each builder returns a host-level SDFG with unexpanded library nodes, ready for
``transforms.fpga_transform`` or ``transforms.auto_pipeline``.
"""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from .ir import Memlet, Sdfg, StorageKind


def _full(name: str, *dims) -> Memlet:
    return Memlet.simple(name, ", ".join(f"0:{d}" for d in dims))


def axpydot(N="N") -> Sdfg:
    """z = a*x + y; result = z . w"""
    s = Sdfg("axpydot")
    for n in ("x", "y", "w"):
        s.add_array(n, [N])
    s.add_array("z", [N], transient=True)
    s.add_array("result", [1])
    s.add_symbol("a")
    st = s.add_state("axpydot", is_start=True)
    x, y, w, z, r = (st.add_access(n) for n in ("x", "y", "w", "z", "result"))
    ax = st.add_library("axpy", "Axpy", ("x", "y"), ("z",), alpha="a")
    dot = st.add_library("dot", "Dot", ("x", "y"), ("r",))
    st.add_edge(x, None, ax, "x", _full("x", N))
    st.add_edge(y, None, ax, "y", _full("y", N))
    st.add_edge(ax, "z", z, None, _full("z", N))
    st.add_edge(z, None, dot, "x", _full("z", N))
    st.add_edge(w, None, dot, "y", _full("w", N))
    st.add_edge(dot, "r", r, None, Memlet.simple("result", "0"))
    return s


def gemver(N="N", tile=4, alpha=1.5, beta=1.2) -> Sdfg:
    """B = A + u1 v1^T + u2 v2^T; x = beta B^T y + z; w = alpha B x

    The first rank-1 update lands in the transient ``B1``; ``B`` is kept as an
    output and read again by the final matrix-vector product in a second state.
    """
    s = Sdfg("gemver")
    for n in ("A", "B"):
        s.add_array(n, [N, N])
    s.add_array("B1", [N, N], transient=True)
    for n in ("u1", "v1", "u2", "v2", "y", "z", "x", "w"):
        s.add_array(n, [N])
    s.add_array("t", [N], transient=True)
    tiled = dict(tiling="ColumnTiles", tile=tile)
    st = s.add_state("gemver_update", is_start=True)
    A, B1, B = st.add_access("A"), st.add_access("B1"), st.add_access("B")
    g1 = st.add_library("ger1", "Ger", ("A", "x", "y"), ("A_out",), alpha=1, **tiled)
    g2 = st.add_library("ger2", "Ger", ("A", "x", "y"), ("A_out",), alpha=1, **tiled)
    st.add_edge(A, None, g1, "A", _full("A", N, N))
    st.add_edge(st.add_access("u1"), None, g1, "x", _full("u1", N))
    st.add_edge(st.add_access("v1"), None, g1, "y", _full("v1", N))
    st.add_edge(g1, "A_out", B1, None, _full("B1", N, N))
    st.add_edge(B1, None, g2, "A", _full("B1", N, N))
    st.add_edge(st.add_access("u2"), None, g2, "x", _full("u2", N))
    st.add_edge(st.add_access("v2"), None, g2, "y", _full("v2", N))
    st.add_edge(g2, "A_out", B, None, _full("B", N, N))
    gt = st.add_library("gemv_t", "Gemv", ("A", "x"), ("y",), transposed=True, alpha=beta, **tiled)
    st.add_edge(B, None, gt, "A", _full("B", N, N))
    st.add_edge(st.add_access("y"), None, gt, "x", _full("y", N))
    t = st.add_access("t")
    st.add_edge(gt, "y", t, None, _full("t", N))
    ax = st.add_library("add_z", "Axpy", ("x", "y"), ("z",), alpha=1)
    st.add_edge(t, None, ax, "x", _full("t", N))
    st.add_edge(st.add_access("z"), None, ax, "y", _full("z", N))
    st.add_edge(ax, "z", st.add_access("x"), None, _full("x", N))

    st2 = s.add_state("gemver_mv")
    gv = st2.add_library("gemv", "Gemv", ("A", "x"), ("y",), transposed=False, alpha=alpha, tiling="RowMajor")
    st2.add_edge(st2.add_access("B"), None, gv, "A", _full("B", N, N))
    st2.add_edge(st2.add_access("x"), None, gv, "x", _full("x", N))
    st2.add_edge(gv, "y", st2.add_access("w"), None, _full("w", N))
    s.add_interstate_edge("gemver_update", "gemver_mv")
    return s


def gemm(N="N", K="K", M="M", P=None, element="f32") -> Sdfg:
    """C = A @ B through a Gemm node (systolic when ``P`` is given)."""
    from .ir import ElementType

    el = ElementType.parse(element)
    s = Sdfg("gemm_systolic" if P else "gemm")
    s.add_array("A", [N, K], element=el)
    s.add_array("B", [K, M], element=el)
    s.add_array("C", [N, M], element=el)
    st = s.add_state("gemm", is_start=True)
    attrs = {"systolic_P": int(P)} if P else {}
    g = st.add_library("gemm", "Gemm", ("A", "B"), ("C",), **attrs)
    st.add_edge(st.add_access("A"), None, g, "A", _full("A", N, K))
    st.add_edge(st.add_access("B"), None, g, "B", _full("B", K, M))
    st.add_edge(g, "C", st.add_access("C"), None, _full("C", N, M))
    return s


def gemv(N="N", M="M", transposed=False, tiling="RowMajor", tile=4, alpha=1) -> Sdfg:
    s = Sdfg(f"gemv_{tiling.lower()}")
    s.add_array("A", [N, M])
    rows_in, rows_out = (N, M) if transposed else (M, N)
    s.add_array("x", [rows_in])
    s.add_array("y", [rows_out])
    st = s.add_state("gemv", is_start=True)
    g = st.add_library("gemv", "Gemv", ("A", "x"), ("y",), transposed=transposed, tiling=tiling, tile=tile, alpha=alpha)
    st.add_edge(st.add_access("A"), None, g, "A", _full("A", N, M))
    st.add_edge(st.add_access("x"), None, g, "x", _full("x", rows_in))
    st.add_edge(g, "y", st.add_access("y"), None, _full("y", rows_out))
    return s


def ger(N="N", M="M", tiling="RowMajor", tile=4, alpha=2) -> Sdfg:
    s = Sdfg("ger")
    s.add_array("A", [N, M])
    s.add_array("x", [N])
    s.add_array("y", [M])
    s.add_array("B", [N, M])
    st = s.add_state("ger", is_start=True)
    g = st.add_library("ger", "Ger", ("A", "x", "y"), ("A_out",), tiling=tiling, tile=tile, alpha=alpha)
    st.add_edge(st.add_access("A"), None, g, "A", _full("A", N, M))
    st.add_edge(st.add_access("x"), None, g, "x", _full("x", N))
    st.add_edge(st.add_access("y"), None, g, "y", _full("y", M))
    st.add_edge(g, "A_out", st.add_access("B"), None, _full("B", N, M))
    return s


def dot(N="N", element="f32") -> Sdfg:
    from .ir import ElementType

    el = ElementType.parse(element)
    s = Sdfg("dot")
    s.add_array("x", [N], element=el)
    s.add_array("y", [N], element=el)
    s.add_array("r", [1], element=el)
    st = s.add_state("dot", is_start=True)
    d = st.add_library("dot", "Dot", ("x", "y"), ("r",))
    st.add_edge(st.add_access("x"), None, d, "x", _full("x", N))
    st.add_edge(st.add_access("y"), None, d, "y", _full("y", N))
    st.add_edge(d, "r", st.add_access("r"), None, Memlet.simple("r", "0"))
    return s


def matmul(a_shape=(8, 8), b_shape=(8,)) -> Sdfg:
    s = Sdfg("matmul")
    s.add_array("A", list(a_shape))
    s.add_array("B", list(b_shape))
    out = list(a_shape[:-1]) + list(b_shape[1:]) or [1]
    s.add_array("C", out)
    st = s.add_state("matmul", is_start=True)
    m = st.add_library("mm", "MatMul", ("A", "B"), ("C",))
    st.add_edge(st.add_access("A"), None, m, "A", _full("A", *a_shape))
    st.add_edge(st.add_access("B"), None, m, "B", _full("B", *b_shape))
    st.add_edge(m, "C", st.add_access("C"), None, _full("C", *out))
    return s


def dense_layer(N=4, M=3) -> Sdfg:
    """out[i] = sum_j Wt[i, j] * x[j] + bias[i], written as explicit maps."""
    s = Sdfg("dense")
    s.add_array("Wt", [M, N])
    s.add_array("bias", [M])
    s.add_array("x", [N])
    s.add_array("out", [M])
    st = s.add_state("dense", is_start=True)
    ei, xi = st.add_map("init", {"i": f"0:{M}"})
    t0 = st.add_tasklet("init", ["b"], ["o"], "o = b")
    st.add_memlet_path(st.add_access("bias"), ei, t0, memlet=Memlet.simple("bias", "i"), dst_conn="b")
    o1 = st.add_access("out")
    st.add_memlet_path(t0, xi, o1, memlet=Memlet.simple("out", "i"), src_conn="o")
    em, xm = st.add_map("mac", {"i": f"0:{M}", "j": f"0:{N}"})
    t = st.add_tasklet("mac", ["w", "v"], ["o"], "o = w * v")
    st.add_edge(o1, None, em, None, Memlet.empty())
    st.add_memlet_path(st.add_access("Wt"), em, t, memlet=Memlet.simple("Wt", "i, j"), dst_conn="w")
    st.add_memlet_path(st.add_access("x"), em, t, memlet=Memlet.simple("x", "j"), dst_conn="v")
    st.add_memlet_path(t, xm, st.add_access("out"), memlet=Memlet.simple("out", "i", wcr="sum"), src_conn="o")
    return s


def four_pe_kernel(N=16) -> Sdfg:
    """A device kernel of four PEs: two readers, one compute, one writer.

    ``a`` is read by a single copy edge, ``b`` through a map; the compute PE
    adds both streams and the writer drains the result into ``c``.
    """
    s = Sdfg("four_pe")
    for n in ("a", "b", "c"):
        s.add_array(n, [N], storage=StorageKind.DeviceDram)
    for n in ("a_pipe", "b_pipe", "c_pipe"):
        s.add_stream(n)
    st = s.add_state("kernel", is_start=True)
    st.add_edge(st.add_access("a"), None, st.add_access("a_pipe"), None, _full("a", N))
    e, x = st.add_map("read_b", {"i": f"0:{N}"})
    t = st.add_tasklet("read_b", ["v"], ["o"], "o = v")
    st.add_memlet_path(st.add_access("b"), e, t, memlet=Memlet.simple("b", "i"), dst_conn="v")
    st.add_memlet_path(t, x, st.add_access("b_pipe"), memlet=Memlet("b_pipe", (), 1), src_conn="o")
    e, x = st.add_map("add", {"i": f"0:{N}"})
    t = st.add_tasklet("add", ["p", "q"], ["o"], "o = p + q")
    st.add_memlet_path(st.add_access("a_pipe"), e, t, memlet=Memlet("a_pipe", (), 1), dst_conn="p")
    st.add_memlet_path(st.add_access("b_pipe"), e, t, memlet=Memlet("b_pipe", (), 1), dst_conn="q")
    st.add_memlet_path(t, x, st.add_access("c_pipe"), memlet=Memlet("c_pipe", (), 1), src_conn="o")
    e, x = st.add_map("write_c", {"i": f"0:{N}"})
    t = st.add_tasklet("write_c", ["v"], ["o"], "o = v")
    st.add_memlet_path(st.add_access("c_pipe"), e, t, memlet=Memlet("c_pipe", (), 1), dst_conn="v")
    st.add_memlet_path(t, x, st.add_access("c"), memlet=Memlet.simple("c", "i"), src_conn="o")
    return s


def fork_join(N=16, skew=4, depth=None, late_first=True) -> Sdfg:
    """Kernel where one branch of a fork is delayed by ``skew`` elements.

    The source pushes ``x`` to two streams. The ``late`` branch holds back the
    first ``skew`` values before forwarding. When the join reads the late branch
    first it holds nothing while it waits, so the direct FIFO needs depth
    ``skew``; reading the direct branch first parks one value in the join and
    depth ``skew - 1`` suffices.
    """
    s = Sdfg("fork_join")
    s.add_array("x", [N], storage=StorageKind.DeviceDram)
    s.add_array("y", [N], storage=StorageKind.DeviceDram)
    s.add_array("hold", [skew + 1], storage=StorageKind.OnChipLocal, transient=True)
    kw = {} if depth is None else {"capacity": depth}
    for n in ("direct", "to_late", "late"):
        s.add_stream(n, **kw)
    st = s.add_state("kernel", is_start=True)
    e, x = st.add_map("fork", {"i": f"0:{N}"})
    t = st.add_tasklet("fork", ["v"], ["a", "b"], "a = v\nb = v")
    st.add_memlet_path(st.add_access("x"), e, t, memlet=Memlet.simple("x", "i"), dst_conn="v")
    # the delayed branch is fed first in each iteration
    st.add_memlet_path(t, x, st.add_access("to_late"), memlet=Memlet("to_late", (), 1), src_conn="b")
    st.add_memlet_path(t, x, st.add_access("direct"), memlet=Memlet("direct", (), 1), src_conn="a")
    # delay line: pop everything, emit only once ``skew`` values are buffered
    e, x = st.add_map("delay", {"i": f"0:{N + skew}"})
    t = st.add_tasklet(
        "delay",
        ["v", "h"],
        ["o", "hn"],
        f"if i < {N}:\n    hn = v\nif i >= {skew}:\n    o = h",
    )
    h0 = st.add_access("hold")
    st.add_memlet_path(st.add_access("to_late"), e, t, memlet=Memlet("to_late", (), 1, dynamic=True), dst_conn="v")
    st.add_memlet_path(h0, e, t, memlet=Memlet.simple("hold", f"(i - {skew}) % {skew + 1}"), dst_conn="h")
    st.add_memlet_path(t, x, st.add_access("hold"), memlet=Memlet.simple("hold", f"i % {skew + 1}", dynamic=True), src_conn="hn")
    st.add_memlet_path(t, x, st.add_access("late"), memlet=Memlet("late", (), 1, dynamic=True), src_conn="o")
    e, x = st.add_map("join", {"i": f"0:{N}"})
    # stream inputs are popped in connector order
    conns = ["q", "p"] if late_first else ["p", "q"]
    t = st.add_tasklet("join", conns, ["o"], "o = p + q")
    pops = [("direct", "p"), ("late", "q")]
    for name, conn in (pops[::-1] if late_first else pops):
        st.add_memlet_path(st.add_access(name), e, t, memlet=Memlet(name, (), 1), dst_conn=conn)
    st.add_memlet_path(t, x, st.add_access("y"), memlet=Memlet.simple("y", "i"), src_conn="o")
    return s


# diffusion programs in the stencil DSL ---------------------------------------


def diffusion2d_program(n=64, W=8) -> dict:
    coeffs = {f"c{i}": {"data_type": "float32", "input_dims": []} for i in range(5)}
    body = "c0*{f}[j,k] + c1*{f}[j-1,k] + c2*{f}[j+1,k] + c3*{f}[j,k-1] + c4*{f}[j,k+1]"
    return {
        "dimensions": [n, n],
        "vectorization": W,
        "outputs": ["d"],
        "inputs": {"a": {"data_type": "float32", "input_dims": ["j", "k"]}, **coeffs},
        "program": {
            "b": {"data_type": "float32", "boundary": {"a": {"type": "constant", "value": 0}}, "computation": "b = " + body.format(f="a")},
            "d": {"data_type": "float32", "boundary": {"b": {"type": "constant", "value": 0}}, "computation": "d = " + body.format(f="b")},
        },
    }


def diamond_program(n=16, W=1) -> dict:
    """Fork into a 5-point stencil and a copy, joined by a sum."""
    return {
        "dimensions": [n, n],
        "vectorization": W,
        "outputs": ["out"],
        "inputs": {"a": {"data_type": "float32", "input_dims": ["j", "k"]}},
        "program": {
            "smooth": {
                "data_type": "float32",
                "boundary": {"a": {"type": "constant", "value": 0}},
                "computation": "smooth = 0.2 * (a[j,k] + a[j-1,k] + a[j+1,k] + a[j,k-1] + a[j,k+1])",
            },
            "copy": {"data_type": "float32", "boundary": {}, "computation": "copy = a[j,k]"},
            "out": {"data_type": "float32", "boundary": {}, "computation": "out = smooth[j,k] + copy[j,k]"},
        },
    }


def diffusion_oracle(a: np.ndarray, c) -> np.ndarray:
    """Two sweeps of the 5-point diffusion stencil with zero boundaries."""

    def sweep(f):
        out = np.zeros_like(f)
        H, Wd = f.shape
        for j in range(H):
            for k in range(Wd):
                acc = c[0] * f[j, k]
                acc += c[1] * (f[j - 1, k] if j > 0 else 0)
                acc += c[2] * (f[j + 1, k] if j + 1 < H else 0)
                acc += c[3] * (f[j, k - 1] if k > 0 else 0)
                acc += c[4] * (f[j, k + 1] if k + 1 < Wd else 0)
                out[j, k] = acc
        return out

    return sweep(sweep(np.asarray(a, dtype=np.float32)))


def diffusion2d(n=64, W=8, target=None):
    from .stencilfront import build_sdfg, parse_program, plan_delays

    p = parse_program(diffusion2d_program(n, W))
    return build_sdfg(p, plan_delays(p), target)


def diamond(n=16, W=1, target=None, zero_delays=False):
    from .stencilfront import build_sdfg, parse_program, plan_delays

    p = parse_program(diamond_program(n, W))
    plan = plan_delays(p)
    if zero_delays:
        plan = plan.zeroed()
    return build_sdfg(p, plan, target)


FIXTURES: Dict[str, Callable[[], Sdfg]] = {
    "axpydot": axpydot,
    "gemver": gemver,
    "gemm-systolic": lambda: gemm(P=4),
    "gemm": gemm,
    "gemv": gemv,
    "ger": ger,
    "dot": dot,
    "diffusion2d": diffusion2d,
    "diamond": diamond,
    "four-pe": four_pe_kernel,
    "fork-join": fork_join,
}


def build(name: str) -> Sdfg:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture '{name}' (known: {', '.join(sorted(FIXTURES))})") from None


def random_inputs(s: Sdfg, binding=None, seed=0) -> Dict[str, np.ndarray]:
    """Seeded values for every non-transient array of ``s`` in scalar layout."""
    from .symbolic import evaluate

    rng = np.random.default_rng(seed)
    env = dict(s.constants)
    env.update(binding or {})
    out = {}
    for name in sorted(s.containers):
        d = s.containers[name]
        if d.transient or d.is_stream:
            continue
        shape = tuple(int(evaluate(x, env)) for x in d.shape)
        if d.element.is_vector:
            shape = shape[:-1] + (shape[-1] * d.element.width,) if shape else (d.element.width,)
        if d.element.base.startswith("i"):
            out[name] = rng.integers(-8, 8, size=shape).astype(d.element.dtype)
        else:
            out[name] = rng.uniform(-1, 1, size=shape).astype(d.element.dtype)
    return out
