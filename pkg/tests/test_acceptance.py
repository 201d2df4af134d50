"""Acceptance criteria, one marker per criterion.

``pytest -v`` ends with an "acceptance criteria" section holding one
PASS/FAIL line per criterion.
"""

import time

import numpy as np
import pytest

from _support import assert_outputs_close, on_device, prepared
from dfhls import fixtures
from dfhls.analysis import GIB, connected_components, offchip_volume, stream_volumes
from dfhls.codegen import check_emitted, count_annotations, generate, parse_source
from dfhls.codegen.grammar import Loop
from dfhls.ir import LibraryNode, MapEntry, StorageKind, Tasklet
from dfhls.library import expand_all, stencil_offsets
from dfhls.library.registry import ExpansionLog
from dfhls.sim import DeadlockReport, ConcurrentResult, run_concurrent, run_reference
from dfhls.symbolic import evaluate, parse_expr
from dfhls.transforms import (
    auto_pipeline,
    fpga_transform,
    input_to_constant,
    replicate_container,
    streaming_composition,
    streaming_memory,
    vectorize_all,
)

FUNC, KERN = "func-dataflow", "kernel-per-pe"


def criterion(n, title):
    return pytest.mark.criterion(n, title)


def kernel_state(s, name):
    return next(st for st in s.state_order() if st.name == name)


# 1 -----------------------------------------------------------------------


@criterion(1, "AXPYDOT has 1 component naive and 5 after auto")
@pytest.mark.parametrize("target", [FUNC, KERN])
def test_axpydot_components(target):
    t0 = time.perf_counter()
    s = fixtures.axpydot()
    assert len(connected_components(kernel_state(s, "axpydot"), s)) == 1
    out, _ = auto_pipeline(s, target, 16)
    assert len(connected_components(kernel_state(out, "axpydot"), out)) == 5
    assert time.perf_counter() - t0 < 1.0


# 2 -----------------------------------------------------------------------


def gemver_variants():
    f = fpga_transform(fixtures.gemver()).sdfg
    naive = expand_all(f, FUNC)
    composed = streaming_composition(expand_all(f, FUNC)).sdfg
    replicated = streaming_composition(expand_all(replicate_container(f, "fpga_B").sdfg, FUNC)).sdfg
    return naive, composed, replicated


@criterion(2, "GEMVER off-chip volume 6/4/3 GiB and the same ratios at N=1024")
def test_gemver_volumes():
    naive, composed, replicated = gemver_variants()
    N = 16384
    # N x N f32 matrix passes plus the length-N vector traffic
    # (11 vector transfers naive; composing removes both passes over t)
    expected = {"naive": 6 * 4 * N * N + 11 * 4 * N, "composed": 4 * 4 * N * N + 9 * 4 * N, "replicated": 3 * 4 * N * N + 9 * 4 * N}
    got = {k: offchip_volume(s, {"N": N}).total_value for k, s in zip(expected, (naive, composed, replicated))}
    assert got == expected
    assert [round(got[k] / GIB, 1) for k in expected] == [6.0, 4.0, 3.0]
    for n in (N, 1024):
        v = [offchip_volume(s, {"N": n}).total_value for s in (naive, composed, replicated)]
        assert v[0] / v[1] == pytest.approx(1.5, rel=5e-3)
        assert v[0] / v[2] == pytest.approx(2.0, rel=5e-3)
        # the N*N coefficient, recovered from V(2n) - 2 V(n) = 2 a n^2, is exact
        quad = [(offchip_volume(s, {"N": 2 * n}).total_value - 2 * x) // (2 * n * n) for s, x in zip((naive, composed, replicated), v)]
        assert quad == [24, 16, 12]


@criterion(2, "GEMVER off-chip volume 6/4/3 GiB and the same ratios at N=1024")
def test_gemver_volume_is_symbolic():
    naive, _, _ = gemver_variants()
    rep = offchip_volume(naive)
    assert rep.total_value is None
    assert evaluate(rep.total_bytes, {"N": 16384}) == 6 * 2**30 + 44 * 16384


# 3 -----------------------------------------------------------------------


@criterion(3, "systolic GEMM B_pipe volume K*M*(N/P) matches simulated pushes")
def test_systolic_stream_balance():
    s = expand_all(fixtures.gemm(P=4), KERN)
    st = s.state_order()[0]
    want = parse_expr("K*M*(N/P)")
    assert stream_volumes(st, s, "B_pipe")["producers"][0] == want
    b = {"N": 16, "M": 16, "K": 16}
    rng = np.random.default_rng(0)
    A, B = (rng.random((16, 16)).astype(np.float32) for _ in range(2))
    r = run_concurrent(s, None, {"A": A, "B": B}, b)
    assert isinstance(r, ConcurrentResult)
    expect = evaluate(want, {**b, **s.constants})
    assert [r.pushes(f"B_pipe[{p}]") for p in range(4)] == [expect] * 4
    np.testing.assert_allclose(r.outputs["C"].reshape(16, 16), A @ B, rtol=1e-5)


# 4 -----------------------------------------------------------------------

_elapsed = []


def _axpydot_inputs(N=16):
    rng = np.random.default_rng(1)
    return {k: rng.uniform(-1, 1, N).astype(np.float32) for k in "xyw"}, {"N": N, "a": 2}


def _library_case(s, binding, target, overrides=None, rtol=1e-5):
    ins = fixtures.random_inputs(s, binding, seed=3)
    before = run_reference(s, ins, binding)
    after = run_reference(expand_all(on_device(s), target, overrides), ins, binding)
    assert_outputs_close(before, after, rtol=rtol)


def _pass_case(before_graph, after_graph, ins, binding, rtol=1e-5):
    assert_outputs_close(run_reference(before_graph, ins, binding), run_reference(after_graph, ins, binding), rtol=rtol)


def case_fpga_transform():
    ins, b = _axpydot_inputs()
    s = fixtures.axpydot()
    _pass_case(s, fpga_transform(s).sdfg, ins, b)
    g = fixtures.gemver()
    gi = fixtures.random_inputs(g, {"N": 8}, seed=2)
    _pass_case(g, fpga_transform(g).sdfg, gi, {"N": 8})


def case_vectorize(W):
    ins, b = _axpydot_inputs()
    f = fpga_transform(fixtures.axpydot()).sdfg
    r = vectorize_all(f, W)
    assert r.report.applied
    # the dot product is reassociated across lanes
    _pass_case(f, expand_all(r.sdfg, FUNC), ins, b, rtol=1e-4)


def case_streaming_memory():
    ins, b = _axpydot_inputs()
    e = expand_all(fpga_transform(fixtures.axpydot()).sdfg, KERN)
    r = streaming_memory(e)
    assert r.report.applied
    _pass_case(e, r.sdfg, ins, b)


def case_streaming_composition():
    e = expand_all(fpga_transform(fixtures.gemver()).sdfg, FUNC)
    r = streaming_composition(e)
    assert r.report.applied
    b = {"N": 8}
    _pass_case(e, r.sdfg, fixtures.random_inputs(e, b, seed=4), b, rtol=1e-4)


def case_replicate_container():
    f = fpga_transform(fixtures.gemver()).sdfg
    r = replicate_container(f, "fpga_B")
    assert r.report.applied
    b = {"N": 8}
    _pass_case(f, r.sdfg, fixtures.random_inputs(f, b, seed=5), b)


def case_input_to_constant():
    s = fixtures.dense_layer(4, 3)
    ins = fixtures.random_inputs(s, seed=6)
    r = input_to_constant(s, "Wt", ins["Wt"])
    assert r.report.applied
    assert not any(st.access_nodes("Wt") for st in r.sdfg.state_order())
    before, after = run_reference(s, ins), run_reference(r.sdfg, ins)
    assert_outputs_close({"out": before["out"]}, after)


def case_integer_dot():
    s = fixtures.dot(16, element="i32")
    ins = fixtures.random_inputs(s, seed=7)
    for target in (FUNC, KERN):
        after = run_reference(expand_all(on_device(s), target), ins)
        np.testing.assert_array_equal(after["r"], run_reference(s, ins)["r"])


CASES = {
    "fpga_transform": case_fpga_transform,
    "vectorize_W2": lambda: case_vectorize(2),
    "vectorize_W4": lambda: case_vectorize(4),
    "streaming_memory": case_streaming_memory,
    "streaming_composition": case_streaming_composition,
    "replicate_container": case_replicate_container,
    "input_to_constant": case_input_to_constant,
    "dot_partial_sums": lambda: _library_case(fixtures.dot(16), {}, FUNC, {"dot": "partial_sums"}, rtol=1e-4),
    "dot_accumulate": lambda: _library_case(fixtures.dot(16), {}, KERN, {"dot": "accumulate"}),
    "dot_integer": case_integer_dot,
    "gemm_systolic": lambda: _library_case(fixtures.gemm(8, 8, 8, P=4), {}, KERN, rtol=1e-4),
    "gemv_row_major": lambda: _library_case(fixtures.gemv(8, 12, False, "RowMajor", 4, 1.5), {}, FUNC, rtol=1e-4),
    "gemv_column_tiles": lambda: _library_case(fixtures.gemv(8, 12, True, "ColumnTiles", 4, 2.0), {}, FUNC, rtol=1e-4),
    "ger": lambda: _library_case(fixtures.ger(8, 12), {}, FUNC),
    "stencil_shift_register": lambda: case_stencil("shift_register", KERN),
    "stencil_explicit_buffers": lambda: case_stencil("explicit_buffers", FUNC),
}


def case_stencil(impl, target):
    s = fixtures.diffusion2d(16, 4)
    ins = fixtures.random_inputs(s, seed=8)
    _pass_case(s, expand_all(s, target, {"b": impl, "d": impl}), ins, {})


@criterion(4, "passes and expansions preserve semantics, under 30 s")
@pytest.mark.parametrize("case", sorted(CASES))
def test_semantic_preservation(case):
    t0 = time.perf_counter()
    CASES[case]()
    _elapsed.append(time.perf_counter() - t0)


@criterion(4, "passes and expansions preserve semantics, under 30 s")
def test_semantic_preservation_runtime():
    assert len(_elapsed) == len(CASES)
    assert sum(_elapsed) < 30.0


# 5 -----------------------------------------------------------------------


def _dot_structure(target):
    s = vectorize_all(fpga_transform(fixtures.dot(64)).sdfg, 4).sdfg
    e = expand_all(s, target)
    st = kernel_state(e, "dot")
    scope = st.scope_dict()
    where = {}
    for n in st.nodes_of(Tasklet):
        entry = scope.get(n.id)
        where.setdefault(st.nodes[entry].label if entry is not None else None, []).append(n.label)
    return e, st, where


@criterion(5, "Dot W=4: 3+3 adders without native accumulation, one register with it")
def test_dot_adders_without_native_accumulation():
    _, _, where = _dot_structure(FUNC)
    assert len([t for t in where["dot_stream"] if t.startswith("unroll_add")]) == 3
    assert len([t for t in where["dot_reduce"] if t.startswith("reduce_add")]) == 3


@criterion(5, "Dot W=4: 3+3 adders without native accumulation, one register with it")
def test_dot_native_accumulation():
    e, st, where = _dot_structure(KERN)
    regs = [n for n, d in e.containers.items() if d.transient and d.storage == StorageKind.OnChipRegister]
    assert regs == ["dot_acc"]
    assert [tuple(d) for d in [e.containers["dot_acc"].shape]] == [(1,)]
    assert where["dot_stream"] == ["accumulate"]
    assert not any(m.label.endswith("_reduce") for m in st.nodes_of(MapEntry))


# 6 -----------------------------------------------------------------------


@criterion(6, "4-point stencil, row stride 4096, W=4 gives 14 offsets")
def test_stencil_offsets():
    table = stencil_offsets([(0, -1), (0, 1), (-1, 0), (1, 0)], [4096, 1], 4)
    assert len(table.offsets) == 14


# 7 -----------------------------------------------------------------------


def _diffusion_inputs(n=64):
    rng = np.random.default_rng(0)
    a = rng.random((n, n)).astype(np.float32)
    c = rng.random(5).astype(np.float32)
    return {"a": a, **{f"c{i}": c[i] for i in range(5)}}, fixtures.diffusion_oracle(a, c)


@criterion(7, "diffusion 64x64 W=8 matches the oracle under both expansions; zeroed diamond deadlocks")
@pytest.mark.parametrize("impl,target", [("shift_register", KERN), ("explicit_buffers", KERN), ("explicit_buffers", FUNC)])
def test_diffusion_expansions(impl, target):
    s = fixtures.diffusion2d(64, 8)
    ins, oracle = _diffusion_inputs()
    log = ExpansionLog()
    e = expand_all(s, target, {"b": impl, "d": impl}, log)
    assert {step[3] for step in log.steps} == {impl}
    np.testing.assert_allclose(run_reference(e, ins)["d"].reshape(64, 64), oracle, rtol=1e-5, atol=1e-6)
    r = run_concurrent(e, None, ins)
    assert isinstance(r, ConcurrentResult), str(r)
    np.testing.assert_allclose(r.outputs["d"].reshape(64, 64), oracle, rtol=1e-5, atol=1e-6)


@criterion(7, "diffusion 64x64 W=8 matches the oracle under both expansions; zeroed diamond deadlocks")
def test_zeroed_diamond_deadlocks():
    a = np.random.default_rng(1).random((16, 16)).astype(np.float32)
    assert isinstance(run_concurrent(expand_all(fixtures.diamond(16, 1), FUNC), None, {"a": a}), ConcurrentResult)
    r = run_concurrent(expand_all(fixtures.diamond(16, 1, zero_delays=True), FUNC), None, {"a": a})
    assert isinstance(r, DeadlockReport)
    assert len(r.cycle) >= 2
    # entries read "pe (op stream)"
    assert {c.split(" ")[0] for c in r.cycle} <= set(r.blocked)
    assert "cycle:" in str(r)


# 8 -----------------------------------------------------------------------


def systolic(dialect):
    target = {"F": FUNC, "K": KERN}[dialect]
    return generate(expand_all(on_device(fixtures.gemm(P=4)), target), dialect)


@criterion(8, "systolic GEMM codegen structure, golden files, check_emitted on all fixtures")
def test_kernel_per_pe_systolic():
    p = systolic("K")
    names = {"read_A", "read_B", "compute", "compute_1", "compute_2", "compute_3", "write_C"}
    assert {k["name"] for k in p.manifest["kernels"]} == names
    assert sorted(p.manifest["launch_order"]) == sorted(names)
    host = parse_source(p.files[p.host_file])
    launched = [c.args[0] for f in host.functions for c in f.walk() if getattr(c, "name", None) == "launch"]
    assert sorted(launched) == sorted(names)
    assert check_emitted(p) == []


@criterion(8, "systolic GEMM codegen structure, golden files, check_emitted on all fixtures")
def test_function_dataflow_systolic():
    p = systolic("F")
    (device,) = [f for f in p.files if f != p.host_file and f.endswith(".src")]
    src = parse_source(p.files[device])
    top = [f for f in src.functions if count_annotations(f, "DATAFLOW")]
    assert len(top) == 1
    unrolled = [n for n in top[0].walk() if isinstance(n, Loop) and any(a.split()[0] == "UNROLL" for a in n.annotations)]
    assert len(unrolled) == 1
    assert "P + 1" in p.files[device]
    assert check_emitted(p) == []


@criterion(8, "systolic GEMM codegen structure, golden files, check_emitted on all fixtures")
@pytest.mark.parametrize("dialect", ["F", "K"])
def test_golden_files(dialect, golden_dir):
    p = systolic(dialect)
    d = golden_dir / f"gemm_systolic_{dialect}"
    assert sorted(f.name for f in d.iterdir()) == sorted(p.files)
    for name, text in p.files.items():
        assert (d / name).read_text() == text, name
    assert systolic(dialect).files == p.files


@criterion(8, "systolic GEMM codegen structure, golden files, check_emitted on all fixtures")
@pytest.mark.parametrize("name", sorted(fixtures.FIXTURES))
@pytest.mark.parametrize("dialect", ["F", "K"])
def test_check_emitted_all_fixtures(name, dialect):
    target = {"F": FUNC, "K": KERN}[dialect]
    s = expand_all(on_device(fixtures.build(name)), target)
    p = generate(s, dialect)
    assert [str(d) for d in check_emitted(p)] == []


# 9 -----------------------------------------------------------------------
# the property suites live in test_properties.py and carry this marker too
