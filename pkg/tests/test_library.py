import json

import numpy as np
import pytest

from _support import assert_outputs_close
from dfhls import fixtures
from dfhls.ir import LibraryNode, Sdfg
from dfhls.library import (
    FUNC_DATAFLOW,
    KERNEL_PER_PE,
    ExpansionError,
    StencilSyntaxError,
    check_library_node,
    expand_all,
    expand_node,
    expansions_for,
    load_target,
    parse_computation,
    preset_names,
    row_major_strides,
    stencil_offsets,
)
from dfhls.library.blas import partial_length
from dfhls.library.registry import ExpansionLog
from dfhls.sim import run_reference


def steps(s, target, overrides=None):
    log = ExpansionLog()
    out = expand_all(s, target, overrides, log)
    assert not [n for st in out.state_order() for n in st.nodes_of(LibraryNode)]
    return [(label, exp) for _, label, _, exp in log.steps]


# targets -------------------------------------------------------------------


def test_presets():
    assert preset_names() == ["func-dataflow", "kernel-per-pe"]
    assert FUNC_DATAFLOW.dialect == "F" and KERNEL_PER_PE.dialect == "K"
    assert not FUNC_DATAFLOW.shift_registers and KERNEL_PER_PE.shift_registers
    assert KERNEL_PER_PE.native_accumulation("f32") and not FUNC_DATAFLOW.native_accumulation("f32")
    assert FUNC_DATAFLOW.native_accumulation("i32")


def test_target_from_file_and_env(tmp_path, monkeypatch):
    doc = dict(KERNEL_PER_PE.as_dict(), name="custom", shift_registers=False)
    path = tmp_path / "t.json"
    path.write_text(json.dumps(doc))
    assert load_target(path).name == "custom"
    monkeypatch.setenv("DFHLS_TARGET", "kernel-per-pe")
    assert load_target(None).name == "kernel-per-pe"
    with pytest.raises(ValueError, match="unknown target"):
        load_target("nope")
    path.write_text(json.dumps({"name": "x"}))
    with pytest.raises(ValueError, match="lacks"):
        load_target(path)


# selection -----------------------------------------------------------------


def test_expansion_priorities_follow_capabilities():
    assert steps(fixtures.dot(8), "func-dataflow") == [("dot", "partial_sums")]
    assert steps(fixtures.dot(8), "kernel-per-pe") == [("dot", "accumulate")]
    assert steps(fixtures.gemm(8, 8, 8), "kernel-per-pe") == [("gemm", "triple_loop")]
    assert steps(fixtures.gemm(8, 8, 8, P=4), "func-dataflow") == [("gemm", "systolic")]


def test_inapplicable_override_explains_why():
    with pytest.raises(ExpansionError, match="no native f32 accumulation"):
        expand_all(fixtures.dot(8), "func-dataflow", {"dot": "accumulate"})
    with pytest.raises(ExpansionError, match="unknown expansion 'nope'"):
        expand_all(fixtures.dot(8), "func-dataflow", {"dot": "nope"})
    with pytest.raises(ExpansionError, match="no shift registers"):
        expand_all(fixtures.diffusion2d(16, 4), "func-dataflow", {"b": "shift_register"})


@pytest.mark.parametrize(
    "shapes,chain",
    [
        (((4, 6), (6, 5)), [("mm", "dispatch"), ("mm_gemm", "triple_loop")]),
        (((4, 6), (6,)), [("mm", "dispatch"), ("mm_gemv", "buffered")]),
        (((6,), (6,)), [("mm", "dispatch"), ("mm_dot", "partial_sums")]),
    ],
)
def test_matmul_dispatch(shapes, chain):
    s = fixtures.matmul(*shapes)
    assert steps(s, "func-dataflow") == chain
    ins = fixtures.random_inputs(s, seed=1)
    A, B = ins["A"], ins["B"]
    got = run_reference(expand_all(s, "func-dataflow"), ins)["C"]
    np.testing.assert_allclose(np.asarray(got).reshape(np.shape(A @ B) or (1,)), np.atleast_1d(A @ B), rtol=1e-5)


def test_expand_node_by_label():
    s = fixtures.gemver()
    out = expand_node(s, "ger1", target="func-dataflow")
    labels = [n.label for st in out.state_order() for n in st.nodes_of(LibraryNode)]
    assert "ger1" not in labels and "ger2" in labels
    with pytest.raises(KeyError):
        expand_node(s, "nope")


def test_library_connector_check():
    s = Sdfg("bad")
    st = s.add_state("s", is_start=True)
    n = st.add_library("d", "Dot", ("a", "b"), ("r",))
    assert "expects inputs" in check_library_node(n)[0]
    n = st.add_library("q", "Quux", ("a",), ("r",))
    assert "unknown library node kind" in check_library_node(n)[0]


def test_registry_listing():
    assert [e.id for e in expansions_for("Stencil")] == ["shift_register", "explicit_buffers"]
    assert expansions_for("Nope") == []


@pytest.mark.parametrize("target", ["func-dataflow", "kernel-per-pe"])
@pytest.mark.parametrize("tiling,transposed", [("RowMajor", False), ("RowMajor", True), ("ColumnTiles", False), ("ColumnTiles", True)])
def test_gemv_tilings(target, tiling, transposed):
    s = fixtures.gemv(8, 12, transposed, tiling, 4, 1.5)
    ins = fixtures.random_inputs(s, seed=2)
    assert_outputs_close(run_reference(s, ins), run_reference(expand_all(s, target), ins), rtol=1e-4)


def test_partial_length():
    assert partial_length(8, 5, 4) == 8
    assert partial_length(2, 5, 4) == 8
    assert partial_length(9, 5, 1) == 9


# stencil helpers -----------------------------------------------------------


def test_parse_computation():
    c = parse_computation("b = c0*a[j,k] + c1*a[j-1,k] + a[j,k+2]", ["j", "k"])
    assert c.accesses == {"a": [(0, 0), (-1, 0), (0, 2)]}
    assert c.scalars == ["c0", "c1"]


@pytest.mark.parametrize("text,msg", [("b = a[j,k] +", "cannot parse"), ("b = a[j*2,k]", "plus a constant"), ("b = foo(a[j,k])", "unsupported")])
def test_parse_computation_errors(text, msg):
    with pytest.raises(StencilSyntaxError, match=msg):
        parse_computation(text, ["j", "k"])


def test_offsets():
    assert row_major_strides([64, 32]) == (32, 1)
    t = stencil_offsets([(0, -1), (0, 1), (-1, 0), (1, 0)], [4096, 1], 4)
    assert t.offsets[:4] == (0, 1, 2, 3) and t.offsets[-1] == 8195
    assert len(stencil_offsets([(0, 0)], [4096, 1], 1).offsets) == 1
    with pytest.raises(ValueError, match="halo"):
        stencil_offsets([(0, 3)], [16, 1], 1, halo=(1, 1))
    with pytest.raises(ValueError, match="divisible"):
        stencil_offsets([(0, 1)], [10, 1], 4, shape=(10, 10))
