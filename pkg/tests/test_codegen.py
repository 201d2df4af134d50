import re

import pytest

from dfhls import fixtures
from dfhls.codegen import (
    CodegenError,
    EmitSyntaxError,
    EmittedProgram,
    c_type,
    check_emitted,
    check_pipeline_rule,
    count_annotations,
    generate,
    parse_source,
)
from dfhls.ir import Memlet, Sdfg, StorageKind
from dfhls.ir.core import ElementType, f32, f64, i32, i64
from dfhls.library import expand_all

from _support import on_device, prepared


def scale2d():
    """A device-side 2-D map: B[i, j] = 2 * A[i, j]."""
    s = Sdfg("scale2d")
    s.add_symbol("N")
    s.add_array("A", ["N", "N"], storage=StorageKind.DeviceDram)
    s.add_array("B", ["N", "N"], storage=StorageKind.DeviceDram)
    st = s.add_state("scale", is_start=True)
    a, b = st.add_access("A"), st.add_access("B")
    me, mx = st.add_map("scale", {"i": "0:N", "j": "0:N"})
    t = st.add_tasklet("twice", ["x"], ["y"], "y = 2 * x")
    st.add_memlet_path(a, me, t, memlet=Memlet.simple("A", "i, j"), dst_conn="x")
    st.add_memlet_path(t, mx, b, memlet=Memlet.simple("B", "i, j"), src_conn="y")
    return s


def device_files(p):
    return [f for f in sorted(p.files) if f != "manifest.json" and f != p.host_file]


def test_c_type():
    assert [c_type(t) for t in (f32, f64, i32, i64)] == ["float", "double", "int", "long"]
    assert c_type(ElementType("f32", 4)) == "vec<float, 4>"


def test_unexpanded_library_node_is_rejected():
    with pytest.raises(CodegenError, match="not expanded"):
        generate(on_device(fixtures.build("axpydot")), "F")


def test_unknown_dialect():
    with pytest.raises(CodegenError, match="unknown dialect"):
        generate(scale2d(), "X")


def test_host_only_graph_is_rejected():
    s = scale2d()
    for d in s.containers.values():
        d.storage = StorageKind.HostDram
    with pytest.raises(CodegenError):
        generate(s, "F")


def test_perfect_nest_is_flattened():
    p = generate(scale2d(), "F")
    fn = parse_source(p.files[device_files(p)[0]]).function("compute")
    assert count_annotations(fn, "PIPELINE") == 1
    assert count_annotations(fn, "LOOP_FLATTEN") == 1
    assert check_pipeline_rule(fn) == []
    assert check_emitted(p) == []


@pytest.mark.parametrize("dialect", ["F", "K"])
def test_restrict_on_every_buffer(dialect):
    s, _, _ = prepared("axpydot", "func-dataflow" if dialect == "F" else "kernel-per-pe")
    p = generate(s, dialect)
    buffers = sum(1 for k in p.manifest["kernels"] for a in k["args"] if a["kind"] == "buffer")
    text = "".join(p.files[f] for f in device_files(p))
    if dialect == "F":
        # restrict only appears on the top-level function signature
        top = [ln for ln in text.splitlines() if ln.startswith("void axpydot(")][0]
        assert top.count("restrict") == buffers
    else:
        assert text.count("restrict") == buffers


def test_argless_kernels_autorun():
    p = generate(fixtures.diamond(16, 1, "kernel-per-pe"), "K")
    ks = {k["name"]: k for k in p.manifest["kernels"]}
    for k in ks.values():
        assert k["autorun"] == (k["args"] == [])
    assert sum(k["autorun"] for k in ks.values()) == 3
    host = p.files[p.host_file]
    launched = re.findall(r"launch\((\w+)", host)
    assert sorted(launched) == sorted(n for n, k in ks.items() if not k["autorun"])
    assert check_emitted(p) == []


@pytest.mark.parametrize("dialect", ["F", "K"])
def test_generation_is_deterministic(dialect):
    target = "func-dataflow" if dialect == "F" else "kernel-per-pe"
    a = generate(expand_all(on_device(fixtures.build("gemver")), target), dialect)
    b = generate(expand_all(on_device(fixtures.build("gemver")), target), dialect)
    assert a.files == b.files


def test_write(tmp_path):
    p = generate(scale2d(), "K")
    paths = p.write(tmp_path / "out")
    assert sorted(x.name for x in paths) == sorted(p.files)
    for x in paths:
        assert x.read_text() == p.files[x.name]


def test_parse_error_has_location():
    with pytest.raises(EmitSyntaxError) as info:
        parse_source("void f(int n) {\n  int x = ;\n}\n")
    assert (info.value.line, info.value.col) == (2, 11)


def test_corrupted_file_is_reported_with_location():
    p = generate(scale2d(), "F")
    name = device_files(p)[0]
    lines = p.files[name].splitlines(keepends=True)
    lines[2] = lines[2].replace("(", "((", 1)
    bad = EmittedProgram(p.name, p.dialect, {**p.files, name: "".join(lines)})
    diags = check_emitted(bad)
    assert diags
    d = diags[0]
    assert d.severity == "error" and d.file == name and d.line == 3 and d.col is not None
    assert str(d).startswith(f"{name}:3:")


def test_manifest_mismatch_is_reported():
    p = generate(fixtures.diamond(16, 1, "kernel-per-pe"), "K")
    files = dict(p.files)
    files["manifest.json"] = files["manifest.json"].replace('"depth": 36', '"depth": 35')
    assert files["manifest.json"] != p.files["manifest.json"]
    assert check_emitted(EmittedProgram(p.name, p.dialect, files))


def test_missing_manifest():
    p = generate(scale2d(), "F")
    files = {k: v for k, v in p.files.items() if k != "manifest.json"}
    assert [d.rule for d in check_emitted(EmittedProgram(p.name, p.dialect, files))] == ["manifest"]
