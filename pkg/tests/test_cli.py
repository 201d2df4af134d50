import json
import subprocess
import sys

import pytest

from dfhls.cli import main
from dfhls.ir import Sdfg, StorageKind, save

from test_stencilfront import three_way


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    doc = json.loads(out)
    assert doc["schema"] == "dfhls-cli" and doc["version"] == 1 and doc["exit_code"] == code
    assert doc["command"] == str(argv[0])
    return code, doc


@pytest.fixture
def axpydot(tmp_path, capsys):
    code, doc = run_json(capsys, "fixture", "axpydot", "-o", tmp_path / "g")
    assert code == 0
    return doc["graph"]


def broken_graph(path):
    s = Sdfg("broken")
    # external containers must live in DRAM
    s.add_array("A", [4], storage=StorageKind.OnChipLocal)
    s.add_state("s", is_start=True)
    save(s, path)
    return path


def test_fixture_and_validate(capsys, axpydot):
    code, out, _ = run(capsys, "validate", axpydot)
    assert code == 0 and out.strip() == "ok"


def test_validate_reports_errors(capsys, tmp_path):
    code, doc = run_json(capsys, "validate", broken_graph(tmp_path / "b.json"))
    assert code == 1
    assert any(d["severity"] == "error" for d in doc["diagnostics"])


@pytest.mark.parametrize(
    "argv",
    [
        ["validate", "/nonexistent/graph.json"],
        ["frobnicate"],
        ["fixture", "nope", "-o", "{tmp}"],
        ["auto", "{graph}", "-W", "0", "-o", "{tmp}"],
        ["transform", "{graph}", "--pass", "no-such-pass", "-o", "{tmp}"],
        ["analyze", "{graph}", "--bind", "N"],
        ["simulate", "{graph}", "--depth", "x=1"],
        ["auto", "{graph}"],
    ],
)
def test_usage_errors(capsys, tmp_path, axpydot, argv):
    argv = [a.format(tmp=tmp_path / "o", graph=axpydot) for a in argv]
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert err.startswith("dfhls: usage error:")


def test_bad_schema_is_a_usage_error(capsys, tmp_path):
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"format": "something-else", "version": 1}))
    assert run(capsys, "validate", p)[0] == 2
    p.write_text("{not json")
    assert run(capsys, "validate", p)[0] == 2


def test_auto_pipeline(capsys, tmp_path, axpydot):
    out = tmp_path / "out"
    code, doc = run_json(capsys, "auto", axpydot, "--target", "func-dataflow", "-W", "16", "-o", out)
    assert code == 0
    (names,) = doc["components"].values()
    assert len(names) == 5
    passes = json.loads((out / "passes.json").read_text())
    assert passes["components"] == doc["components"]
    assert [r["pass"] for r in passes["reports"]][:2] == ["fpga-transform", "vectorize"]
    assert (out / "auto.json").exists()


def test_expand_and_transform(capsys, tmp_path, axpydot):
    code, doc = run_json(capsys, "expand", axpydot, "--target", "kernel-per-pe", "-o", tmp_path / "e")
    assert code == 0 and {x["kind"] for x in doc["expansions"]} >= {"Axpy", "Dot"}
    code, doc = run_json(capsys, "transform", axpydot, "--pass", "fpga-transform", "-o", tmp_path / "t")
    assert code == 0 and doc["reports"][0]["pass"] == "fpga-transform"


def test_analyze_gemver(capsys, tmp_path):
    run(capsys, "fixture", "gemver", "-o", tmp_path)
    out = tmp_path / "vol"
    code, doc = run_json(capsys, "analyze", tmp_path / "gemver.sdfg.json", "--bind", "N=16384", "-o", out)
    assert code == 0
    assert (out / "volume.csv").read_text().splitlines()[0] == "container,storage,read_bytes,write_bytes"
    assert (out / "volume.png").stat().st_size > 0
    assert doc["volume"]["total_value"] == 6 * 4 * 16384**2 + 44 * 16384


def test_analyze_needs_bindings_for_numbers(capsys, tmp_path):
    run(capsys, "fixture", "gemver", "-o", tmp_path)
    code, doc = run_json(capsys, "analyze", tmp_path / "gemver.sdfg.json")
    assert code == 0 and doc["volume"]["total_value"] is None
    assert doc["volume"]["total_bytes"] == "24*N*N + 44*N"


def test_simulate(capsys, tmp_path, axpydot):
    code, ref = run_json(capsys, "simulate", axpydot, "--bind", "N=64", "--bind", "a=2", "--seed", "3")
    assert code == 0
    code, conc = run_json(capsys, "simulate", axpydot, "--bind", "N=64", "--bind", "a=2", "--seed", "3", "--mode", "concurrent", "-o", tmp_path / "s")
    assert code == 0
    assert conc["outputs"].keys() == ref["outputs"].keys()
    for k in ref["outputs"]:
        assert conc["outputs"][k]["sum"] == pytest.approx(ref["outputs"][k]["sum"], rel=1e-5)
    assert (tmp_path / "s" / "fifos.csv").exists()


def test_simulate_deadlock_exit_code(capsys, tmp_path):
    prog = tmp_path / "p.json"
    prog.write_text(json.dumps(three_way(16, 1)))
    code, doc = run_json(capsys, "stencil", prog, "--zero-delays", "--expand", "--target", "func-dataflow", "-o", tmp_path)
    assert code == 0
    code, doc = run_json(capsys, "simulate", doc["graph"], "--mode", "concurrent")
    assert code == 1
    assert doc["deadlock"]["cycle"]


@pytest.mark.parametrize("dialect", ["F", "K"])
def test_codegen(capsys, tmp_path, axpydot, dialect):
    target = "func-dataflow" if dialect == "F" else "kernel-per-pe"
    run(capsys, "transform", axpydot, "--pass", "fpga-transform", "-o", tmp_path / "d")
    assert run(capsys, "expand", tmp_path / "d" / "axpydot.sdfg.json", "--target", target, "-o", tmp_path / "e")[0] == 0
    code, doc = run_json(capsys, "codegen", tmp_path / "e" / "axpydot.sdfg.json", "--target", target, "-o", tmp_path / "c")
    assert code == 0 and doc["dialect"] == dialect and doc["diagnostics"] == []
    assert (tmp_path / "c" / "manifest.json").exists()


def test_codegen_unexpanded_fails(capsys, tmp_path, axpydot):
    run(capsys, "transform", axpydot, "--pass", "fpga-transform", "-o", tmp_path / "d")
    code, _, err = run(capsys, "codegen", tmp_path / "d" / "axpydot.sdfg.json", "-o", tmp_path / "c")
    assert code == 1 and "not expanded" in err


def test_stencil(capsys, tmp_path):
    prog = tmp_path / "p.json"
    prog.write_text(json.dumps(three_way(16, 2)))
    code, doc = run_json(capsys, "stencil", prog, "--expand", "--target", "func-dataflow", "-o", tmp_path / "s")
    assert code == 0
    delays = {(d["producer"], d["consumer"]): d["delay"] for d in doc["delays"]}
    assert delays[("p0", "join")] == 64 and delays[("p2", "join")] == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dimensions": [4]}))
    assert run(capsys, "stencil", bad, "-o", tmp_path / "x")[0] == 1


def test_reruns_are_byte_identical(capsys, tmp_path, axpydot):
    def once(d):
        run(capsys, "auto", axpydot, "-W", "4", "-o", d)
        g = d / "axpydot.sdfg.json"
        run(capsys, "analyze", g, "--bind", "N=1024", "--bind", "a=2", "-o", d)
        run(capsys, "simulate", g, "--bind", "N=64", "--bind", "a=2", "--mode", "concurrent", "-o", d)
        run(capsys, "codegen", g, "-o", d / "src")
        return {p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}

    a, b = once(tmp_path / "a"), once(tmp_path / "b")
    assert a.keys() == b.keys() and len(a) > 5
    for k in a:
        if k.suffix == ".json":
            # JSON reports name their own output directory
            assert a[k].replace(b"/a/", b"/b/") == b[k], k
        else:
            assert a[k] == b[k], k


def test_console_script(tmp_path):
    r = subprocess.run([sys.executable, "-m", "dfhls.cli", "fixture", "dot", "-o", str(tmp_path), "--json"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["command"] == "fixture"
