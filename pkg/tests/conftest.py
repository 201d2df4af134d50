"""Session hooks.

Every ``Sdfg`` constructed or copied while a test runs is recorded and, at
teardown, checked to survive ``save``/``load`` unchanged.
"""

from pathlib import Path

import pytest

from dfhls.ir import Sdfg, load, save, to_dict

_produced = []


@pytest.fixture
def golden_dir():
    return Path(__file__).parent / "golden"


@pytest.fixture(autouse=True)
def roundtrip_every_graph(monkeypatch, request):
    init, copy = Sdfg.__init__, Sdfg.copy

    def tracked_init(self, *a, **kw):
        init(self, *a, **kw)
        _produced.append(self)

    def tracked_copy(self):
        out = copy(self)
        _produced.append(out)
        return out

    monkeypatch.setattr(Sdfg, "__init__", tracked_init)
    monkeypatch.setattr(Sdfg, "copy", tracked_copy)
    _produced.clear()
    yield
    monkeypatch.undo()
    graphs, _ = list(_produced), _produced.clear()
    if request.node.get_closest_marker("no_roundtrip"):
        return
    for s in graphs:
        doc = to_dict(s)
        assert to_dict(load(save(s))) == doc, f"graph '{s.name}' changed across save/load"


# per-criterion summary for test_acceptance.py --------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_makereport(item, call):
    m = item.get_closest_marker("criterion")
    if m is None or call.when == "teardown" and call.excinfo is None:
        return
    n, title = m.args
    ok, _ = _criteria.get(n, (True, title))
    if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
        ok = False
    _criteria[n] = (ok, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, title = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
