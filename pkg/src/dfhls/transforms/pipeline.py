"""The fixed automatic transformation sequence."""

from __future__ import annotations

from typing import List, Optional, Tuple

from ..ir.core import Sdfg
from ..library import ExpansionLog, expand_all
from .base import PassError, PassReport
from .fpga import fpga_transform
from .streaming import streaming_composition, streaming_memory
from .vectorize import vectorize_all


class PipelineError(PassError):
    """A pass failed; ``reports`` holds everything applied before it."""

    def __init__(self, message: str, reports: List[PassReport], sdfg: Sdfg):
        super().__init__(message)
        self.reports = reports
        self.sdfg = sdfg


def auto_pipeline(s: Sdfg, target=None, W: int = 1, overrides=None) -> Tuple[Sdfg, List[PassReport]]:
    """fpga_transform, vectorize, expansion, streaming_memory, streaming_composition."""
    reports: List[PassReport] = []
    cur = s
    steps = [
        ("fpga_transform", lambda g: fpga_transform(g)),
        ("vectorize", lambda g: vectorize_all(g, W)),
        ("expand", lambda g: _expand(g, target, overrides)),
        ("streaming_memory", lambda g: streaming_memory(g)),
        ("streaming_composition", lambda g: streaming_composition(g)),
    ]
    for name, step in steps:
        try:
            cur, rep = step(cur)
        except Exception as exc:
            raise PipelineError(f"{name} failed: {exc}", reports, cur) from exc
        reports.append(rep)
    return cur, reports


def _expand(s: Sdfg, target, overrides) -> Tuple[Sdfg, PassReport]:
    log = ExpansionLog()
    out = expand_all(s, target, overrides, log)
    if not log.steps:
        return out, PassReport("expand", False, reason="no library nodes")
    sites = [(st, f"{label}:{exp}") for st, label, _, exp in log.steps]
    return out, PassReport("expand", True, sites)


def run_passes(s: Sdfg, names: List[str], options: Optional[dict] = None) -> Tuple[Sdfg, List[PassReport]]:
    """Apply CLI-named passes in order."""
    from . import PASSES

    options = dict(options or {})
    reports = []
    for n in names:
        if n not in PASSES:
            raise PassError(f"unknown pass '{n}' (known: {', '.join(sorted(PASSES))})")
        s, rep = PASSES[n](s, **options.get(n, {}))
        reports.append(rep)
    return s, reports
