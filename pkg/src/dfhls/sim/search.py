"""Empirical FIFO sizing by repeated simulation."""

from __future__ import annotations

from typing import Dict, Mapping, Optional

from .engine import DeadlockReport, SimulationError, run_concurrent


class NoFeasibleDepth(SimulationError):
    pass


def _completes(s, st, inputs, binding, depths, step_limit) -> bool:
    return not isinstance(run_concurrent(s, st, inputs, binding, depth_override=depths, step_limit=step_limit), DeadlockReport)


def min_depths_search(s, st, inputs, binding: Optional[Mapping[str, int]] = None, max_depth: int = 64, step_limit: int = 10**7) -> Dict[str, int]:
    """Per-stream minimal capacities such that ``run_concurrent`` completes.

    Starts with every stream at ``max_depth`` and lowers one stream at a time
    by binary search while keeping the others fixed. Kahn-network
    monotonicity makes each one-dimensional search valid.
    """
    if isinstance(st, str):
        st = s.states[st]
    names = sorted({an.data for an in st.access_nodes() if s.containers[an.data].is_stream})
    depths = {n: max_depth for n in names}
    if not _completes(s, st, inputs, binding, depths, step_limit):
        raise NoFeasibleDepth(f"simulation does not complete with every depth at {max_depth}")
    for n in names:
        lo, hi = 1, depths[n]
        while lo < hi:
            mid = (lo + hi) // 2
            trial = dict(depths)
            trial[n] = mid
            if _completes(s, st, inputs, binding, trial, step_limit):
                hi = mid
            else:
                lo = mid + 1
        depths[n] = lo
    return depths
