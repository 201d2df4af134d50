"""Reference interpreter and bounded-FIFO concurrent simulator.

Both engines share one execution core: every processing element is a Python
generator that yields ``("pop", key)`` or ``("push", key, value)`` requests to
a scheduler. The reference engine uses unbounded queues and lets each PE run
until it blocks; the concurrent engine uses bounded queues and advances PEs
round-robin, one stream operation per turn.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from ..analysis import PeInstance, processing_elements
from ..ir.core import (
    AccessNode,
    DataDescriptor,
    Edge,
    LibraryNode,
    MapEntry,
    NestedSdfg,
    Sdfg,
    State,
    Tasklet,
)
from ..ir.tasklang import parse_tasklet
from ..ir.validate import parse_condition
from ..symbolic import compile_expr, evaluate

DEFAULT_STEP_LIMIT = 10**8


class SimulationError(RuntimeError):
    pass


class StepLimitExceeded(SimulationError):
    pass


# storage -------------------------------------------------------------------


class Fifo:
    __slots__ = ("items", "capacity", "pushes", "pops", "peak")

    def __init__(self, capacity: Optional[int]):
        self.items = deque()
        self.capacity = capacity
        self.pushes = 0
        self.pops = 0
        self.peak = 0

    def full(self) -> bool:
        return self.capacity is not None and len(self.items) >= self.capacity


def _shape(desc: DataDescriptor, env) -> Tuple[int, ...]:
    return tuple(evaluate(x, env) for x in desc.shape)


def _storage_shape(desc: DataDescriptor, env) -> Tuple[int, ...]:
    shp = _shape(desc, env)
    return shp + ((desc.element.width,) if desc.element.is_vector else ())


def to_scalar_layout(desc: DataDescriptor, arr: np.ndarray) -> np.ndarray:
    """Flatten the trailing vector axis into the innermost dimension."""
    if not desc.element.is_vector:
        return arr
    if arr.ndim == 1:
        return arr.reshape(-1)
    return arr.reshape(arr.shape[:-2] + (arr.shape[-2] * arr.shape[-1],))


def from_scalar_layout(desc: DataDescriptor, arr, env) -> np.ndarray:
    shp = _storage_shape(desc, env)
    a = np.asarray(arr, dtype=desc.element.dtype)
    if a.size != int(np.prod(shp, dtype=np.int64)):
        raise SimulationError(f"input '{desc.name}' has {a.size} elements, expected shape {shp}")
    return a.reshape(shp).copy()


class Memory:
    """Arrays plus stream queues for one SDFG execution."""

    def __init__(self, s: Sdfg, env, inputs: Mapping[str, Any], capacities: Optional[Mapping[str, int]], bounded: bool):
        self.sdfg = s
        self.arrays: Dict[str, np.ndarray] = {}
        self.fifos: Dict[Tuple[str, int], Fifo] = {}
        self.bounded = bounded
        self.capacities = dict(capacities or {})
        for name, desc in s.containers.items():
            if desc.is_stream:
                continue
            if name in inputs:
                self.arrays[name] = from_scalar_layout(desc, inputs[name], env)
            else:
                self.arrays[name] = np.zeros(_storage_shape(desc, env), dtype=desc.element.dtype)

    def fifo(self, key) -> Fifo:
        f = self.fifos.get(key)
        if f is None:
            name = key[0]
            cap = None
            if self.bounded:
                cap = self.capacities.get(f"{name}[{key[1]}]", self.capacities.get(name, self.sdfg.containers[name].capacity))
                if cap is None or cap < 1:
                    raise SimulationError(f"stream '{name}' needs capacity >= 1 (got {cap})")
            f = self.fifos[key] = Fifo(cap)
        return f


# trace ---------------------------------------------------------------------


@dataclass
class PeTrace:
    name: str
    events: List[Tuple[str, str, int]] = field(default_factory=list)
    status: str = "completed"

    def record(self, kind: str, what: str, count: int = 1):
        if self.events and self.events[-1][0] == kind and self.events[-1][1] == what:
            k, w, c = self.events[-1]
            self.events[-1] = (k, w, c + count)
        else:
            self.events.append((kind, what, count))

    def lines(self) -> List[str]:
        return [f"{self.name} {k} {w} {c}" for k, w, c in self.events] + [f"{self.name} status {self.status}"]

    def totals(self, kind: str) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for k, w, c in self.events:
            if k == kind:
                out[w] = out.get(w, 0) + c
        return out


@dataclass
class DeadlockReport:
    blocked: Dict[str, Tuple[str, str]]  # PE -> (push-on-full | pop-on-empty, stream)
    cycle: List[str]
    traces: List[PeTrace]
    occupancy: Dict[str, int]

    def __str__(self):
        lines = ["deadlock: every unfinished processing element is blocked"]
        for pe, (op, stream) in sorted(self.blocked.items()):
            lines.append(f"  {pe}: {op} {stream}")
        if self.cycle:
            lines.append("  cycle: " + " -> ".join(self.cycle + [self.cycle[0]]))
        return "\n".join(lines)


@dataclass
class ConcurrentResult:
    outputs: Dict[str, np.ndarray]
    traces: List[PeTrace]
    occupancy: Dict[str, int]
    peaks: Dict[str, int]
    steps: int

    def pushes(self, stream_key: str) -> int:
        return sum(t.totals("push").get(stream_key, 0) for t in self.traces)

    def pops(self, stream_key: str) -> int:
        return sum(t.totals("pop").get(stream_key, 0) for t in self.traces)

    def trace_lines(self) -> List[str]:
        return [ln for t in self.traces for ln in t.lines()]


def stream_label(key) -> str:
    name, idx = key
    return name if idx == -1 else f"{name}[{idx}]"


# compiled access helpers ---------------------------------------------------


class _Access:
    """A memlet endpoint compiled for fast evaluation."""

    __slots__ = ("data", "is_stream", "dynamic", "wcr", "point", "fns", "vol", "desc", "conn", "pts")

    def __init__(self, s: Sdfg, e: Edge, conn: Optional[str]):
        m = e.memlet
        self.conn = conn
        self.data = m.data
        self.desc = s.containers[m.data]
        self.is_stream = self.desc.is_stream
        self.dynamic = m.dynamic
        self.wcr = m.wcr
        self.point = all(r.begin == r.end for r in m.subset)
        self.fns = [(compile_expr(r.begin), compile_expr(r.end), compile_expr(r.stride)) for r in m.subset]
        self.pts = [r.begin == r.end for r in m.subset]
        self.vol = compile_expr(m.volume)

    def index(self, env):
        if self.point:
            return tuple(b(env) for b, _, _ in self.fns)
        return tuple(b(env) if pt else slice(b(env), e(env) + 1, s(env)) for (b, e, s), pt in zip(self.fns, self.pts))

    def key(self, env, shape_cache):
        """Queue key for a stream endpoint (point subsets only)."""
        if not self.fns:
            return (self.data, -1)
        idx = [b(env) for b, _, _ in self.fns]
        shp = shape_cache[self.data]
        flat = 0
        for i, n in zip(idx, shp):
            if i < 0 or i >= n:
                raise SimulationError(f"stream index {idx} out of bounds for '{self.data}' of shape {shp}")
            flat = flat * n + i
        return (self.data, flat)

    def keys(self, env, shape_cache):
        """All queue keys addressed by a (possibly ranged) stream subset."""
        if not self.fns:
            return [(self.data, -1)]
        shp = shape_cache[self.data]
        ranges = [range(b(env), e(env) + 1, s(env)) for b, e, s in self.fns]
        out = []
        for idx in itertools.product(*ranges):
            flat = 0
            for i, n in zip(idx, shp):
                flat = flat * n + i
            out.append((self.data, flat))
        return out


_WCR = {"sum": lambda a, b: a + b, "min": np.minimum, "max": np.maximum}


class _NeedPop(Exception):
    def __init__(self, conn):
        self.conn = conn


class _LazyInputs:
    __slots__ = ("values", "pending")

    def __init__(self, values, pending):
        self.values = values
        self.pending = pending

    def __contains__(self, name):
        return name in self.values or name in self.pending

    def __getitem__(self, name):
        if name in self.values:
            return self.values[name]
        raise _NeedPop(name)


# executor ------------------------------------------------------------------


class _Executor:
    def __init__(self, s: Sdfg, st: State, mem: Memory, env: Dict[str, int], counter, library_exec):
        self.s = s
        self.st = st
        self.mem = mem
        self.env = env
        self.counter = counter
        self.library_exec = library_exec
        self.children = st.scope_children()
        self.shapes = {n: _shape(d, env) for n, d in s.containers.items() if d.is_stream}
        self._compiled: Dict[int, Any] = {}

    # tasklets
    def _compile_tasklet(self, t: Tasklet):
        ins, outs = [], {}
        for e in self.st.in_edges(t):
            if e.memlet.is_empty:
                continue
            ins.append(_Access(self.s, e, e.dst_conn))
        for e in self.st.out_edges(t):
            if e.memlet.is_empty:
                continue
            outs.setdefault(e.src_conn, []).append(_Access(self.s, e, e.src_conn))
        prog = parse_tasklet(t.code)
        tables = {k: np.asarray(v) for k, v in t.tables.items()}
        return ins, outs, prog, tables

    def run_tasklet(self, t: Tasklet, env) -> Iterator:
        c = self._compiled.get(t.id)
        if c is None:
            c = self._compiled[t.id] = self._compile_tasklet(t)
        ins, outs, prog, tables = c
        values, pending = {}, {}
        for a in ins:
            if a.is_stream:
                key = a.key(env, self.shapes)
                if a.dynamic:
                    pending[a.conn] = key
                else:
                    values[a.conn] = yield ("pop", key)
            else:
                values[a.conn] = self._read(a, env)
        if tables:
            env = {**env, **tables}
        while True:
            try:
                result = prog.run(_LazyInputs(values, pending), env)
                break
            except _NeedPop as need:
                if need.conn not in pending:
                    raise
                values[need.conn] = yield ("pop", pending.pop(need.conn))
        self.counter[0] += 1
        for conn, accs in outs.items():
            if conn not in result:
                continue
            v = result[conn]
            for a in accs:
                if a.is_stream:
                    yield ("push", a.key(env, self.shapes), _cast(a.desc, v))
                else:
                    self._write(a, env, v)

    def _read(self, a: _Access, env):
        arr = self.mem.arrays[a.data]
        try:
            v = arr[a.index(env)]
        except IndexError as exc:
            raise SimulationError(f"out-of-bounds read of '{a.data}': {exc}") from None
        if isinstance(v, np.ndarray):
            return v.copy()
        return v

    def _write(self, a: _Access, env, v):
        arr = self.mem.arrays[a.data]
        idx = a.index(env)
        try:
            if a.wcr is not None:
                arr[idx] = _WCR[a.wcr](arr[idx], v)
            else:
                arr[idx] = v
        except IndexError as exc:
            raise SimulationError(f"out-of-bounds write to '{a.data}': {exc}") from None

    # access nodes: copies between containers
    def run_access(self, n: AccessNode, env) -> Iterator:
        for e in self.st.in_edges(n):
            src = self.st.nodes[e.src]
            if not isinstance(src, AccessNode) or e.memlet.is_empty:
                continue
            yield from self._copy(src, n, e, env)

    def _copy(self, src: AccessNode, dst: AccessNode, e: Edge, env):
        sd, dd = self.s.containers[src.data], self.s.containers[dst.data]
        m = e.memlet
        acc = _Access(self.s, e, None)
        if not sd.is_stream and not dd.is_stream:
            if sd.element.width != dd.element.width:
                # host and device layouts of one vectorized array
                self.mem.arrays[dst.data].reshape(-1)[:] = self.mem.arrays[src.data].reshape(-1)
                self.counter[0] += 1
                return
            idx = acc.index(env)
            self.mem.arrays[dst.data][idx] = self.mem.arrays[src.data][idx]
            self.counter[0] += 1
            return
        vol = acc.vol(env)
        if sd.is_stream and not dd.is_stream:
            key = (src.data, -1) if not sd.shape else acc.key(env, self.shapes) if m.data == src.data else (src.data, 0)
            vals = []
            for _ in range(vol):
                vals.append((yield ("pop", key)))
            out = self.mem.arrays[dst.data]
            flat = out.reshape((-1,) + ((dd.element.width,) if dd.element.is_vector else ()))
            flat[: len(vals)] = vals
        elif not sd.is_stream and dd.is_stream:
            key = (dst.data, -1) if not dd.shape else acc.key(env, self.shapes) if m.data == dst.data else (dst.data, 0)
            arr = self.mem.arrays[src.data]
            flat = arr.reshape((-1,) + ((sd.element.width,) if sd.element.is_vector else ()))
            for i in range(vol):
                yield ("push", key, _cast(dd, flat[i]))
        else:
            raise SimulationError(f"stream-to-stream copy '{src.data}' -> '{dst.data}' is not supported")

    # library and nested nodes
    def run_library(self, n: LibraryNode, env) -> Iterator:
        inputs = {}
        for e in self.st.in_edges(n):
            if e.memlet.is_empty:
                continue
            a = _Access(self.s, e, e.dst_conn)
            if a.is_stream:
                key = a.key(env, self.shapes)
                vals = []
                for _ in range(a.vol(env)):
                    vals.append((yield ("pop", key)))
                inputs[e.dst_conn] = np.array(vals, dtype=a.desc.element.dtype)
            else:
                inputs[e.dst_conn] = to_scalar_layout(a.desc, np.array(self.mem.arrays[a.data][a.index(env)]))
        outputs = self.library_exec(self.s, n, inputs, env)
        self.counter[0] += 1
        for e in self.st.out_edges(n):
            if e.memlet.is_empty:
                continue
            a = _Access(self.s, e, e.src_conn)
            val = np.asarray(outputs[e.src_conn])
            if a.is_stream:
                key = a.key(env, self.shapes)
                w = a.desc.element.width
                flat = val.reshape((-1, w)) if a.desc.element.is_vector else val.reshape(-1)
                for v in flat:
                    yield ("push", key, _cast(a.desc, v))
            else:
                target = self.mem.arrays[a.data]
                idx = a.index(env)
                shape = np.shape(target[idx])
                target[idx] = val.reshape(shape) if val.size == int(np.prod(shape, dtype=np.int64)) else val

    def run_nested(self, n: NestedSdfg, env) -> Iterator:
        inner_env = dict(env)
        for k, v in n.symbol_mapping.items():
            inner_env[k] = evaluate(v, env)
        inputs = {}
        for e in self.st.in_edges(n):
            if e.memlet.is_empty:
                continue
            a = _Access(self.s, e, e.dst_conn)
            if a.is_stream:
                raise SimulationError("streams cannot cross nested SDFG boundaries")
            inputs[e.dst_conn] = to_scalar_layout(a.desc, np.array(self.mem.arrays[a.data][a.index(env)]))
        result = run_reference(n.sdfg, inputs, inner_env, _library_exec=self.library_exec)
        self.counter[0] += 1
        for e in self.st.out_edges(n):
            if e.memlet.is_empty:
                continue
            a = _Access(self.s, e, e.src_conn)
            target = self.mem.arrays[a.data]
            idx = a.index(env)
            inner_desc = n.sdfg.containers[e.src_conn]
            val = from_scalar_layout(inner_desc, result[e.src_conn], inner_env)
            target[idx] = val.reshape(np.shape(target[idx]))
        return
        yield  # pragma: no cover

    # scopes
    def run_nodes(self, nids, env, members) -> Iterator:
        for nid in nids:
            if members is not None and nid not in members:
                continue
            n = self.st.nodes[nid]
            if isinstance(n, Tasklet):
                yield from self.run_tasklet(n, env)
            elif isinstance(n, MapEntry):
                yield from self.run_map(n, env, members)
            elif isinstance(n, AccessNode):
                yield from self.run_access(n, env)
            elif isinstance(n, LibraryNode):
                yield from self.run_library(n, env)
            elif isinstance(n, NestedSdfg):
                yield from self.run_nested(n, env)

    def map_points(self, entry: MapEntry, env):
        fns = self._compiled.get(entry.id)
        if fns is None:
            fns = self._compiled[entry.id] = [(compile_expr(r.begin), compile_expr(r.end), compile_expr(r.stride)) for r in entry.ranges]
        ranges = []
        for b, e, s in fns:
            step = s(env)
            if step == 0:
                raise SimulationError(f"map '{entry.label}' has a zero stride")
            ranges.append(range(b(env), e(env) + 1, step))
        return itertools.product(*ranges)

    def run_map(self, entry: MapEntry, env, members, fixed=None) -> Iterator:
        body = self.children.get(entry.id, [])
        for vals in self.map_points(entry, env):
            inner = dict(env)
            inner.update(zip(entry.params, vals))
            if fixed is not None and any(inner[k] != v for k, v in fixed.items()):
                continue
            yield from self.run_nodes(body, inner, members)

    def run_pe(self, pe: Optional[PeInstance]) -> Iterator:
        members = set(pe.component.nodes) if pe is not None else None
        top = self.children.get(None, [])
        if pe is not None and pe.bindings:
            entry = self.st.nodes[pe.component.unrolled]
            for nid in top:
                if nid not in members:
                    continue
                n = self.st.nodes[nid]
                if n is entry:
                    yield from self.run_map(entry, self.env, members, fixed=pe.bindings)
                elif isinstance(n, AccessNode):
                    yield from self.run_access(n, self.env)
            return
        yield from self.run_nodes(top, self.env, members)


def _cast(desc: DataDescriptor, v):
    if desc.element.is_vector:
        return np.array(v, dtype=desc.element.dtype).reshape(desc.element.width)
    return desc.element.dtype(v)


# scheduling ----------------------------------------------------------------


def _schedule(mem: Memory, pes: List[Tuple[str, Iterator]], greedy: bool, step_limit: int, counter, static_roles):
    traces = [PeTrace(name) for name, _ in pes]
    gens = [g for _, g in pes]
    pending: List[Any] = [None] * len(gens)
    done = [False] * len(gens)
    last_push: Dict[Any, int] = {}
    last_pop: Dict[Any, int] = {}

    def advance(i, value):
        try:
            pending[i] = gens[i].send(value)
        except StopIteration:
            done[i] = True
            pending[i] = None

    for i in range(len(gens)):
        advance(i, None)

    def try_op(i) -> bool:
        req = pending[i]
        if req[0] == "pop":
            f = mem.fifo(req[1])
            if not f.items:
                return False
            v = f.items.popleft()
            f.pops += 1
            last_pop[req[1]] = i
            traces[i].record("pop", stream_label(req[1]))
            counter[0] += 1
            advance(i, v)
            return True
        f = mem.fifo(req[1])
        if f.full():
            return False
        f.items.append(req[2])
        f.pushes += 1
        f.peak = max(f.peak, len(f.items))
        last_push[req[1]] = i
        traces[i].record("push", stream_label(req[1]))
        counter[0] += 1
        advance(i, None)
        return True

    while not all(done):
        progress = False
        for i in range(len(gens)):
            if done[i]:
                continue
            if greedy:
                while not done[i] and try_op(i):
                    progress = True
                    if counter[0] > step_limit:
                        break
            elif try_op(i):
                progress = True
            if counter[0] > step_limit:
                raise StepLimitExceeded(f"step limit {step_limit} exceeded")
        if not progress:
            blocked = {}
            for i in range(len(gens)):
                if done[i]:
                    continue
                op = "pop-on-empty" if pending[i][0] == "pop" else "push-on-full"
                blocked[i] = (op, pending[i][1])
                traces[i].status = "blocked"
            return traces, blocked, _wait_cycle(blocked, static_roles, last_push, last_pop, [n for n, _ in pes])
    return traces, None, None


def _wait_cycle(blocked, static_roles, last_push, last_pop, names):
    """Find a cycle in the wait-for graph among blocked PEs."""
    producers, consumers = static_roles

    def waits_on(i):
        op, key = blocked[i]
        if op == "pop-on-empty":
            cands = producers.get(key, set()) | ({last_push[key]} if key in last_push else set())
        else:
            cands = consumers.get(key, set()) | ({last_pop[key]} if key in last_pop else set())
        return sorted(c for c in cands if c in blocked and c != i)

    for start in sorted(blocked):
        path, seen = [start], {start: 0}
        cur = start
        while True:
            nxt = waits_on(cur)
            if not nxt:
                break
            cur = nxt[0]
            if cur in seen:
                cyc = path[seen[cur]:]
                return [f"{names[i]} ({blocked[i][0]} {stream_label(blocked[i][1])})" for i in cyc]
            seen[cur] = len(path)
            path.append(cur)
    return []


def _static_roles(s: Sdfg, st: State, pes: List[PeInstance], env, shapes):
    producers: Dict[Any, set] = {}
    consumers: Dict[Any, set] = {}
    for i, pe in enumerate(pes):
        penv = {**env, **pe.bindings}
        for nid in pe.component.nodes:
            for e in st.out_edges(nid) + st.in_edges(nid):
                m = e.memlet
                if m.is_empty or m.data not in s.containers or not s.containers[m.data].is_stream:
                    continue
                src, dst = st.nodes[e.src], st.nodes[e.dst]
                if isinstance(dst, AccessNode) and dst.data == m.data:
                    table = producers
                elif isinstance(src, AccessNode) and src.data == m.data:
                    table = consumers
                else:
                    continue
                try:
                    keys = _Access(s, e, None).keys(penv, shapes)
                except Exception:
                    continue
                if pe.bindings:
                    # only the slots touched by this replica's inner edges
                    inner = []
                    for ie in st.inner_edges(e):
                        try:
                            inner.append(_Access(s, ie, None).key({**penv, **_first_point(st, ie, penv)}, shapes))
                        except Exception:
                            pass
                    keys = inner or keys
                for k in keys:
                    table.setdefault(k, set()).add(i)
    return producers, consumers


def _first_point(st: State, e: Edge, env):
    out = {}
    node = e.dst if isinstance(st.nodes[e.dst], (Tasklet, LibraryNode)) else e.src
    for m in st.enclosing_maps(node):
        for p, r in zip(m.params, m.ranges):
            if p not in env:
                try:
                    out[p] = evaluate(r.begin, {**env, **out})
                except Exception:
                    pass
    return out


# public entry points ---------------------------------------------------------


def _default_library_exec(s, node, inputs, env):
    from ..library.reference import execute

    return execute(s, node, inputs, env)


def _env(s: Sdfg, binding: Optional[Mapping[str, int]]):
    env = dict(s.constants)
    env.update(binding or {})
    return env


def _outputs(s: Sdfg, mem: Memory, transients: bool = False) -> Dict[str, np.ndarray]:
    out = {}
    for name, desc in s.containers.items():
        if desc.is_stream or (desc.transient and not transients):
            continue
        out[name] = to_scalar_layout(desc, mem.arrays[name]).copy()
    return out


def run_state_reference(s: Sdfg, st: State, mem: Memory, env, counter, step_limit, library_exec):
    ex = _Executor(s, st, mem, env, counter, library_exec)
    pes = processing_elements(st, s, env, split=False)
    gens = [(pe.name, ex.run_pe(pe)) for pe in pes]
    traces, blocked, _ = _schedule(mem, gens, True, step_limit, counter, ({}, {}))
    if blocked:
        i, (op, key) = sorted(blocked.items())[0]
        raise SimulationError(f"pop from empty stream {stream_label(key)} in processing element '{pes[i].name}' (state '{st.name}')")
    return traces


def run_reference(
    s: Sdfg,
    inputs: Mapping[str, Any],
    binding: Optional[Mapping[str, int]] = None,
    step_limit: int = DEFAULT_STEP_LIMIT,
    _library_exec: Optional[Callable] = None,
    include_transients: bool = False,
) -> Dict[str, np.ndarray]:
    """Execute the whole SDFG sequentially and return all non-transient containers."""
    env = _env(s, binding)
    _check_bound(s, env)
    lib = _library_exec or _default_library_exec
    mem = Memory(s, env, inputs, None, bounded=False)
    counter = [0]
    cur = s.start_state
    transitions = 0
    while cur is not None:
        run_state_reference(s, s.states[cur], mem, env, counter, step_limit, lib)
        nxt = None
        for ie in s.out_interstate(cur):
            if ie.condition is None or _condition(ie.condition, env):
                new = {k: evaluate(v, env) for k, v in ie.assignments.items()}
                env.update(new)
                nxt = ie.dst
                break
        cur = nxt
        transitions += 1
        if transitions > 10**6:
            raise StepLimitExceeded("too many state transitions")
    return _outputs(s, mem, include_transients)


def _condition(text, env) -> bool:
    lhs, op, rhs = parse_condition(text)
    a, b = evaluate(lhs, env), evaluate(rhs, env)
    return {"==": a == b, "!=": a != b, "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]


def _check_bound(s: Sdfg, env):
    for name in s.symbols:
        if name not in env:
            from ..symbolic import UnboundSymbolError

            raise UnboundSymbolError(name)


def run_concurrent(
    s: Sdfg,
    st: Optional[State] = None,
    inputs: Mapping[str, Any] = None,
    binding: Optional[Mapping[str, int]] = None,
    depth_override: Optional[Mapping[str, int]] = None,
    step_limit: int = DEFAULT_STEP_LIMIT,
    default_depth: Optional[int] = None,
    _library_exec: Optional[Callable] = None,
    include_transients: bool = False,
):
    """Simulate one kernel state with bounded FIFOs.

    Returns a :class:`ConcurrentResult` or a :class:`DeadlockReport`.
    ``depth_override`` maps stream names (or ``name[i]`` for one slot of a
    stream array) to capacities; ``default_depth`` replaces every declared
    capacity not overridden.
    """
    if st is None:
        st = _kernel_state(s)
    elif isinstance(st, str):
        st = s.states[st]
    env = _env(s, binding)
    _check_bound(s, env)
    caps = {}
    if default_depth is not None:
        caps = {n: default_depth for n, d in s.containers.items() if d.is_stream}
    caps.update(depth_override or {})
    for k, v in caps.items():
        if v < 1:
            raise SimulationError(f"capacity of '{k}' must be >= 1")
    mem = Memory(s, env, inputs or {}, caps, bounded=True)
    counter = [0]
    lib = _library_exec or _default_library_exec
    ex = _Executor(s, st, mem, env, counter, lib)
    pes = processing_elements(st, s, env, split=True)
    gens = []
    for pe in pes:
        gens.append((pe.name, ex.run_pe(pe)))
    roles = _static_roles(s, st, pes, env, ex.shapes)
    traces, blocked, cycle = _schedule(mem, gens, False, step_limit, counter, roles)
    occupancy = {stream_label(k): len(f.items) for k, f in sorted(mem.fifos.items())}
    if blocked:
        return DeadlockReport({pes[i].name: (op, stream_label(key)) for i, (op, key) in blocked.items()}, cycle, traces, occupancy)
    peaks = {stream_label(k): f.peak for k, f in sorted(mem.fifos.items())}
    return ConcurrentResult(_outputs(s, mem, include_transients), traces, occupancy, peaks, counter[0])


def _kernel_state(s: Sdfg) -> State:
    from ..analysis import is_compute_state

    cands = [st for st in s.state_order() if is_compute_state(st)]
    if len(cands) != 1:
        raise SimulationError(f"expected exactly one computation state, found {len(cands)}; pass one explicitly")
    return cands[0]


def run_program_concurrent(s: Sdfg, inputs, binding=None, **kw):
    """Run copy states with the reference engine and every kernel state concurrently.

    Traces, peaks and step counts of several kernel states are concatenated
    in execution order.
    """
    from ..analysis import is_compute_state

    env = _env(s, binding)
    if not any(is_compute_state(st) for st in s.state_order()):
        raise SimulationError("program has no computation state")
    lib = kw.pop("_library_exec", None) or _default_library_exec
    state_inputs = dict(inputs)
    cur = s.start_state
    result = None
    while cur is not None:
        st = s.states[cur]
        if is_compute_state(st):
            r = run_concurrent(s, st, state_inputs, binding, _library_exec=lib, include_transients=True, **kw)
            if isinstance(r, DeadlockReport):
                return r
            state_inputs = {**state_inputs, **r.outputs}
            if result is None:
                result = r
            else:
                result.traces += r.traces
                result.occupancy.update(r.occupancy)
                for k, v in r.peaks.items():
                    result.peaks[k] = max(v, result.peaks.get(k, 0))
                result.steps += r.steps
        else:
            sub = _single_state(s, st)
            outs = run_reference(sub, state_inputs, binding, _library_exec=lib, include_transients=True)
            state_inputs = {**state_inputs, **outs}
        nxt = None
        for ie in s.out_interstate(cur):
            if ie.condition is None or _condition(ie.condition, env):
                env.update({k: evaluate(v, env) for k, v in ie.assignments.items()})
                nxt = ie.dst
                break
        cur = nxt
    result.outputs = {n: state_inputs[n] for n, d in s.containers.items() if not d.is_stream and not d.transient and n in state_inputs}
    return result


def _single_state(s: Sdfg, st: State) -> Sdfg:
    sub = Sdfg(s.name)
    sub.containers = s.containers
    sub.symbols = s.symbols
    sub.constants = s.constants
    sub.states = {st.name: st}
    sub.start_state = st.name
    return sub
