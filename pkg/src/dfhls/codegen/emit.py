"""Lowering of expanded device kernels to structured C-like source text."""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from ..analysis import Component, _top_unrolled, connected_components, is_compute_state, processing_elements
from ..ir.core import (
    AccessNode,
    DataDescriptor,
    ElementType,
    LibraryNode,
    MapEntry,
    MapExit,
    Memlet,
    NestedSdfg,
    Schedule,
    Sdfg,
    State,
    Tasklet,
)
from ..ir.tasklang import to_c_statements
from ..ir.validate import errors, is_device_kernel_state, validate
from ..symbolic import SymExpr, as_expr, product

DIALECTS = ("F", "K")
MANIFEST_VERSION = 1
C_TYPES = {"f32": "float", "f64": "double", "i32": "int", "i64": "long"}
_ROLE_ORDER = {"reader": 0, "compute": 1, "unknown": 1, "writer": 2}


class CodegenError(Exception):
    pass


@dataclass
class EmittedProgram:
    name: str
    dialect: str
    files: Dict[str, str]

    @property
    def manifest(self) -> dict:
        return json.loads(self.files["manifest.json"])

    @property
    def host_file(self) -> str:
        return f"{self.name}_host.src"

    def write(self, directory) -> List[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for fname in sorted(self.files):
            p = out / fname
            p.write_text(self.files[fname])
            paths.append(p)
        return paths


def c_type(el: ElementType) -> str:
    base = C_TYPES[el.base]
    return f"vec<{base}, {el.vector}>" if el.is_vector else base


def _literal(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    text = repr(float(v))
    return text if "e" in text or "inf" in text or "nan" in text else text + "f"


def _dims(shape) -> str:
    return "".join(f"[{x}]" for x in shape)


def _ann(token: str, *args) -> str:
    return "/*@ " + " ".join((token,) + tuple(args)) + " @*/"


def _code_names(code: str) -> Set[str]:
    return {n.id for n in ast.walk(ast.parse(code)) if isinstance(n, ast.Name)}


def _is_dram(d: DataDescriptor) -> bool:
    return d.storage.is_dram and not d.is_stream


def _flat(subset, shape) -> SymExpr:
    idx, stride = SymExpr.const(0), SymExpr.const(1)
    for r, n in reversed(list(zip(subset, shape))):
        idx = idx + r.begin * stride
        stride = stride * n
    return idx


# kernel-level analysis ---------------------------------------------------------


def _check(s: Sdfg):
    for st in s.state_order():
        for n in st.nodes.values():
            if isinstance(n, LibraryNode):
                raise CodegenError(f"library node '{n.label}' in state '{st.name}' is not expanded")
            if isinstance(n, NestedSdfg):
                raise CodegenError(f"nested graph '{n.label}' in state '{st.name}' cannot be emitted")
        if is_compute_state(st) and not is_device_kernel_state(s, st):
            host = sorted({a.data for a in st.access_nodes() if not s.containers[a.data].storage.on_device})
            raise CodegenError(f"state '{st.name}' computes on host storage ({', '.join(host)})")
    for e in s.interstate_edges:
        if e.condition is not None or e.assignments:
            raise CodegenError(f"control flow between '{e.src}' and '{e.dst}' cannot be emitted")
    bad = errors(validate(s))
    if bad:
        raise CodegenError(f"graph does not validate: {bad[0]}")


def _dram_args(s: Sdfg, st: State) -> Dict[int, str]:
    """One interface argument per DRAM access node, in node order."""
    seen: Dict[str, int] = {}
    out = {}
    for a in sorted(st.access_nodes(), key=lambda a: a.id):
        if not _is_dram(s.containers[a.data]):
            continue
        k = seen.get(a.data, 0)
        seen[a.data] = k + 1
        out[a.id] = a.data if k == 0 else f"{a.data}_{k}"
    return out


class _Pe:
    """One processing element to be emitted: component nodes plus fixed parameters."""

    def __init__(self, s: Sdfg, st: State, comp: Component, name: str, fixed: Dict[str, int], dram: Dict[int, str], skip: Optional[MapEntry]):
        self.s, self.st, self.comp, self.name = s, st, comp, name
        self.fixed = dict(fixed)
        self.members = set(comp.nodes)
        self.skip = skip  # outermost unrolled map emitted by the caller
        self.mapping = {k: SymExpr.const(v) for k, v in self.fixed.items()}
        self.edges = [e for e in st.edges.values() if e.src in self.members]
        self.dram = {nid: a for nid, a in dram.items() if nid in self.members}
        self.containers = sorted({e.memlet.data for e in self.edges if e.memlet.data} | {st.nodes[n].data for n in self.members if isinstance(st.nodes[n], AccessNode)})
        self.streams = [c for c in self.containers if s.containers[c].is_stream]
        self.locals = [c for c in self.containers if not s.containers[c].is_stream and not s.containers[c].storage.is_dram]
        self.symbols = self._symbols()

    def _symbols(self) -> List[str]:
        names: Set[str] = set()
        for e in self.edges:
            m = e.memlet
            if m.is_empty:
                continue
            for r in m.subset:
                names |= r.begin.free_symbols | r.end.free_symbols | r.stride.free_symbols
            names |= m.volume.free_symbols
        for c in self.containers:
            for x in self.s.containers[c].shape:
                names |= x.free_symbols
        for nid in self.members:
            n = self.st.nodes[nid]
            if isinstance(n, MapEntry):
                for r in n.ranges:
                    names |= r.begin.free_symbols | r.end.free_symbols | r.stride.free_symbols
            elif isinstance(n, Tasklet):
                names |= _code_names(n.code) & set(self.s.symbols)
        if self.skip is not None:
            for r in self.skip.ranges:
                names |= r.begin.free_symbols | r.end.free_symbols | r.stride.free_symbols
        names -= set(self.fixed) | set(self.s.constants)
        names -= {p for nid in self.members if isinstance(self.st.nodes[nid], MapEntry) for p in self.st.nodes[nid].params}
        return sorted(n for n in names if n in self.s.symbols)

    def dram_params(self) -> List[Tuple[str, str]]:
        return [(self.dram[nid], self.st.nodes[nid].data) for nid in sorted(self.dram)]


# loop-nest annotations ---------------------------------------------------------------


class _Nest:
    def __init__(self, pe: _Pe):
        st = pe.st
        kids = st.scope_children()
        self.children = {k: [n for n in v if n in pe.members] for k, v in kids.items()}
        self.st = st
        self.pipelined: Set[int] = set()
        self.flatten: Set[int] = set()
        for nid in pe.members:
            n = st.nodes[nid]
            if isinstance(n, MapEntry) and n.schedule is not Schedule.Unrolled and not self._inner_pipelined(nid):
                self.pipelined.add(nid)
        for nid in self.pipelined:
            top, cur = nid, nid
            while True:
                parent = st.scope_dict()[cur]
                if parent is None or parent not in pe.members or st.nodes[parent].schedule is Schedule.Unrolled:
                    break
                rest = [c for c in self.children.get(parent, []) if not isinstance(st.nodes[c], (AccessNode, MapExit)) and c != cur]
                if rest:
                    break
                top = cur = parent
            if top != nid or len(st.nodes[nid].params) > 1:
                self.flatten.add(top)
        self.ignore = self._dependence_ignore(pe)

    def maps_below(self, nid: int) -> List[int]:
        out = []
        for c in self.children.get(nid, []):
            if isinstance(self.st.nodes[c], MapEntry):
                out.append(c)
                out.extend(self.maps_below(c))
        return out

    def nodes_below(self, nid: int) -> List[int]:
        out = []
        for c in self.children.get(nid, []):
            out.append(c)
            if isinstance(self.st.nodes[c], MapEntry):
                out.extend(self.nodes_below(c))
        return out

    def _inner_pipelined(self, nid: int) -> bool:
        return any(self.st.nodes[m].schedule is not Schedule.Unrolled for m in self.maps_below(nid))

    def _dependence_ignore(self, pe: _Pe) -> Dict[int, List[str]]:
        wcr = {e.memlet.data for e in pe.edges if e.memlet.wcr}
        candidates = [c for c in pe.locals if c not in wcr]
        out = {}
        for nid in self.pipelined:
            reads, writes = set(), set()
            for x in self.nodes_below(nid):
                if not isinstance(self.st.nodes[x], Tasklet):
                    continue
                reads |= {e.memlet.data for e in self.st.in_edges(x)}
                writes |= {e.memlet.data for e in self.st.out_edges(x)}
            hit = [c for c in candidates if c in reads and c in writes]
            if hit:
                out[nid] = hit
        return out


# statement emission -------------------------------------------------------------


class _Body:
    def __init__(self, pe: _Pe, dialect: str):
        self.pe, self.dialect = pe, dialect
        self.s, self.st = pe.s, pe.st
        self.nest = _Nest(pe)
        self.lines: List[str] = []

    def out(self, depth: int, text: str):
        self.lines.append("  " * depth + text)

    def sub(self, e: SymExpr) -> str:
        return str(as_expr(e).substitute(self.pe.mapping))

    def ref(self, e, memlet: Memlet) -> str:
        d = self.s.containers[memlet.data]
        m = memlet.substitute(self.pe.mapping)
        if _is_dram(d):
            outer = self.st.outer_edge(e)
            nid = outer.src if isinstance(self.st.nodes[outer.src], AccessNode) else outer.dst
            name = self.pe.dram.get(nid, memlet.data)
            return f"{name}[{_flat(m.subset, d.shape) if d.shape else 0}]"
        if not d.shape:
            return memlet.data
        return memlet.data + "".join(f"[{r.begin}]" for r in m.subset)

    @staticmethod
    def is_point(m: Memlet) -> bool:
        return all(r.begin == r.end for r in m.subset)

    # -- scopes
    def emit_scope(self, scope: Optional[int], depth: int, in_pipe: bool):
        for nid in self.nest.children.get(scope, []):
            n = self.st.nodes[nid]
            if isinstance(n, MapEntry):
                self.emit_map(n, depth, in_pipe)
            elif isinstance(n, Tasklet):
                self.emit_tasklet(n, depth)
            elif isinstance(n, AccessNode):
                for e in self.st.out_edges(n):
                    if isinstance(self.st.nodes[e.dst], AccessNode) and not e.memlet.is_empty:
                        self.emit_copy(e, depth, in_pipe)

    def emit_map(self, m: MapEntry, depth: int, in_pipe: bool):
        if self.pe.skip is not None and m.id == self.pe.skip.id:
            self.emit_scope(m.id, depth, in_pipe)
            return
        pipelined = not in_pipe and m.id in self.nest.pipelined
        opened = 0
        for i, (p, r) in enumerate(zip(m.params, m.ranges)):
            if not in_pipe:
                if m.schedule is Schedule.Unrolled:
                    self.out(depth + i, _ann("UNROLL"))
                elif i == 0 and m.id in self.nest.flatten:
                    self.out(depth + i, _ann("LOOP_FLATTEN"))
                if pipelined and i == len(m.params) - 1:
                    self.out(depth + i, _ann("PIPELINE"))
                    for c in self.nest.ignore.get(m.id, []):
                        self.out(depth + i, _ann("DEPENDENCE_IGNORE" if self.dialect == "F" else "ivdep", c))
            self.out(depth + i, f"for (int {p} = {self.sub(r.begin)}; {p} < {self.sub(r.end + 1)}; {p} += {self.sub(r.stride)}) {{")
            opened += 1
        self.emit_scope(m.id, depth + opened, in_pipe or pipelined)
        for i in reversed(range(opened)):
            self.out(depth + i, "}")

    def emit_copy(self, e, depth: int, in_pipe: bool):
        src, dst = self.st.nodes[e.src], self.st.nodes[e.dst]
        sd, dd = self.s.containers[src.data], self.s.containers[dst.data]
        m = e.memlet.substitute(self.pe.mapping)
        count = m.volume
        base = _flat(m.subset, self.s.containers[m.data].shape) if m.subset else SymExpr.const(0)

        def side(node, d):
            if d.is_stream:
                return node.data
            name = self.pe.dram.get(node.id, node.data)
            off = base if node.data == m.data else SymExpr.const(0)
            return f"{name}[{off + SymExpr.symbol('_i')}]"

        if not in_pipe:
            self.out(depth, _ann("PIPELINE"))
        self.out(depth, f"for (int _i = 0; _i < {count}; _i += 1) {{")
        value = f"pop({src.data})" if sd.is_stream else side(src, sd)
        self.out(depth + 1, f"push({dst.data}, {value});" if dd.is_stream else f"{side(dst, dd)} = {value};")
        self.out(depth, "}")

    def emit_tasklet(self, t: Tasklet, depth: int):
        self.out(depth, "{")
        d1 = depth + 1
        for name in sorted(t.tables):
            vals = list(t.tables[name])
            ty = "int" if all(isinstance(v, int) for v in vals) else "float"
            self.out(d1, f"const {ty} {name}[{len(vals)}] = {{" + ", ".join(_literal(v) for v in vals) + "};")
        rename: Dict[str, str] = {k: str(v) for k, v in self.pe.fixed.items()}
        for e in sorted(self.st.in_edges(t), key=lambda e: (e.dst_conn or "", e.id)):
            if e.memlet.is_empty or e.dst_conn is None:
                continue
            d = self.s.containers[e.memlet.data]
            ty = c_type(d.element)
            if d.is_stream:
                src = f"pop({self.ref(e, e.memlet)})"
                if e.memlet.dynamic:
                    rename[e.dst_conn] = src
                    continue
                self.out(d1, f"{ty} {e.dst_conn} = {src};")
            elif self.is_point(e.memlet):
                self.out(d1, f"{ty} {e.dst_conn} = {self.ref(e, e.memlet)};")
            else:
                self.out(d1, f"{ty} *{e.dst_conn} = &{self.ref(e, e.memlet)};")
        stores: Dict[str, List[str]] = {}
        for e in sorted(self.st.out_edges(t), key=lambda e: (e.src_conn or "", e.id)):
            if e.memlet.is_empty or e.src_conn is None:
                continue
            d = self.s.containers[e.memlet.data]
            if e.src_conn not in stores:
                ty = c_type(d.element)
                self.out(d1, f"{ty} {e.src_conn};" if self.is_point(e.memlet) or d.is_stream else f"{ty} {e.src_conn}[{e.memlet.num_elements().substitute(self.pe.mapping)}];")
            stores.setdefault(e.src_conn, []).append(self.store(e, e.src_conn))

        def assign(name, text):
            target = rename.get(name, name)
            if name not in stores:
                return f"{target} = {text};"
            return " ".join([f"{target} = {text};"] + stores[name])

        for line in to_c_statements(t.code, rename=lambda n: rename.get(n, n), assign=assign):
            self.out(d1, line)
        self.out(depth, "}")

    def store(self, e, conn: str) -> str:
        m = e.memlet
        d = self.s.containers[m.data]
        ref = self.ref(e, m)
        if d.is_stream:
            return f"push({ref}, {conn});"
        if not self.is_point(m):
            return f"copy_range(&{ref}, {conn}, {m.num_elements().substitute(self.pe.mapping)});"
        if m.wcr == "sum":
            return f"{ref} += {conn};"
        if m.wcr in ("min", "max"):
            return f"{ref} = {m.wcr}({ref}, {conn});"
        return f"{ref} = {conn};"


# per-dialect assembly -----------------------------------------------------------


def _stream_decl(s: Sdfg, name: str, kind: str) -> str:
    d = s.containers[name]
    return f"{kind}<{c_type(d.element)}, {d.capacity or 4}> {name}{_dims(d.shape)};"


def _stream_entry(s: Sdfg, st: State, name: str) -> dict:
    d = s.containers[name]
    return {
        "name": name,
        "state": st.name,
        "type": c_type(d.element),
        "depth": d.capacity or 4,
        "extent": [str(x) for x in d.shape],
    }


def _constants(s: Sdfg) -> List[str]:
    return [f"const int {k} = {v};" for k, v in sorted(s.constants.items())]


def _symbol_type(s: Sdfg, name: str) -> str:
    t = s.symbols.get(name, "int")
    return C_TYPES.get(t, t if t in C_TYPES.values() else "int")


def _pe_body(pe: _Pe, dialect: str, depth: int) -> List[str]:
    body = _Body(pe, dialect)
    for c in pe.locals:
        d = pe.s.containers[c]
        body.out(depth, f"{c_type(d.element)} {c}{_dims(d.shape)};")
    body.emit_scope(pe.skip.id if pe.skip is not None else None, depth, False)
    return body.lines


def _kernel_states(s: Sdfg) -> List[State]:
    return [st for st in s.state_order() if is_compute_state(st)]


def _unique_kernel_name(name: str, st: State, used: Set[str]) -> str:
    if name in used:
        name = f"{st.name}_{name}"
    used.add(name)
    return name


def _emit_f(s: Sdfg):
    files, kernels, streams = {}, [], []
    for st in _kernel_states(s):
        dram = _dram_args(s, st)
        pes = []
        comps = connected_components(st, s).components
        for comp in sorted(comps, key=lambda c: _ROLE_ORDER.get(c.role, 1)):
            top = _top_unrolled(st, comp.nodes)
            pes.append(_Pe(s, st, comp, comp.name, {}, dram, top))
        lines = _constants(s)
        if lines:
            lines.append("")
        for pe in pes:
            params = []
            if pe.skip is not None:
                params += [f"int {p}" for p in pe.skip.params]
            params += [f"{c_type(s.containers[c].element)} *{a}" for a, c in pe.dram_params()]
            params += [f"{_stream_decl(s, c, 'stream')[:-1]}" for c in pe.streams]
            params += [f"{_symbol_type(s, x)} {x}" for x in pe.symbols]
            lines.append(f"void {pe.name}({', '.join(params)}) {{")
            lines += _pe_body(pe, "F", 1)
            lines.append("}")
            lines.append("")
        symbols = sorted({x for pe in pes for x in pe.symbols})
        args = [{"name": a, "kind": "buffer", "container": st.nodes[nid].data, "type": c_type(s.containers[st.nodes[nid].data].element)} for nid, a in sorted(dram.items())]
        args += [{"name": x, "kind": "scalar", "type": _symbol_type(s, x)} for x in symbols]
        params = [f"{a['type']} *restrict {a['name']}" if a["kind"] == "buffer" else f"{a['type']} {a['name']}" for a in args]
        lines.append(f"void {st.name}({', '.join(params)}) {{")
        lines.append("  " + _ann("DATAFLOW"))
        used_streams = sorted({c for pe in pes for c in pe.streams})
        for c in used_streams:
            lines.append("  " + _stream_decl(s, c, "stream"))
            streams.append(_stream_entry(s, st, c))
        for pe in pes:
            call = [p for p in (pe.skip.params if pe.skip is not None else ())]
            call += [a for a, _ in pe.dram_params()] + pe.streams + pe.symbols
            if pe.skip is None:
                lines.append(f"  {pe.name}({', '.join(call)});")
                continue
            depth = 1
            for p, r in zip(pe.skip.params, pe.skip.ranges):
                lines.append("  " * depth + _ann("UNROLL"))
                lines.append("  " * depth + f"for (int {p} = {r.begin}; {p} < {r.end + 1}; {p} += {r.stride}) {{")
                depth += 1
            lines.append("  " * depth + f"{pe.name}({', '.join(call)});")
            for _ in pe.skip.params:
                depth -= 1
                lines.append("  " * depth + "}")
        lines.append("}")
        fname = f"{s.name}_device_{st.name}.src"
        files[fname] = "\n".join(lines) + "\n"
        kernels.append(
            {
                "name": st.name,
                "state": st.name,
                "file": fname,
                "args": args,
                "autorun": False,
                "functions": [pe.name for pe in pes],
                "dram_accesses": len(dram),
            }
        )
    return files, kernels, streams


def _emit_k(s: Sdfg):
    files, kernels, streams = {}, [], []
    used: Set[str] = set()
    for st in _kernel_states(s):
        dram = _dram_args(s, st)
        instances = processing_elements(st, s)
        order = sorted(range(len(instances)), key=lambda i: (_ROLE_ORDER.get(instances[i].component.role, 1), i))
        state_streams: Set[str] = set()
        for i in order:
            inst = instances[i]
            comp = inst.component
            skip = st.nodes[comp.unrolled] if comp.unrolled is not None else None
            name = _unique_kernel_name(inst.name, st, used)
            pe = _Pe(s, st, comp, name, inst.bindings, dram, skip)
            args = [{"name": a, "kind": "buffer", "container": c, "type": c_type(s.containers[c].element)} for a, c in pe.dram_params()]
            args += [{"name": x, "kind": "scalar", "type": _symbol_type(s, x)} for x in pe.symbols]
            autorun = not args
            lines = _constants(s)
            if lines:
                lines.append("")
            for c in pe.streams:
                lines.append(_stream_decl(s, c, "channel"))
                state_streams.add(c)
            if pe.streams:
                lines.append("")
            if autorun:
                lines.append(_ann("autorun"))
            params = [f"{a['type']} *restrict {a['name']}" if a["kind"] == "buffer" else f"{a['type']} {a['name']}" for a in args]
            lines.append(f"kernel void {name}({', '.join(params)}) {{")
            lines += _pe_body(pe, "K", 1)
            lines.append("}")
            fname = f"{s.name}_device_{name}.src"
            files[fname] = "\n".join(lines) + "\n"
            kernels.append({"name": name, "state": st.name, "file": fname, "args": args, "autorun": autorun, "bindings": dict(sorted(inst.bindings.items()))})
        streams += [_stream_entry(s, st, c) for c in sorted(state_streams)]
    return files, kernels, streams


def _host(s: Sdfg, kernels: List[dict]) -> List[str]:
    params = []
    for name, d in s.containers.items():
        if not d.transient and not d.is_stream and d.storage.is_dram:
            params.append(f"{c_type(d.element)} *{name}")
    params += [f"{_symbol_type(s, x)} {x}" for x in sorted(s.symbols)]
    lines = _constants(s)
    if lines:
        lines.append("")
    lines.append(f"void {s.name}_host({', '.join(params)}) {{")
    device = [n for n, d in s.containers.items() if d.transient and not d.is_stream and d.storage.name == "DeviceDram"]
    for n in device:
        d = s.containers[n]
        lines.append(f"  {c_type(d.element)} *{n} = device_alloc({product(d.shape)});")
    by_state: Dict[str, List[dict]] = {}
    for k in kernels:
        by_state.setdefault(k["state"], []).append(k)
    for st in s.state_order():
        if st.name in by_state:
            for k in by_state[st.name]:
                if k["autorun"]:
                    continue
                lines.append(f"  launch({', '.join([k['name']] + [_host_arg(a) for a in k['args']])});")
            lines.append("  wait_all();")
            continue
        for e in sorted(st.edges.values(), key=lambda e: e.id):
            src, dst = st.nodes[e.src], st.nodes[e.dst]
            if not (isinstance(src, AccessNode) and isinstance(dst, AccessNode)) or e.memlet.is_empty:
                continue
            sd, dd = s.containers[src.data], s.containers[dst.data]
            fn = {(False, True): "copy_to_device", (True, False): "copy_to_host", (True, True): "copy_on_device"}.get((sd.storage.on_device, dd.storage.on_device), "copy_host")
            count = e.memlet.volume * s.containers[e.memlet.data].element.width
            lines.append(f"  {fn}({dst.data}, {src.data}, {count});")
    for n in device:
        lines.append(f"  device_free({n});")
    lines.append("}")
    return lines


def _host_arg(a: dict) -> str:
    return a["container"] if a["kind"] == "buffer" else a["name"]


def generate(s: Sdfg, dialect: str = "F") -> EmittedProgram:
    """Emit host and device sources for ``s`` in dialect ``F`` or ``K``."""
    if dialect not in DIALECTS:
        raise CodegenError(f"unknown dialect '{dialect}' (choose F or K)")
    _check(s)
    files, kernels, streams = (_emit_f if dialect == "F" else _emit_k)(s)
    if not kernels:
        raise CodegenError("the graph has no device kernel state")
    host = f"{s.name}_host.src"
    files[host] = "\n".join(_host(s, kernels)) + "\n"
    pes = sum(len(k["functions"]) for k in kernels) if dialect == "F" else len(kernels)
    manifest = {
        "format": "dfhls-emitted",
        "version": MANIFEST_VERSION,
        "program": s.name,
        "dialect": dialect,
        "host": host,
        "kernels": kernels,
        "launch_order": [k["name"] for k in kernels if not k["autorun"]],
        "streams": streams,
        "pes": pes,
        "constants": dict(sorted(s.constants.items())),
    }
    files["manifest.json"] = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    return EmittedProgram(s.name, dialect, dict(sorted(files.items())))
