"""JSON stencil programs: parsing, delay-buffer planning and graph construction.

A program document looks like::

    {
      "dimensions": [64, 64],
      "vectorization": 8,
      "inputs": {"a": {"data_type": "float32", "input_dims": ["j", "k"]},
                 "c0": {"data_type": "float32", "input_dims": []}},
      "outputs": ["d"],
      "program": {
        "b": {"data_type": "float32",
              "boundary": {"a": {"type": "constant", "value": 0}},
              "computation": "b = c0*a[j,k] + c0*a[j-1,k]"},
        ...
      }
    }

The name left of ``=`` in a computation is informational; the program key names
the operator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .ir.core import ElementType, Memlet, Sdfg, StorageKind
from .library.stencil import Computation, StencilSyntaxError, parse_computation, row_major_strides

SLACK = 4  # capacity added on top of every planned delay


class StencilProgramError(ValueError):
    pass


@dataclass
class InputDecl:
    name: str
    data_type: str
    dims: Tuple[str, ...]

    @property
    def is_scalar(self) -> bool:
        return not self.dims


@dataclass
class Operator:
    name: str
    data_type: str
    boundary: Dict[str, dict]
    computation: Computation
    text: str

    @property
    def fields(self) -> List[str]:
        return list(self.computation.accesses)

    @property
    def scalars(self) -> List[str]:
        return list(self.computation.scalars)


@dataclass
class StencilProgram:
    shape: Tuple[int, ...]
    W: int
    dims: Tuple[str, ...]
    inputs: Dict[str, InputDecl]
    outputs: List[str]
    operators: Dict[str, Operator]  # topological order

    @property
    def strides(self) -> Tuple[int, ...]:
        return row_major_strides(self.shape)

    def producers(self, op: str) -> List[str]:
        return [f for f in self.operators[op].fields if f in self.operators]


# parsing ---------------------------------------------------------------------


def _load(doc) -> dict:
    if isinstance(doc, dict):
        return doc
    if isinstance(doc, Path) or (isinstance(doc, str) and not doc.lstrip().startswith("{")):
        doc = Path(doc).read_text()
    try:
        return json.loads(doc)
    except json.JSONDecodeError as exc:
        raise StencilProgramError(f"invalid JSON: {exc}") from None


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise StencilProgramError(f"{where}: missing '{key}'")
    return d[key]


def parse_program(doc: Union[dict, str, Path]) -> StencilProgram:
    d = _load(doc)
    shape = tuple(int(x) for x in _require(d, "dimensions", "program"))
    if not shape or any(n < 1 for n in shape):
        raise StencilProgramError(f"dimensions must be positive, got {list(shape)}")
    W = int(d.get("vectorization", 1))
    if W < 1 or shape[-1] % W:
        raise StencilProgramError(f"vectorization {W} does not divide the innermost dimension {shape[-1]}")
    inputs: Dict[str, InputDecl] = {}
    dims: Optional[Tuple[str, ...]] = None
    for name, spec in _require(d, "inputs", "program").items():
        idims = tuple(spec.get("input_dims", []))
        if idims:
            if len(idims) != len(shape):
                raise StencilProgramError(f"input '{name}' has {len(idims)} dimensions, the domain has {len(shape)}")
            if dims is not None and idims != dims:
                raise StencilProgramError(f"input '{name}' uses dimensions {list(idims)}, expected {list(dims)}")
            dims = idims
        inputs[name] = InputDecl(name, _require(spec, "data_type", f"input '{name}'"), idims)
    if dims is None:
        dims = tuple(f"d{i}" for i in range(len(shape)))
    raw = _require(d, "program", "program")
    ops: Dict[str, Operator] = {}
    for name, spec in raw.items():
        if name in inputs:
            raise StencilProgramError(f"operator '{name}' shadows an input")
        text = _require(spec, "computation", f"operator '{name}'")
        try:
            comp = parse_computation(text, dims)
        except StencilSyntaxError as exc:
            raise StencilProgramError(f"operator '{name}': {exc}") from None
        ops[name] = Operator(name, spec.get("data_type", "float32"), dict(spec.get("boundary") or {}), comp, text)
    for op in ops.values():
        for f in op.fields:
            if f in inputs:
                if inputs[f].is_scalar:
                    raise StencilProgramError(f"operator '{op.name}' indexes scalar input '{f}'")
            elif f not in ops:
                raise StencilProgramError(f"operator '{op.name}' references undeclared field '{f}'")
        for s in op.scalars:
            if s not in inputs:
                raise StencilProgramError(f"operator '{op.name}' references undeclared name '{s}'")
            if not inputs[s].is_scalar:
                raise StencilProgramError(f"operator '{op.name}' uses field '{s}' without an index")
        for f, pol in op.boundary.items():
            if f not in op.fields:
                raise StencilProgramError(f"operator '{op.name}' sets a boundary for '{f}', which it does not read")
            if pol.get("type", "constant") != "constant":
                raise StencilProgramError(f"operator '{op.name}': unsupported boundary type '{pol.get('type')}'")
    outputs = list(_require(d, "outputs", "program"))
    for o in outputs:
        if o not in ops:
            raise StencilProgramError(f"output '{o}' is not an operator")
    return StencilProgram(shape, W, dims, inputs, outputs, _toposort(ops))


def _toposort(ops: Dict[str, Operator]) -> Dict[str, Operator]:
    done: Dict[str, Operator] = {}
    visiting = set()

    def visit(n, chain):
        if n in done:
            return
        if n in visiting:
            raise StencilProgramError("operators form a cycle: " + " -> ".join(chain + [n]))
        visiting.add(n)
        for f in ops[n].fields:
            if f in ops:
                visit(f, chain + [n])
        visiting.discard(n)
        done[n] = ops[n]

    for n in ops:
        visit(n, [])
    return done


def program_to_dict(p: StencilProgram) -> dict:
    """Document form of ``p``; ``parse_program`` reads it back to an equal program."""
    return {
        "dimensions": list(p.shape),
        "vectorization": p.W,
        "inputs": {n: {"data_type": i.data_type, "input_dims": list(i.dims)} for n, i in p.inputs.items()},
        "outputs": list(p.outputs),
        "program": {
            n: {
                "data_type": op.data_type,
                "boundary": op.boundary,
                "computation": f"{n} = {op.computation.render(_access_text(p.dims))}",
            }
            for n, op in p.operators.items()
        },
    }


def _access_text(dims):
    def text(f, off):
        parts = []
        for d, o in zip(dims, off):
            parts.append(d if o == 0 else f"{d}{o:+d}")
        return f"{f}[{', '.join(parts)}]"

    return text


def print_program(p: StencilProgram) -> str:
    return json.dumps(program_to_dict(p), indent=2)


def programs_equal(a: StencilProgram, b: StencilProgram) -> bool:
    return json.dumps(program_to_dict(a), sort_keys=True) == json.dumps(program_to_dict(b), sort_keys=True)


# delay planning ----------------------------------------------------------------


@dataclass
class DelayPlan:
    W: int
    skew: Dict[str, int]  # elements between an operator's first and last access
    cumulative: Dict[str, int]  # skew accumulated from the inputs
    delays: Dict[Tuple[str, str], int] = field(default_factory=dict)  # (producer, consumer) -> elements

    def capacity(self, producer: str, consumer: str) -> int:
        return math.ceil(self.delays.get((producer, consumer), 0) / self.W) + SLACK

    def zeroed(self) -> "DelayPlan":
        """The same plan without delay buffers (for provoking deadlocks)."""
        return replace(self, delays={k: 0 for k in self.delays})

    def table(self) -> str:
        lines = ["edge  delay  capacity"]
        for (a, b), d in self.delays.items():
            lines.append(f"{a}->{b}  {d}  {self.capacity(a, b)}")
        return "\n".join(lines)


def _flat(off, strides) -> int:
    return sum(o * s for o, s in zip(off, strides))


def plan_delays(p: StencilProgram) -> DelayPlan:
    strides = p.strides
    skew, cum, delays = {}, {}, {}
    for name, op in p.operators.items():
        for f, offs in op.computation.accesses.items():
            for off in offs:
                if any(abs(o) >= n for o, n in zip(off, p.shape)):
                    raise StencilProgramError(f"operator '{name}' reads {f} at offset {tuple(off)}, outside the {list(p.shape)} domain")
        flat = [_flat(o, strides) for offs in op.computation.accesses.values() for o in offs]
        skew[name] = max(flat) - min(flat)
        arrival = {f: cum.get(f, 0) for f in op.fields}
        latest = max(arrival.values())
        cum[name] = latest + skew[name]
        for f in op.fields:
            delays[(f, name)] = latest - arrival[f]
    return DelayPlan(p.W, skew, cum, delays)


# graph construction ------------------------------------------------------------


def stream_name(producer: str, consumer: str) -> str:
    return f"{producer}_to_{consumer}"


def build_sdfg(p: StencilProgram, plan: Optional[DelayPlan] = None, target=None, name: str = "stencil") -> Sdfg:
    """One reader per array input, one Stencil node per operator, one writer per output.

    With a ``target`` the library nodes are expanded for it.
    """
    own = plan_delays(p)
    if plan is None:
        plan = own
    elif plan.W != p.W or set(plan.skew) != set(own.skew) or set(plan.delays) != set(own.delays):
        raise StencilProgramError("delay plan does not belong to this program (operators, edges or W differ)")
    W = p.W
    s = Sdfg(name)
    st = s.add_state("stencil", is_start=True)
    vshape = list(p.shape[:-1]) + [p.shape[-1] // W]
    nvec = math.prod(vshape)
    dims = {d: f"0:{n}" for d, n in zip(p.dims, vshape)}
    idx = ", ".join(p.dims)

    def element(dt):
        el = ElementType.parse(dt)
        return el.vectorized(W) if W > 1 else el

    consumers: Dict[str, List[str]] = {}
    for op in p.operators.values():
        for f in op.fields:
            consumers.setdefault(f, []).append(op.name)
    for o in p.outputs:
        consumers.setdefault(o, []).append("")

    streams: Dict[Tuple[str, str], str] = {}

    def stream(prod, cons, dt):
        key = (prod, cons)
        if key not in streams:
            sname = stream_name(prod, cons or "out")
            cap = plan.capacity(prod, cons) if cons else SLACK
            s.add_stream(sname, element=element(dt), capacity=cap)
            streams[key] = sname
        return streams[key]

    for n, decl in p.inputs.items():
        if decl.is_scalar:
            s.add_scalar(n, element=ElementType.parse(decl.data_type), storage=StorageKind.DeviceDram)
            continue
        if n not in consumers:
            continue
        s.add_array(n, vshape, element=element(decl.data_type), storage=StorageKind.DeviceDram)
        en, ex = st.add_map(f"read_{n}", dims)
        t = st.add_tasklet(f"read_{n}", ["v"], ["o"], "o = v")
        st.add_memlet_path(st.add_access(n), en, t, memlet=Memlet.simple(n, idx), dst_conn="v")
        for c in consumers[n]:
            sn = stream(n, c, decl.data_type)
            st.add_memlet_path(t, ex, st.add_access(sn), memlet=Memlet(sn, (), 1), src_conn="o")

    for op in p.operators.values():
        attrs = dict(
            shape=list(p.shape),
            W=W,
            dims=list(p.dims),
            computation=op.text,
            boundary=op.boundary,
            output=op.name,
        )
        node = st.add_library(op.name, "Stencil", op.fields + op.scalars, (op.name,), **attrs)
        for f in op.fields:
            dt = p.inputs[f].data_type if f in p.inputs else p.operators[f].data_type
            sn = stream(f, op.name, dt)
            st.add_edge(st.add_access(sn), None, node, f, Memlet(sn, (), nvec))
        for sc in op.scalars:
            st.add_edge(st.add_access(sc), None, node, sc, Memlet(sc, (), 1))
        for c in consumers.get(op.name, []):
            sn = stream(op.name, c, op.data_type)
            st.add_edge(node, op.name, st.add_access(sn), None, Memlet(sn, (), nvec))

    for o in p.outputs:
        op = p.operators[o]
        s.add_array(o, vshape, element=element(op.data_type), storage=StorageKind.DeviceDram)
        sn = streams[(o, "")]
        en, ex = st.add_map(f"write_{o}", dims)
        t = st.add_tasklet(f"write_{o}", ["v"], ["o"], "o = v")
        st.add_memlet_path(st.add_access(sn), en, t, memlet=Memlet(sn, (), 1), dst_conn="v")
        st.add_memlet_path(t, ex, st.add_access(o), memlet=Memlet.simple(o, idx), src_conn="o")

    if target is not None:
        from .library import expand_all, load_target

        s = expand_all(s, load_target(target))
    return s
