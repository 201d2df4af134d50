"""Command-line driver: ``dfhls <command> ...``.

Exit codes: 0 success, 1 error diagnostics or a failed run, 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import fixtures
from .analysis import connected_components, is_compute_state, offchip_volume, stream_balance_check
from .codegen import CodegenError
from .ir import SchemaError, load, save, validate
from .ir.validate import errors
from .library import ExpansionError, ExpansionLog, expand_all, load_target
from .symbolic import UnboundSymbolError

JSON_SCHEMA = "dfhls-cli"
JSON_VERSION = 1
COMMANDS = ("validate", "expand", "transform", "auto", "analyze", "simulate", "codegen", "stencil", "fixture")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _pairs(items: Optional[List[str]], what: str, positive: bool = True) -> Dict[str, int]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise UsageError(f"{what} '{item}' is not NAME=VALUE")
        try:
            v = int(value)
        except ValueError:
            raise UsageError(f"{what} '{item}' needs an integer value") from None
        if positive and v < 1:
            raise UsageError(f"{what} '{item}' must be positive")
        out[name] = v
    return out


def _bindings(s, items) -> Dict[str, int]:
    b = _pairs(items, "binding", positive=False)
    shape_syms = {x for d in s.containers.values() for e in d.shape for x in e.free_symbols}
    for k, v in b.items():
        if k in shape_syms and v < 1:
            raise UsageError(f"binding {k}={v} is used as a shape and must be positive")
    return b


def _overrides(items: Optional[List[str]]) -> Dict[str, str]:
    out = {}
    for item in items or []:
        label, sep, exp = item.partition("=")
        if not sep:
            raise UsageError(f"expansion override '{item}' is not LABEL=IMPLEMENTATION")
        out[label] = exp
    return out


def _graph(path: str):
    try:
        return load(Path(path))
    except (OSError, SchemaError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read graph '{path}': {exc}") from None


def _target(args):
    try:
        return load_target(args.target)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _out_dir(args, required=True) -> Optional[Path]:
    if args.out is None:
        if required:
            raise UsageError(f"'{args.command}' needs an output directory (-o)")
        return None
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_graph(s, out: Path) -> str:
    path = out / f"{s.name}.sdfg.json"
    save(s, path)
    return str(path)


def _components(s) -> Dict[str, List[str]]:
    return {st.name: connected_components(st, s).names() for st in s.state_order() if is_compute_state(st)}


# commands: each returns (exit code, JSON payload, text lines) ---------------------


def cmd_validate(args):
    s = _graph(args.graph)
    diags = validate(s)
    bad = errors(diags)
    lines = [str(d) for d in diags] or ["ok"]
    return (1 if bad else 0), {"diagnostics": [d.as_dict() for d in diags]}, lines


def cmd_expand(args):
    s = _graph(args.graph)
    out = _out_dir(args)
    log = ExpansionLog()
    res = expand_all(s, _target(args), _overrides(args.expansion), log)
    steps = [{"state": a, "node": b, "kind": c, "expansion": d} for a, b, c, d in log.steps]
    path = _write_graph(res, out)
    return 0, {"graph": path, "expansions": steps}, [f"{x['state']}:{x['node']} ({x['kind']}) -> {x['expansion']}" for x in steps] + [f"wrote {path}"]


def cmd_transform(args):
    from .transforms import run_passes

    s = _graph(args.graph)
    out = _out_dir(args)
    options: Dict[str, dict] = {}
    for name in args.passes:
        opt = {}
        if name in ("vectorize",):
            opt = {"container": args.container, "W": args.W}
        elif name in ("streaming-memory", "streaming-composition"):
            opt = {"container": args.container}
        elif name == "replicate":
            if not args.container:
                raise UsageError("'replicate' needs --container")
            opt = {"container": args.container}
        elif name == "input-to-constant":
            if not args.container or args.values is None:
                raise UsageError("'input-to-constant' needs --container and --values")
            opt = {"container": args.container, "values": _values(args.values)}
        elif name == "auto":
            opt = {"target": _target(args), "W": args.W}
        options[name] = opt
    from .transforms import PASSES

    unknown = [n for n in args.passes if n not in PASSES]
    if unknown:
        raise UsageError(f"unknown pass '{unknown[0]}' (known: {', '.join(sorted(PASSES))})")
    res, reports = run_passes(s, args.passes, options)
    path = _write_graph(res, out)
    payload = {"graph": path, "reports": [r.as_dict() for r in reports], "components": _components(res)}
    return 0, payload, [str(r) for r in reports] + [f"wrote {path}"]


def _values(text: str):
    p = Path(text)
    if p.is_file():
        from .sim import read_tensor

        return read_tensor(p)
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--values '{text}' is neither a tensor file nor a comma list") from None


def cmd_auto(args):
    from .transforms import auto_pipeline

    s = _graph(args.graph)
    out = _out_dir(args)
    res, reports = auto_pipeline(s, _target(args), args.W, _overrides(args.expansion))
    path = _write_graph(res, out)
    comps = _components(res)
    payload = {"graph": path, "reports": [r.as_dict() for r in reports], "components": comps}
    (out / "passes.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    lines = [str(r) for r in reports]
    lines += [f"{st}: {len(names)} components ({', '.join(names)})" for st, names in comps.items()]
    return 0, payload, lines + [f"wrote {path}"]


def cmd_analyze(args):
    from .report import write_volume_report

    s = _graph(args.graph)
    binding = _bindings(s, args.bind)
    vol = offchip_volume(s, binding)
    balance = []
    for st in s.state_order():
        if is_compute_state(st):
            balance += [d.as_dict() for d in stream_balance_check(st, s)]
    payload = {"volume": vol.as_dict(), "components": _components(s), "stream_balance": balance}
    lines = [vol.table()]
    lines += [f"{st}: {len(names)} components ({', '.join(names)})" for st, names in payload["components"].items()]
    lines += [f"stream balance: {d['message']}" for d in balance]
    out = _out_dir(args, required=False)
    if out is not None:
        payload["files"] = [str(p) for p in write_volume_report(vol, out)]
    code = 1 if any(d["severity"] == "error" for d in balance) else 0
    return code, payload, lines


def _inputs(s, binding, args) -> Dict[str, np.ndarray]:
    from .sim import read_tensor

    ins = fixtures.random_inputs(s, binding, args.seed)
    for item in args.input or []:
        name, sep, path = item.partition("=")
        if not sep or name not in s.containers:
            raise UsageError(f"--input '{item}' must be CONTAINER=PATH for a declared container")
        try:
            ins[name] = read_tensor(path)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read tensor '{path}': {exc}") from None
    return ins


def cmd_simulate(args):
    from .report import capacities_of, write_stream_report
    from .sim import DeadlockReport, run_program_concurrent, run_reference, write_tensor

    s = _graph(args.graph)
    binding = _bindings(s, args.bind)
    depths = _pairs(args.depth, "depth")
    if args.mode == "reference" and depths:
        raise UsageError("--depth only applies to --mode concurrent")
    ins = _inputs(s, binding, args)
    out = _out_dir(args, required=False)
    payload: Dict[str, object] = {"mode": args.mode}
    lines = []
    if args.mode == "reference":
        outputs = run_reference(s, ins, binding)
    else:
        res = run_program_concurrent(s, ins, binding, depth_override=depths or None)
        if isinstance(res, DeadlockReport):
            payload["deadlock"] = {"blocked": {k: list(v) for k, v in sorted(res.blocked.items())}, "cycle": res.cycle, "occupancy": res.occupancy}
            return 1, payload, str(res).splitlines()
        outputs = res.outputs
        pushes = {}
        for t in res.traces:
            for k, v in t.totals("push").items():
                pushes[k] = pushes.get(k, 0) + v
        payload.update({"steps": res.steps, "peaks": res.peaks, "pushes": dict(sorted(pushes.items()))})
        lines += [f"{k}: peak {v}, pushed {pushes.get(k, 0)}" for k, v in res.peaks.items()]
        if out is not None:
            payload["files"] = [str(p) for p in write_stream_report(res.peaks, capacities_of(s, depths), pushes, out)]
    summary = {}
    for name in sorted(outputs):
        arr = np.asarray(outputs[name])
        summary[name] = {"shape": list(arr.shape), "sum": float(arr.astype(np.float64).sum())}
        lines.append(f"{name}: shape {tuple(arr.shape)} sum {summary[name]['sum']:.6g}")
        if out is not None:
            write_tensor(out / f"{name}.tensor", arr)
    payload["outputs"] = summary
    return 0, payload, lines


def cmd_codegen(args):
    from .codegen import check_emitted, generate

    s = _graph(args.graph)
    out = _out_dir(args)
    dialect = args.dialect or _target(args).dialect
    prog = generate(s, dialect)
    paths = prog.write(out)
    diags = check_emitted(prog)
    payload = {"dialect": dialect, "files": [str(p) for p in paths], "manifest": prog.manifest, "diagnostics": [d.as_dict() for d in diags]}
    lines = [f"wrote {p}" for p in paths] + [str(d) for d in diags]
    return (1 if diags else 0), payload, lines


def cmd_stencil(args):
    from .stencilfront import StencilProgramError, build_sdfg, parse_program, plan_delays

    try:
        prog = parse_program(Path(args.program))
    except OSError as exc:
        raise UsageError(f"cannot read stencil program '{args.program}': {exc}") from None
    except StencilProgramError as exc:
        return 1, {"error": str(exc)}, [f"error: {exc}"]
    out = _out_dir(args)
    plan = plan_delays(prog)
    if args.zero_delays:
        plan = plan.zeroed()
    target = _target(args) if args.expand else None
    s = build_sdfg(prog, plan, target, name=args.name)
    path = _write_graph(s, out)
    delays = [{"producer": a, "consumer": b, "delay": d, "capacity": plan.capacity(a, b)} for (a, b), d in plan.delays.items()]
    payload = {"graph": path, "delays": delays, "components": _components(s)}
    return 0, payload, plan.table().splitlines() + [f"wrote {path}"]


def cmd_fixture(args):
    if args.name not in fixtures.FIXTURES:
        raise UsageError(f"unknown fixture '{args.name}' (known: {', '.join(sorted(fixtures.FIXTURES))})")
    out = _out_dir(args)
    s = fixtures.FIXTURES[args.name]()
    path = _write_graph(s, out)
    return 0, {"graph": path}, [f"wrote {path}"]


# argument parsing -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--target", help="preset name or capabilities file (default: $DFHLS_TARGET, then func-dataflow)")
    common.add_argument("-W", type=int, default=1, help="vector width")
    common.add_argument("--bind", action="append", metavar="NAME=VALUE", help="symbol binding")
    common.add_argument("--depth", action="append", metavar="STREAM=N", help="FIFO depth override")
    common.add_argument("-o", "--out", help="output directory")
    common.add_argument("--json", action="store_true", help="print a versioned JSON report")

    p = _Parser(prog="dfhls", description="Dataflow graphs for HLS: transform, expand, analyze, simulate and emit code.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sp = sub.add_parser("validate", parents=[common], help="check a graph")
    sp.add_argument("graph")
    sp = sub.add_parser("expand", parents=[common], help="expand every library node")
    sp.add_argument("graph")
    sp.add_argument("--expansion", action="append", metavar="LABEL=IMPL", help="force an implementation for one node")
    sp = sub.add_parser("transform", parents=[common], help="apply named passes in order")
    sp.add_argument("graph")
    sp.add_argument("--pass", dest="passes", action="append", required=True, metavar="NAME")
    sp.add_argument("--container")
    sp.add_argument("--values", help="comma list or tensor file for input-to-constant")
    sp = sub.add_parser("auto", parents=[common], help="run the automatic pipeline")
    sp.add_argument("graph")
    sp.add_argument("--expansion", action="append", metavar="LABEL=IMPL")
    sp = sub.add_parser("analyze", parents=[common], help="off-chip volume, components, stream balance")
    sp.add_argument("graph")
    sp = sub.add_parser("simulate", parents=[common], help="run the reference or the concurrent simulator")
    sp.add_argument("graph")
    sp.add_argument("--mode", choices=("reference", "concurrent"), default="reference")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--input", action="append", metavar="CONTAINER=PATH")
    sp = sub.add_parser("codegen", parents=[common], help="emit host and device sources")
    sp.add_argument("graph")
    sp.add_argument("--dialect", choices=("F", "K"), help="default follows the target's PE style")
    sp = sub.add_parser("stencil", parents=[common], help="build a graph from a stencil program")
    sp.add_argument("program")
    sp.add_argument("--name", default="stencil")
    sp.add_argument("--expand", action="store_true", help="expand the stencil nodes for the target")
    sp.add_argument("--zero-delays", action="store_true", help="drop the planned delay buffers")
    sp = sub.add_parser("fixture", parents=[common], help="write a shipped example graph")
    sp.add_argument("name")
    return p


HANDLERS = {
    "validate": cmd_validate,
    "expand": cmd_expand,
    "transform": cmd_transform,
    "auto": cmd_auto,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "codegen": cmd_codegen,
    "stencil": cmd_stencil,
    "fixture": cmd_fixture,
}


def _emit(args, command: str, code: int, payload: dict, lines: List[str], out=None):
    out = out or sys.stdout
    if getattr(args, "json", False):
        doc = {"schema": JSON_SCHEMA, "version": JSON_VERSION, "command": command, "exit_code": code, **payload}
        text = json.dumps(doc, indent=2, sort_keys=True, default=str)
        print(text, file=out)
        if getattr(args, "out", None):
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / f"{command}.json").write_text(text + "\n")
    else:
        for ln in lines:
            print(ln, file=out)


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.W < 1:
            raise UsageError("-W must be at least 1")
        code, payload, lines = HANDLERS[args.command](args)
    except UsageError as exc:
        print(f"dfhls: usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (CodegenError, ExpansionError, UnboundSymbolError, ValueError, RuntimeError) as exc:
        _emit(args, args.command, 1, {"error": f"{type(exc).__name__}: {exc}"}, [f"error: {exc}"], sys.stderr)
        return 1
    _emit(args, args.command, code, payload, lines)
    return code


if __name__ == "__main__":
    sys.exit(main())
