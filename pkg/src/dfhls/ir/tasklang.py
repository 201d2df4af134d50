"""The tasklet body language.

Tasklet bodies are a small subset of Python: assignments to output connectors,
optionally guarded by ``if`` statements. Expressions may use arithmetic,
comparisons, boolean operators, conditional expressions, constant or symbolic
subscripts into vector-valued connectors, and ``min``/``max``/``abs``.

A guarded output that is not assigned during one execution is neither written
nor pushed; the memlet carrying it must be dynamic. Inputs on dynamic memlets
are fetched lazily, only when the body actually reads them.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, FrozenSet, Tuple

_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/", ast.FloorDiv: "//", ast.Mod: "%"}
_CMPOPS = {ast.Lt: "<", ast.LtE: "<=", ast.Gt: ">", ast.GtE: ">=", ast.Eq: "==", ast.NotEq: "!="}
_CALLS = {"min", "max", "abs"}


class TaskletSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class TaskletProgram:
    code: str
    reads: FrozenSet[str]  # every free name read in expressions
    writes: Tuple[str, ...]  # assigned names, in first-assignment order
    guarded: FrozenSet[str]  # names assigned only under a condition
    fn: Callable

    def run(self, inputs, env):
        """Execute with ``inputs`` (mapping-like, may be lazy) and ``env``.

        Returns a dict of the outputs assigned in this execution.
        """
        out = {}
        self.fn(inputs, env, out)
        return out


def _check_expr(node, reads):
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float, bool)):
            raise TaskletSyntaxError(f"unsupported constant {node.value!r}")
    elif isinstance(node, ast.Name):
        reads.add(node.id)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise TaskletSyntaxError(f"unsupported operator {type(node.op).__name__}")
        _check_expr(node.left, reads)
        _check_expr(node.right, reads)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd, ast.Not)):
            raise TaskletSyntaxError("unsupported unary operator")
        _check_expr(node.operand, reads)
    elif isinstance(node, ast.Compare):
        if any(type(op) not in _CMPOPS for op in node.ops):
            raise TaskletSyntaxError("unsupported comparison")
        _check_expr(node.left, reads)
        for c in node.comparators:
            _check_expr(c, reads)
    elif isinstance(node, ast.BoolOp):
        for v in node.values:
            _check_expr(v, reads)
    elif isinstance(node, ast.IfExp):
        for v in (node.test, node.body, node.orelse):
            _check_expr(v, reads)
    elif isinstance(node, ast.Subscript):
        if not isinstance(node.value, ast.Name):
            raise TaskletSyntaxError("only connectors can be subscripted")
        reads.add(node.value.id)
        idx = node.slice
        for part in idx.elts if isinstance(idx, ast.Tuple) else [idx]:
            _check_expr(part, reads)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _CALLS or node.keywords:
            raise TaskletSyntaxError("only min/max/abs calls are allowed")
        for a in node.args:
            _check_expr(a, reads)
    else:
        raise TaskletSyntaxError(f"unsupported expression {type(node).__name__}")


def _check_stmts(stmts, reads, writes, guarded, under_guard):
    for st in stmts:
        if isinstance(st, ast.Assign):
            if len(st.targets) != 1 or not isinstance(st.targets[0], ast.Name):
                raise TaskletSyntaxError("assignments must target a single output connector")
            _check_expr(st.value, reads)
            name = st.targets[0].id
            if name not in writes:
                writes.append(name)
            if under_guard:
                guarded.add(name)
        elif isinstance(st, ast.If):
            _check_expr(st.test, reads)
            _check_stmts(st.body, reads, writes, guarded, True)
            _check_stmts(st.orelse, reads, writes, guarded, True)
        elif isinstance(st, ast.Pass):
            pass
        else:
            raise TaskletSyntaxError(f"unsupported statement {type(st).__name__}")


class _Rewriter(ast.NodeTransformer):
    """Route stores to the output dict and loads through the reader closure."""

    def visit_Name(self, node):
        if isinstance(node.ctx, ast.Store):
            return ast.copy_location(
                ast.Subscript(value=ast.Name("__O", ast.Load()), slice=ast.Constant(node.id), ctx=ast.Store()), node
            )
        return ast.copy_location(ast.Call(func=ast.Name("__R", ast.Load()), args=[ast.Constant(node.id)], keywords=[]), node)

    def visit_Call(self, node):
        node.args = [self.visit(a) for a in node.args]
        return node


@lru_cache(maxsize=4096)
def parse_tasklet(code: str) -> TaskletProgram:
    try:
        tree = ast.parse(code, mode="exec")
    except SyntaxError as e:
        raise TaskletSyntaxError(f"tasklet syntax error: {e.msg} (line {e.lineno}, col {e.offset})") from None
    reads, writes, guarded = set(), [], set()
    _check_stmts(tree.body, reads, writes, guarded, False)
    reads -= _CALLS
    # names both written and read later are locals, not inputs
    body = _Rewriter().visit(ast.parse(code))
    fn_def = ast.FunctionDef(
        name="__tasklet",
        args=ast.arguments(
            posonlyargs=[],
            args=[ast.arg("__I"), ast.arg("__E"), ast.arg("__O")],
            kwonlyargs=[],
            kw_defaults=[],
            defaults=[],
        ),
        body=[_make_reader()] + (body.body or [ast.Pass()]),
        decorator_list=[],
    )
    module = ast.Module(body=[fn_def], type_ignores=[])
    ast.fix_missing_locations(module)
    ns = {"min": min, "max": max, "abs": abs}
    exec(compile(module, "<tasklet>", "exec"), ns)
    return TaskletProgram(code, frozenset(reads), tuple(writes), frozenset(guarded), ns["__tasklet"])


def _make_reader():
    # def __R(name): return __O[name] if name in __O else (__I[name] if name in __I else __E[name])
    src = (
        "def __R(name):\n"
        "    if name in __O:\n"
        "        return __O[name]\n"
        "    if name in __I:\n"
        "        return __I[name]\n"
        "    return __E[name]\n"
    )
    return ast.parse(src).body[0]


# C-like rendering ---------------------------------------------------------


def _c_expr(node, rename) -> str:
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool):
            return "1" if node.value else "0"
        if isinstance(node.value, float):
            return repr(node.value) + "f" if "e" not in repr(node.value) else repr(node.value)
        return str(node.value)
    if isinstance(node, ast.Name):
        return rename(node.id)
    if isinstance(node, ast.BinOp):
        op = _BINOPS[type(node.op)]
        op = "/" if op == "//" else op
        return f"({_c_expr(node.left, rename)} {op} {_c_expr(node.right, rename)})"
    if isinstance(node, ast.UnaryOp):
        op = {ast.USub: "-", ast.UAdd: "+", ast.Not: "!"}[type(node.op)]
        return f"({op}{_c_expr(node.operand, rename)})"
    if isinstance(node, ast.Compare):
        parts = []
        left = node.left
        for op, right in zip(node.ops, node.comparators):
            parts.append(f"({_c_expr(left, rename)} {_CMPOPS[type(op)]} {_c_expr(right, rename)})")
            left = right
        return parts[0] if len(parts) == 1 else "(" + " && ".join(parts) + ")"
    if isinstance(node, ast.BoolOp):
        op = " && " if isinstance(node.op, ast.And) else " || "
        return "(" + op.join(_c_expr(v, rename) for v in node.values) + ")"
    if isinstance(node, ast.IfExp):
        return f"({_c_expr(node.test, rename)} ? {_c_expr(node.body, rename)} : {_c_expr(node.orelse, rename)})"
    if isinstance(node, ast.Subscript):
        idx = node.slice
        parts = idx.elts if isinstance(idx, ast.Tuple) else [idx]
        return rename(node.value.id) + "".join(f"[{_c_expr(p, rename)}]" for p in parts)
    if isinstance(node, ast.Call):
        return f"{node.func.id}(" + ", ".join(_c_expr(a, rename) for a in node.args) + ")"
    raise TaskletSyntaxError(f"cannot render {type(node).__name__}")


def to_c_statements(code: str, rename=lambda n: n, assign=None):
    """Render a tasklet body as C-like statement lines.

    ``assign(name, expr_text)`` produces the statement for an output write.
    """
    parse_tasklet(code)
    tree = ast.parse(code)
    assign = assign or (lambda name, text: f"{rename(name)} = {text};")
    lines = []

    def emit(stmts, indent):
        for st in stmts:
            if isinstance(st, ast.Assign):
                lines.append("  " * indent + assign(st.targets[0].id, _c_expr(st.value, rename)))
            elif isinstance(st, ast.If):
                lines.append("  " * indent + f"if ({_c_expr(st.test, rename)}) {{")
                emit(st.body, indent + 1)
                if st.orelse:
                    lines.append("  " * indent + "} else {")
                    emit(st.orelse, indent + 1)
                lines.append("  " * indent + "}")

    emit(tree.body, 0)
    return lines


def substitute_names(code: str, mapping) -> str:
    """Replace free names in a tasklet body.

    Values in ``mapping`` are numbers (folded as literals) or Python expression
    source (e.g. another name or a table lookup).
    """
    tree = ast.parse(code)

    class _Sub(ast.NodeTransformer):
        def visit_Name(self, node):
            if isinstance(node.ctx, ast.Load) and node.id in mapping:
                v = mapping[node.id]
                if isinstance(v, str):
                    return ast.copy_location(ast.parse(v, mode="eval").body, node)
                return ast.copy_location(ast.Constant(v), node)
            return node

    new = _Sub().visit(tree)
    ast.fix_missing_locations(new)
    return ast.unparse(new)
