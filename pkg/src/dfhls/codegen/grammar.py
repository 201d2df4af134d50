"""Parser for the emitted mini-language and structural checks of an EmittedProgram.

The grammar itself is written out in ``docs/emitted-grammar.ebnf``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

SCALAR_TYPES = ("float", "double", "int", "long")
TYPE_START = SCALAR_TYPES + ("vec", "stream", "channel", "const")
ASSIGN_OPS = ("=", "+=", "-=", "*=", "/=")

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<annot>/\*@(?P<body>.*?)@\*/)"
    r"|(?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?f?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\+=|-=|\*=|/=|==|!=|<=|>=|&&|\|\||[-+*/%<>=!&?:;,()\[\]{}])",
    re.S,
)


class EmitSyntaxError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message, self.line, self.col = message, line, col


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | op | annot | eof
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class EmitDiagnostic:
    severity: str
    rule: str
    message: str
    file: Optional[str] = None
    line: Optional[int] = None
    col: Optional[int] = None

    def as_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}

    def __str__(self):
        where = ""
        if self.file is not None:
            where = self.file + (f":{self.line}:{self.col}" if self.line is not None else "") + ": "
        return f"{where}{self.severity}: {self.rule}: {self.message}"


def tokenize(text: str) -> List[Token]:
    out, pos, line, start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise EmitSyntaxError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup if m.lastgroup != "body" else "annot"
        col = pos - start + 1
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind == "annot":
            words = m.group("body").split()
            if not words:
                raise EmitSyntaxError("empty annotation", line, col)
            out.append(Token("annot", " ".join(words), line, col))
            line += m.group(0).count("\n")
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(0), line, col))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


# syntax tree: only what the cross-checks need -----------------------------------


@dataclass
class TypeRef:
    base: str
    args: Tuple[str, ...] = ()
    const: bool = False

    def __str__(self):
        inner = f"{self.base}<{', '.join(self.args)}>" if self.args else self.base
        return ("const " if self.const else "") + inner


@dataclass
class Decl:
    type: TypeRef
    name: str
    pointer: bool
    restrict: bool
    dims: Tuple[str, ...]
    line: int


@dataclass
class Loop:
    var: str
    annotations: List[str]
    body: list
    line: int


@dataclass
class Call:
    name: str
    args: List[str]
    line: int


@dataclass
class Function:
    name: str
    kernel: bool
    annotations: List[str]  # preceding the definition
    params: List[Decl]
    body: list
    line: int

    def walk(self):
        stack = list(self.body)
        while stack:
            x = stack.pop(0)
            yield x
            if isinstance(x, Loop):
                stack[:0] = x.body
            elif isinstance(x, list):
                stack[:0] = x


@dataclass
class SourceFile:
    functions: List[Function] = field(default_factory=list)
    globals: List[Decl] = field(default_factory=list)
    annotations: List[str] = field(default_factory=list)

    def function(self, name: str) -> Optional[Function]:
        return next((f for f in self.functions if f.name == name), None)


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise EmitSyntaxError(f"{msg}, found {tok.text or 'end of file'!r}", tok.line, tok.col)

    def take(self, text=None, kind=None) -> Token:
        t = self.tok
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind) or t.kind == "eof" and text is not None:
            self.error(f"expected {text or kind}")
        self.i += 1
        return t

    def accept(self, text) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.i += 1
            return True
        return False

    # file level
    def parse(self) -> SourceFile:
        out = SourceFile()
        pending: List[str] = []
        while self.tok.kind != "eof":
            if self.tok.kind == "annot":
                pending.append(self.take().text)
            elif self.tok.text in ("kernel", "void"):
                f = self.function()
                f.annotations = pending
                out.functions.append(f)
                pending = []
            elif self.tok.text in TYPE_START:
                out.globals.append(self.declaration())
                out.annotations += pending
                pending = []
            else:
                self.error("expected a function or a declaration")
        out.annotations += pending
        return out

    def function(self) -> Function:
        line = self.tok.line
        kernel = self.accept("kernel")
        self.take("void")
        name = self.take(kind="ident").text
        self.take("(")
        params = []
        if not self.accept(")"):
            params.append(self.declarator())
            while self.accept(","):
                params.append(self.declarator())
            self.take(")")
        return Function(name, kernel, [], params, self.block(), line)

    def type(self) -> TypeRef:
        const = self.accept("const")
        t = self.tok
        if t.text in SCALAR_TYPES:
            self.i += 1
            return TypeRef(t.text, (), const)
        if t.text == "vec":
            self.i += 1
            self.take("<")
            base = self.take(kind="ident").text
            if base not in SCALAR_TYPES:
                self.error("expected a scalar element type", self.toks[self.i - 1])
            self.take(",")
            width = self.take(kind="number").text
            self.take(">")
            return TypeRef("vec", (base, width), const)
        if t.text in ("stream", "channel"):
            self.i += 1
            self.take("<")
            inner = self.type()
            self.take(",")
            depth = self.take(kind="number").text
            self.take(">")
            return TypeRef(t.text, (str(inner), depth), const)
        self.error("expected a type")

    def declarator(self) -> Decl:
        line = self.tok.line
        ty = self.type()
        pointer = self.accept("*")
        restrict = pointer and self.accept("restrict")
        name = self.take(kind="ident").text
        dims = []
        while self.accept("["):
            dims.append(self.expr())
            self.take("]")
        return Decl(ty, name, pointer, restrict, tuple(dims), line)

    def declaration(self) -> Decl:
        d = self.declarator()
        if self.accept("="):
            if self.accept("{"):
                if not self.accept("}"):
                    self.expr()
                    while self.accept(","):
                        self.expr()
                    self.take("}")
            else:
                self.expr()
        self.take(";")
        return d

    def block(self) -> list:
        self.take("{")
        out = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            out.append(self.statement())
        return out

    def statement(self):
        t = self.tok
        if t.kind == "annot":
            self.i += 1
            return t.text
        if t.text == "{":
            return self.block()
        if t.text == "for" and t.kind == "ident":
            return self.for_loop()
        if t.text == "if" and t.kind == "ident":
            return self.if_stmt()
        if t.text in TYPE_START and t.kind == "ident":
            return self.declaration()
        line = t.line
        lhs = self.expr()
        call = self._last_call
        if self.tok.text in ASSIGN_OPS:
            self.i += 1
            self.expr()
            call = None
        self.take(";")
        if call is not None and call[2] == lhs:
            return Call(call[0], call[1], line)
        return None

    def for_loop(self) -> Loop:
        line = self.tok.line
        self.take("for")
        self.take("(")
        self.take("int")
        var = self.take(kind="ident").text
        self.take("=")
        self.expr()
        self.take(";")
        self.expr()
        self.take(";")
        if self.take(kind="ident").text != var:
            self.error(f"loop increment must update '{var}'", self.toks[self.i - 1])
        if self.tok.text not in ASSIGN_OPS[1:]:
            self.error("expected a compound assignment")
        self.i += 1
        self.expr()
        self.take(")")
        return Loop(var, [], self.block(), line)

    def if_stmt(self):
        self.take("if")
        self.take("(")
        self.expr()
        self.take(")")
        body = self.block()
        if self.accept("else"):
            body += [self.if_stmt()] if self.tok.text == "if" else self.block()
        return body

    # expressions return their source text
    _last_call = None

    def expr(self) -> str:
        start = self.i
        self._ternary()
        return " ".join(t.text for t in self.toks[start:self.i])

    def _ternary(self):
        self._binary(0)
        if self.accept("?"):
            self._ternary()
            self.take(":")
            self._ternary()

    _LEVELS = (("||",), ("&&",), ("==", "!=", "<", "<=", ">", ">="), ("+", "-"), ("*", "/", "%"))

    def _binary(self, level):
        if level == len(self._LEVELS):
            return self._unary()
        self._binary(level + 1)
        while self.tok.kind == "op" and self.tok.text in self._LEVELS[level]:
            self.i += 1
            self._binary(level + 1)

    def _unary(self):
        if self.tok.kind == "op" and self.tok.text in ("-", "+", "!", "&"):
            self.i += 1
            return self._unary()
        start = self.i
        t = self.tok
        if t.kind in ("ident", "number"):
            self.i += 1
        elif self.accept("("):
            self.expr()
            self.take(")")
        else:
            self.error("expected an expression")
        self._last_call = None
        while True:
            if self.accept("["):
                self.expr()
                self.take("]")
            elif t.kind == "ident" and self.tok.text == "(":
                self.i += 1
                args = []
                if not self.accept(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                    self.take(")")
                self._last_call = (t.text, args, " ".join(x.text for x in self.toks[start:self.i]))
            else:
                break


def _attach(items: list) -> list:
    """Move annotations that precede a loop onto the loop."""
    out, pending = [], []
    for x in items:
        if isinstance(x, str):
            pending.append(x)
            continue
        if isinstance(x, Loop):
            x.annotations = pending
            x.body = _attach(x.body)
            pending = []
        elif isinstance(x, list):
            x[:] = _attach(x)
        out += [a for a in pending]
        pending = []
        out.append(x)
    return out + pending


def parse_source(text: str) -> SourceFile:
    """Parse one emitted file; raises EmitSyntaxError with a line and column."""
    f = _Parser(text).parse()
    for fn in f.functions:
        fn.body = _attach(fn.body)
    return f


# cross-checks -------------------------------------------------------------------


def _stream_key(d: Decl) -> Tuple[str, str, int, Tuple[str, ...]]:
    return (d.name, d.type.args[0], int(d.type.args[1]), tuple(x.replace(" ", "") for x in d.dims))


def _manifest_key(e: dict):
    return (e["name"], e["type"], int(e["depth"]), tuple(x.replace(" ", "") for x in e["extent"]))


def _annotations(fn: Function) -> List[str]:
    out = []
    for x in fn.walk():
        if isinstance(x, str):
            out.append(x)
        elif isinstance(x, Loop):
            out += x.annotations
    return out


def check_pipeline_rule(fn: Function) -> List[str]:
    """Violations of: one PIPELINE per nest, nothing annotated inside a pipelined loop."""
    problems = []

    def visit(items, piped):
        for x in items:
            if isinstance(x, Loop):
                anns = [a.split()[0] for a in x.annotations]
                if piped and anns:
                    problems.append(f"loop over '{x.var}' (line {x.line}) inside a pipelined loop is annotated")
                visit(x.body, piped or "PIPELINE" in anns)
            elif isinstance(x, list):
                visit(x, piped)

    visit(fn.body, False)
    return problems


def check_emitted(p) -> List[EmitDiagnostic]:
    """Parse every file of ``p`` and cross-check it against its manifest."""
    diags: List[EmitDiagnostic] = []

    def err(rule, msg, file=None, line=None, col=None):
        diags.append(EmitDiagnostic("error", rule, msg, file, line, col))

    try:
        manifest = json.loads(p.files["manifest.json"])
    except KeyError:
        err("manifest", "manifest.json is missing")
        return diags
    except json.JSONDecodeError as exc:
        err("manifest", f"manifest.json is not JSON: {exc.msg}", "manifest.json", exc.lineno, exc.colno)
        return diags
    parsed: Dict[str, SourceFile] = {}
    for fname, text in sorted(p.files.items()):
        if not fname.endswith(".src"):
            continue
        try:
            parsed[fname] = parse_source(text)
        except EmitSyntaxError as exc:
            err("syntax", exc.message, fname, exc.line, exc.col)
    if diags:
        return diags
    dialect = manifest.get("dialect")
    kernels = manifest.get("kernels", [])
    names = [k["name"] for k in kernels]
    if len(set(names)) != len(names):
        err("manifest", "kernel names are not unique")
    declared = []
    functions = 0
    for k in kernels:
        src = parsed.get(k["file"])
        if src is None:
            err("manifest", f"kernel '{k['name']}' refers to missing file '{k['file']}'")
            continue
        fn = src.function(k["name"])
        if fn is None:
            err("kernel", f"'{k['file']}' does not define '{k['name']}'", k["file"])
            continue
        buffers = [a for a in k["args"] if a["kind"] == "buffer"]
        restrict = [d for d in fn.params if d.restrict]
        if len(restrict) != len(buffers):
            err("restrict", f"'{k['name']}' has {len(restrict)} restrict arguments, the manifest lists {len(buffers)} buffers", k["file"], fn.line)
        if [d.name for d in fn.params] != [a["name"] for a in k["args"]]:
            err("arguments", f"parameters of '{k['name']}' differ from the manifest", k["file"], fn.line)
        for problem in check_pipeline_rule(fn):
            err("pipeline", problem, k["file"], fn.line)
        if dialect == "F":
            if not fn.body or fn.body[0] != "DATAFLOW":
                err("dataflow", f"'{k['name']}' does not open with a DATAFLOW annotation", k["file"], fn.line)
            declared += [d for d in fn.walk() if isinstance(d, Decl) and d.type.base == "stream"]
            pes = [f.name for f in src.functions if f.name != k["name"]]
            if sorted(pes) != sorted(k.get("functions", [])):
                err("pe-count", f"'{k['file']}' defines PE functions {pes}, the manifest lists {k.get('functions', [])}", k["file"])
            for f in src.functions:
                for problem in check_pipeline_rule(f):
                    err("pipeline", problem, k["file"], f.line)
            functions += len(pes)
        else:
            if not fn.kernel:
                err("kernel", f"'{k['name']}' is not declared as a kernel", k["file"], fn.line)
            if ("autorun" in fn.annotations) != bool(k["autorun"]):
                err("autorun", f"autorun marking of '{k['name']}' disagrees with the manifest", k["file"], fn.line)
            if k["autorun"] and k["args"]:
                err("autorun", f"'{k['name']}' is autorun but takes arguments", k["file"], fn.line)
            declared += [d for d in src.globals if d.type.base == "channel"]
            functions += sum(1 for f in src.functions if f.kernel)
    if functions != manifest.get("pes"):
        err("pe-count", f"{functions} PE {'functions' if dialect == 'F' else 'kernels'} emitted, the manifest counts {manifest.get('pes')}")
    want = sorted({_manifest_key(e) for e in manifest.get("streams", [])})
    got = sorted({_stream_key(d) for d in declared})
    if want != got:
        err("streams", f"declared streams {got} differ from the manifest {want}")
    host = parsed.get(manifest.get("host", ""))
    if host is None:
        err("host", "host source is missing")
    else:
        launched = [x.args[0] for f in host.functions for x in f.walk() if isinstance(x, Call) and x.name == "launch"]
        if launched != manifest.get("launch_order"):
            err("host", f"host launches {launched}, the manifest orders {manifest.get('launch_order')}", manifest["host"])
        if not any(isinstance(x, Call) and x.name == "wait_all" for f in host.functions for x in f.walk()):
            err("host", "host never waits for its kernels", manifest["host"])
    return diags


def count_annotations(fn: Function, token: str) -> int:
    return sum(1 for a in _annotations(fn) if a.split()[0] == token)
