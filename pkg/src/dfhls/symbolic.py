"""Symbolic integer expressions.

Expressions are kept in a sum-of-products normal form: a sorted tuple of
``(monomial, coefficient)`` terms, where a monomial is a sorted tuple of
``(atom, power)`` pairs. Atoms are either symbol names or opaque floor-division
and modulo terms, which are never distributed over. Two expressions that are
equal as polynomials (with the opaque terms compared structurally) therefore
compare equal and hash identically.

Grammar accepted by :func:`parse_expr`::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/" | "%") unary)*
    unary   := ("-" | "+") unary | primary
    primary := INTEGER | IDENTIFIER | "(" expr ")"

``/`` is floor division (rounds toward negative infinity) and ``%`` is the
matching modulo, so that ``a == (a/b)*b + a%b`` holds.
"""

from __future__ import annotations

import re
from typing import Callable, Dict, Iterable, Mapping, Tuple, Union

__all__ = [
    "SymExpr",
    "ExprSyntaxError",
    "UnboundSymbolError",
    "parse_expr",
    "sym",
    "as_expr",
    "evaluate",
    "equals_under_renaming",
    "compile_expr",
]

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}" + (f" in {text!r}" if text else ""))
        self.offset = offset
        self.text = text


class UnboundSymbolError(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unbound symbol '{self.name}'"


class _Opaque:
    """Floor-division or modulo kept as a single atom."""

    __slots__ = ("op", "num", "den", "_key")

    def __init__(self, op: str, num: "SymExpr", den: "SymExpr"):
        self.op = op
        self.num = num
        self.den = den
        self._key = (1, op, num._sort_key(), den._sort_key())

    def __eq__(self, other):
        return isinstance(other, _Opaque) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def free_symbols(self):
        return self.num.free_symbols | self.den.free_symbols


def _atom_key(atom):
    if isinstance(atom, str):
        return (0, atom)
    return atom._key


Monomial = Tuple[Tuple[object, int], ...]


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    powers: Dict[object, int] = {}
    for atom, p in a:
        powers[atom] = powers.get(atom, 0) + p
    for atom, p in b:
        powers[atom] = powers.get(atom, 0) + p
    return tuple(sorted(powers.items(), key=lambda ap: _atom_key(ap[0])))


def _mono_key(m: Monomial):
    return tuple((_atom_key(a), p) for a, p in m)


class SymExpr:
    """Immutable canonical symbolic integer expression."""

    __slots__ = ("_terms", "_hash", "_free")

    def __init__(self, terms: Mapping[Monomial, int] = None):
        items = [(m, c) for m, c in (terms or {}).items() if c != 0]
        items.sort(key=lambda mc: (-sum(p for _, p in mc[0]), _mono_key(mc[0])))
        self._terms: Tuple[Tuple[Monomial, int], ...] = tuple(items)
        self._hash = hash(self._terms)
        self._free = None

    # construction ------------------------------------------------------
    @staticmethod
    def const(value: int) -> "SymExpr":
        value = int(value)
        return SymExpr({(): value})

    @staticmethod
    def symbol(name: str) -> "SymExpr":
        return SymExpr({((name, 1),): 1})

    # queries -----------------------------------------------------------
    @property
    def terms(self):
        return self._terms

    @property
    def is_constant(self) -> bool:
        return all(m == () for m, _ in self._terms)

    @property
    def value(self) -> int:
        if not self.is_constant:
            raise ValueError(f"expression '{self}' is not constant")
        return self._terms[0][1] if self._terms else 0

    @property
    def free_symbols(self) -> frozenset:
        if self._free is None:
            names = set()
            for m, _ in self._terms:
                for atom, _ in m:
                    if isinstance(atom, str):
                        names.add(atom)
                    else:
                        names |= atom.free_symbols()
            self._free = frozenset(names)
        return self._free

    def _sort_key(self):
        return tuple((_mono_key(m), c) for m, c in self._terms)

    def __eq__(self, other):
        if isinstance(other, int):
            other = SymExpr.const(other)
        return isinstance(other, SymExpr) and self._terms == other._terms

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"SymExpr({str(self)!r})"

    # arithmetic --------------------------------------------------------
    def __add__(self, other):
        other = as_expr(other)
        acc = dict(self._terms)
        for m, c in other._terms:
            acc[m] = acc.get(m, 0) + c
        return SymExpr(acc)

    __radd__ = __add__

    def __neg__(self):
        return SymExpr({m: -c for m, c in self._terms})

    def __sub__(self, other):
        return self + (-as_expr(other))

    def __rsub__(self, other):
        return as_expr(other) - self

    def __mul__(self, other):
        other = as_expr(other)
        acc: Dict[Monomial, int] = {}
        for m1, c1 in self._terms:
            for m2, c2 in other._terms:
                m = _mono_mul(m1, m2)
                acc[m] = acc.get(m, 0) + c1 * c2
        return SymExpr(acc)

    __rmul__ = __mul__

    def __floordiv__(self, other):
        return _divmod_term("/", self, as_expr(other))

    def __rfloordiv__(self, other):
        return _divmod_term("/", as_expr(other), self)

    def __mod__(self, other):
        return _divmod_term("%", self, as_expr(other))

    def __rmod__(self, other):
        return _divmod_term("%", as_expr(other), self)

    # transformation ----------------------------------------------------
    def substitute(self, mapping: Mapping[str, Union["SymExpr", int, str]]) -> "SymExpr":
        if not mapping or not (self.free_symbols & set(mapping)):
            return self
        repl = {k: as_expr(v) for k, v in mapping.items()}
        result = SymExpr()
        for m, c in self._terms:
            term = SymExpr.const(c)
            for atom, p in m:
                if isinstance(atom, str):
                    base = repl.get(atom, SymExpr.symbol(atom))
                else:
                    base = _divmod_term(atom.op, atom.num.substitute(repl), atom.den.substitute(repl))
                for _ in range(p):
                    term = term * base
            result = result + term
        return result

    def evaluate(self, binding: Mapping[str, int]) -> int:
        return evaluate(self, binding)

    def __str__(self):
        return _print(self)


def _divmod_term(op: str, num: SymExpr, den: SymExpr) -> SymExpr:
    if den.is_constant:
        d = den.value
        if d == 0:
            raise ZeroDivisionError(f"division by zero in '{num}{op}0'")
        if num.is_constant:
            return SymExpr.const(num.value // d if op == "/" else num.value % d)
        if d in (1, -1):
            return num * d if op == "/" else SymExpr.const(0)
        # (d*q + r)/d == q + r/d when every non-constant coefficient is a multiple of d
        const = dict(num.terms).get((), 0)
        if all(c % d == 0 for m, c in num.terms if m != ()):
            quotient = SymExpr({m: c // d for m, c in num.terms if m != ()})
            if op == "/":
                return quotient + SymExpr.const(const // d)
            return SymExpr.const(const % d)
    if num.is_constant and num.value == 0:
        return SymExpr.const(0)
    return SymExpr({((_Opaque(op, num, den), 1),): 1})


def as_expr(value) -> SymExpr:
    if isinstance(value, SymExpr):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not symbolic integers")
    if isinstance(value, int):
        return SymExpr.const(value)
    if isinstance(value, str):
        return parse_expr(value)
    if hasattr(value, "__index__"):
        return SymExpr.const(value.__index__())
    raise TypeError(f"cannot convert {type(value).__name__} to SymExpr")


def sym(name: str) -> SymExpr:
    return SymExpr.symbol(name)


# printing --------------------------------------------------------------


def _print_operand(e: SymExpr) -> str:
    s = _print(e)
    if len(e.terms) == 1:
        m, c = e.terms[0]
        if m == () and c >= 0:
            return s
        if c == 1 and len(m) == 1 and m[0][1] == 1 and isinstance(m[0][0], str):
            return s
    return f"({s})"


def _print_atom(atom) -> str:
    if isinstance(atom, str):
        return atom
    return f"{_print_operand(atom.num)}{atom.op}{_print_operand(atom.den)}"


def _print_monomial(m: Monomial, alone: bool) -> str:
    parts = []
    for atom, p in m:
        text = _print_atom(atom)
        if not isinstance(atom, str) and not (alone and p == 1 and len(m) == 1):
            text = f"({text})"
        parts.extend([text] * p)
    return "*".join(parts)


def _print(e: SymExpr) -> str:
    if not e.terms:
        return "0"
    out = []
    for i, (m, c) in enumerate(e.terms):
        neg = c < 0
        mag = -c if neg else c
        if m == ():
            body = str(mag)
        elif mag == 1:
            body = _print_monomial(m, alone=not neg)
        else:
            body = f"{mag}*{_print_monomial(m, alone=False)}"
        if i == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


# parsing ---------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:  # trailing whitespace
            break
        start = m.start(m.lastindex) if m.lastindex else m.end()
        if m.group(1) is not None:
            tokens.append(("int", m.group(1), start))
        elif m.group(2) is not None:
            tokens.append(("name", m.group(2), start))
        elif m.group(3) is not None:
            ch = m.group(3)
            if ch not in "+-*/%()":
                raise ExprSyntaxError(f"unexpected character {ch!r}", start, text)
            tokens.append(("op", ch, start))
        pos = m.end()
    tokens.append(("end", "", len(text.encode("utf-8"))))
    # byte offsets: text is expected to be ASCII, convert for safety
    return [(k, v, len(text[:o].encode("utf-8")) if k != "end" else o) for k, v, o in tokens]


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(msg, tok[2], self.text)

    def parse(self) -> SymExpr:
        if self.peek()[0] == "end":
            self.error("empty expression")
        e = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/"), ("op", "%")):
            optok = self.take()
            rhs = self.unary()
            if optok[1] == "*":
                e = e * rhs
            else:
                if rhs.is_constant and rhs.value == 0:
                    self.error("division by literal zero", optok)
                e = e // rhs if optok[1] == "/" else e % rhs
        return e

    def unary(self):
        tok = self.peek()
        if tok[:2] == ("op", "-"):
            self.take()
            return -self.unary()
        if tok[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.primary()

    def primary(self):
        tok = self.take()
        if tok[0] == "int":
            return SymExpr.const(int(tok[1]))
        if tok[0] == "name":
            return SymExpr.symbol(tok[1])
        if tok[:2] == ("op", "("):
            e = self.expr()
            if self.peek()[:2] != ("op", ")"):
                self.error("expected ')'")
            self.take()
            return e
        if tok[0] == "end":
            self.error("unexpected end of expression", tok)
        self.error(f"unexpected token {tok[1]!r}", tok)


def parse_expr(text: str) -> SymExpr:
    """Parse ``text`` into a canonical :class:`SymExpr`."""
    if isinstance(text, SymExpr):
        return text
    return _Parser(str(text)).parse()


# evaluation ------------------------------------------------------------


def _checked(v: int) -> int:
    if v < INT64_MIN or v > INT64_MAX:
        raise OverflowError(f"integer overflow: {v} exceeds 64-bit range")
    return v


def _eval_atom(atom, binding) -> int:
    if isinstance(atom, str):
        try:
            return int(binding[atom])
        except KeyError:
            raise UnboundSymbolError(atom) from None
    num = evaluate(atom.num, binding)
    den = evaluate(atom.den, binding)
    if den == 0:
        raise ZeroDivisionError(f"division by zero evaluating '{_print_atom(atom)}'")
    return num // den if atom.op == "/" else num % den


def evaluate(e: SymExpr, binding: Mapping[str, int]) -> int:
    """Exact evaluation with 64-bit overflow checking."""
    e = as_expr(e)
    total = 0
    for m, c in e.terms:
        t = c
        for atom, p in m:
            v = _eval_atom(atom, binding)
            for _ in range(p):
                t = _checked(t * v)
        total = _checked(total + t)
    return total


def equals_under_renaming(a, b, rename: Mapping[str, str]) -> bool:
    a, b = as_expr(a), as_expr(b)
    return a.substitute({k: SymExpr.symbol(v) for k, v in rename.items()}) == b


def _pysrc_atom(atom) -> str:
    if isinstance(atom, str):
        return f"env[{atom!r}]"
    op = "//" if atom.op == "/" else "%"
    return f"({_pysrc(atom.num)} {op} {_pysrc(atom.den)})"


def _pysrc(e: SymExpr) -> str:
    if not e.terms:
        return "0"
    parts = []
    for m, c in e.terms:
        factors = [str(c)] if (c != 1 or m == ()) else []
        for atom, p in m:
            factors.extend([_pysrc_atom(atom)] * p)
        parts.append("*".join(factors))
    return "(" + " + ".join(parts) + ")"


_COMPILED: Dict[SymExpr, Callable] = {}


def compile_expr(e: SymExpr) -> Callable[[Mapping[str, int]], int]:
    """Return a fast evaluator ``f(env) -> int`` (no overflow checks)."""
    e = as_expr(e)
    fn = _COMPILED.get(e)
    if fn is None:
        fn = eval(f"lambda env: {_pysrc(e)}")  # source built from canonical terms only
        _COMPILED[e] = fn
    return fn


def product(exprs: Iterable) -> SymExpr:
    out = SymExpr.const(1)
    for e in exprs:
        out = out * as_expr(e)
    return out
