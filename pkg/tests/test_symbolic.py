import pytest

from dfhls.symbolic import (
    ExprSyntaxError,
    SymExpr,
    UnboundSymbolError,
    compile_expr,
    equals_under_renaming,
    evaluate,
    parse_expr,
    product,
    sym,
)


def test_canonical_forms_compare_equal():
    assert parse_expr("(a+b)*(a-b)") == parse_expr("a*a - b*b")
    assert parse_expr("2*(x+1) - 2") == parse_expr("x + x")
    assert parse_expr("N*M") == parse_expr("M*N")
    assert hash(parse_expr("N*M + 1")) == hash(parse_expr("1 + M*N"))


def test_floor_division_is_opaque():
    e = parse_expr("N/P*P")
    assert e != parse_expr("N")
    assert evaluate(e, {"N": 10, "P": 4}) == 8
    assert evaluate(parse_expr("-7/2"), {}) == -4
    assert evaluate(parse_expr("-7%2"), {}) == 1


def test_constant_folding():
    e = parse_expr("3*4 - 2")
    assert e.is_constant and e.value == 10


def test_whitespace_is_insignificant():
    assert parse_expr(" N +  1 ") == parse_expr("N+1")


def test_str_round_trip():
    for text in ("K*M*(N/P)", "N % 4 + 3", "-(a - b)*c", "2*N*N + 1"):
        e = parse_expr(text)
        assert parse_expr(str(e)) == e


def test_operators_on_symbols():
    n, p = sym("N"), sym("P")
    assert (n * p + 1) == parse_expr("N*P + 1")
    assert product([n, p, 2]) == parse_expr("2*N*P")
    assert (n - n).is_constant


def test_unbound_symbol():
    with pytest.raises(UnboundSymbolError) as exc:
        evaluate(parse_expr("N + M"), {"N": 1})
    assert "M" in str(exc.value)


@pytest.mark.parametrize("text", ["", "1 +", "a b", "(a", "a $ b", "3 / 0"])
def test_syntax_errors(text):
    with pytest.raises((ExprSyntaxError, ZeroDivisionError)):
        evaluate(parse_expr(text), {"a": 1, "b": 2})


def test_renaming():
    assert equals_under_renaming(parse_expr("i*N + j"), parse_expr("p*N + q"), {"i": "p", "j": "q"})
    assert not equals_under_renaming(parse_expr("i*N + j"), parse_expr("q*N + p"), {"i": "p", "j": "q"})


def test_compiled_matches_evaluate():
    e = parse_expr("K*M*(N/P) + N % 3")
    f = compile_expr(e)
    for b in ({"K": 2, "M": 3, "N": 17, "P": 4}, {"K": 16, "M": 16, "N": 16, "P": 4}):
        assert f(b) == evaluate(e, b)


def test_as_expr_from_int():
    assert SymExpr.const(5) == parse_expr("5")
