import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from lazecost.parser import ParseError, parse_expr, parse_module, print_expr, print_module
from lazecost.syntax import (AlgAlt, App, CaseAlg, ConRef, DataDecl, Lam, Let, LetRec, Lit,
                             Literal, Module, NonRec, Prim, Rec, RecGroup, Ref, Var, free_vars,
                             module_to_expr)

from oracles import NAMES, random_term, reference_free_vars

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
LIST = DataDecl("List", (("Nil", ()), ("Cons", (Prim(), Rec()))))


def test_parse_module_with_sugar():
    m = parse_module("data IntList = Nil | Cons(Prim, IntList); "
                     "main it = let one = 1 in Cons one it;")
    assert len(m.decls) == 1 and m.main == "it"
    assert m.decls[0].constructors == (("Nil", ()), ("Cons", (Prim(), Rec())))
    # `it` refers to itself, so it forms a recursive group
    assert isinstance(m.binds[0], RecGroup)


def test_letrec_expression():
    m = parse_module("data L = Nil | Cons(Prim, L); "
                     "f one = letrec xs = Cons one xs in xs;")
    lam = m.binds[0].expr
    assert isinstance(lam, Lam) and isinstance(lam.body, LetRec)
    assert len(lam.body.bindings) == 1


def test_non_exhaustive_literal_case():
    with pytest.raises(ParseError, match="non-exhaustive literal case") as ei:
        parse_module("main x = case 1 of { 1 -> 2 };")
    assert (ei.value.line, ei.value.col) == (1, 10)


@pytest.mark.parametrize("src, msg", [
    ("main x = y;", "unbound identifier 'y'"),
    ("data A = C; data B = C; main x = 1;", "duplicate constructor"),
    ("main x = 1 $ 2;", "1:12"),
    ("data T = K(U); main x = 1;", "unknown datatype"),
    ("main x = case x of { };", "expected case alternative"),
    ("main x = case x of { default -> 1 };", "at least one"),
])
def test_parse_errors(src, msg):
    with pytest.raises(ParseError) as ei:
        parse_module(src)
    assert msg in str(ei.value)


def test_mutually_recursive_datatypes_rejected():
    with pytest.raises(ParseError, match="recursi"):
        parse_module("data A = MkA(B); data B = MkB(A); main x = 1;")


def test_ref_field():
    m = parse_module("data L = N | C(Prim, L); data P = MkP(L, Prim); main x = 1;")
    assert m.decl("P").fields("MkP") == (Ref("L"), Prim())


def test_literals():
    assert Literal("int", "-3").value == -3
    assert Literal("float", "2.5").value == 2.5
    assert Literal("char", "'a'").value == "a"
    with pytest.raises(ValueError):
        Literal("int", "1.5")


def test_letrec_invariants():
    with pytest.raises(ValueError):
        LetRec((), Var("x"))
    with pytest.raises(ValueError):
        LetRec((("x", Var("x")), ("x", Var("x"))), Var("x"))


def test_module_to_expr_single():
    m = Module([], [NonRec("f", Lit(Literal("int", "1")))], "f")
    assert module_to_expr(m) == Let("f", Lit(Literal("int", "1")), Var("f"))


def test_module_to_expr_fold_order():
    ea, eb, ec = Var("b"), Var("a"), Var("a")
    m = Module([], [RecGroup((("a", ea), ("b", eb))), NonRec("c", ec)], "c")
    assert module_to_expr(m) == LetRec((("a", ea), ("b", eb)), Let("c", ec, Var("c")))


def test_module_to_expr_closed():
    for path in CORPUS.glob("*.lzc"):
        e = module_to_expr(parse_module(path.read_text()))
        assert free_vars(e) <= {"+#", "-#", "*#", "<#", "==#"}, path.name


def test_free_vars_examples():
    assert free_vars(Var("x")) == {"x"}
    assert free_vars(Lam("x", App(Var("f"), Var("x")))) == {"f"}
    cons = App(App(ConRef("Cons"), Var("x")), Var("xs"))
    assert free_vars(LetRec((("xs", cons),), Var("xs"))) == {"x"}


def test_case_binder_scopes_over_alternatives():
    e = CaseAlg("y", Var("y"), (AlgAlt("Nil", (), Var("y")),), Var("y"))
    assert free_vars(e) == {"y"}  # only the scrutinee occurrence is free


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(0, 8))
def test_free_vars_matches_reference(seed, depth):
    e = random_term(random.Random(seed), depth)
    assert free_vars(e) == reference_free_vars(e)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(0, 6))
def test_expression_round_trip(seed, depth):
    e = random_term(random.Random(seed), depth)
    assert parse_expr(print_expr(e), [LIST], NAMES) == e


def _close(e):
    for x in sorted(free_vars(e)):
        e = Lam(x, e)
    return e


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 2 ** 32), min_size=1, max_size=4))
def test_module_round_trip(seeds):
    binds = [NonRec(f"top{i}", _close(random_term(random.Random(s), 4)))
             for i, s in enumerate(seeds)]
    m = Module([LIST], binds, binds[0].binder)
    assert parse_module(print_module(m)) == m


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.lzc")), ids=lambda p: p.stem)
def test_corpus_round_trip(path):
    m = parse_module(path.read_text())
    assert parse_module(print_module(m)) == m
