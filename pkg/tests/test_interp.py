from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from lazecost.annotypes import Con, Mu, PrimTy, Thunk, TyVar
from lazecost.infer import AnalysisFailure, CostModel, analyze
from lazecost.interp import (WHNF, BlackHole, ConV, FuelExhausted, LitV, Machine,
                             PatternMatchFailure, ShapeError, SpineElems, SpineN, ThunkCell,
                             aggregate_bound, demand_profile, eval_demand, eval_whnf,
                             list_costs, parse_demand, run_deep)
from lazecost.parser import parse_expr, parse_module
from lazecost.syntax import Lit, Literal, module_to_expr

from common import CORPUS_FILES, load

ALLOC, STEPS = CostModel.preset("alloc"), CostModel.preset("steps")
LIST = "data L = Nil | Cons(Prim, L);\n"


def solved_list(head, tail):
    return Mu("L", (Con("Nil", Fraction(0), ()),
                    Con("Cons", Fraction(0), (Thunk(Fraction(head), PrimTy()),
                                              Thunk(Fraction(tail), TyVar("L"))))))


def test_literal_costs_nothing():
    v, c = eval_whnf(Lit(Literal("int", "1")), STEPS)
    assert v == LitV(Literal("int", "1")) and c.total == 0


def test_demand_parsing():
    assert parse_demand("whnf") == WHNF()
    assert parse_demand("spine:4") == SpineN(4)
    assert parse_demand("elems:0") == SpineElems(0)
    for bad in ("spine", "elems:-1", "deep:3"):
        with pytest.raises(ValueError):
            parse_demand(bad)


def test_repeat_is_constant():
    m = load("repeat")
    one = eval_demand(m, ALLOC, SpineN(1)).total
    assert eval_demand(m, ALLOC, SpineN(100)).total == one
    assert eval_demand(m, ALLOC, WHNF()).total <= one


def test_repeat_unfold_is_linear():
    costs = demand_profile(load("repeat_unfold"), ALLOC, SpineN(20))
    steps = {b - a for a, b in zip(costs, costs[1:])}
    assert len(steps) == 1 and steps.pop() > 0


def test_spine_zero_is_whnf():
    for path in CORPUS_FILES:
        m = parse_module(path.read_text())
        assert eval_demand(m, STEPS, SpineN(0)).total == eval_demand(m, STEPS, WHNF()).total


@pytest.mark.parametrize("name", ["map_repeat", "nats", "take", "zipwith", "filter"])
def test_profile_matches_separate_runs(name):
    m = load(name)
    for demand in (SpineN(8), SpineElems(8)):
        prof = demand_profile(m, STEPS, demand)
        for k in (0, 1, 3, 8):
            assert prof[k] == eval_demand(m, STEPS, type(demand)(k)).total


@pytest.mark.parametrize("path", CORPUS_FILES, ids=lambda p: p.stem)
def test_cost_additivity(path):
    m = parse_module(path.read_text())
    try:
        prof = demand_profile(m, STEPS, SpineN(30))
    except ShapeError:
        return
    assert all(a <= b for a, b in zip(prof, prof[1:]))


def test_memoization():
    m = load("map_repeat")
    mach = Machine(m.decls, STEPS)
    e = parse_expr("let a = 1 in let b = 2 in let c = +# a b in +# c c", m.decls, [])
    addr = mach.alloc(ThunkCell({}, e))
    first = run_deep(lambda: mach.force(addr))
    after_first = dict(mach.counter.per_kind)
    second = run_deep(lambda: mach.force(addr))
    assert first == second and mach.counter.per_kind == after_first
    assert after_first["let"] == 3 and after_first["prim"] == 2  # c evaluated once


def _deep(mach, v, n=15):
    out = []
    while isinstance(v, ConV) and v.fields and n:
        h, t = v.fields
        out.append(mach.force(h))
        v, n = mach.force(t), n - 1
    return out


@pytest.mark.parametrize("name", ["map_repeat", "nats", "reverse", "filter", "zipwith"])
def test_values_independent_of_cost_model(name):
    e = module_to_expr(load(name))
    results = []
    for cm in (ALLOC, STEPS, CostModel()):
        mach = Machine(load(name).decls, cm)
        results.append(run_deep(lambda: _deep(mach, mach.eval(e, {}))))
    assert results[0] == results[1] == results[2]


def test_blackhole():
    m = parse_module("main r = letrec x = +# x 1 in x;")
    with pytest.raises(BlackHole):
        eval_whnf(m, STEPS)


def test_fuel():
    m = parse_module("rec { loop x = loop x; }\nmain r = loop 1;")
    with pytest.raises(FuelExhausted):
        eval_whnf(m, STEPS, fuel=10_000)


def test_pattern_match_failure():
    m = parse_module(LIST + "main r = case Nil of { Cons(h, t) -> 1 };")
    with pytest.raises(PatternMatchFailure):
        eval_whnf(m, STEPS)


def test_shape_errors():
    with pytest.raises(ShapeError):
        eval_demand(parse_module("main r = 1;"), STEPS, SpineN(2))
    with pytest.raises(ShapeError):
        eval_demand(load("tree"), STEPS, SpineN(2))
    with pytest.raises(ShapeError):
        list_costs(PrimTy())


def test_aggregate_bound_examples():
    t = solved_list(1, 3)
    assert [aggregate_bound(t, Fraction(9), SpineElems(n)) for n in (0, 1, 5)] == [9, 13, 29]
    assert aggregate_bound(t, Fraction(9), SpineN(0)) == 9
    assert aggregate_bound(t, Fraction(9), WHNF()) == 9
    flat = solved_list(0, 0)
    assert {aggregate_bound(flat, Fraction(40), SpineN(n)) for n in range(0, 101, 10)} == {40}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 50), st.integers(0, 200))
def test_aggregate_bound_formula(h, t, p, n):
    ty = solved_list(h, t)
    assert aggregate_bound(ty, Fraction(p), SpineN(n)) == p + n * t
    assert aggregate_bound(ty, Fraction(p), SpineElems(n)) == p + n * (t + h)


@pytest.mark.parametrize("path", CORPUS_FILES, ids=lambda p: p.stem)
@pytest.mark.parametrize("cm", [ALLOC, STEPS], ids=["alloc", "steps"])
def test_small_soundness(path, cm):
    m = parse_module(path.read_text())
    try:
        r = analyze(m, cm)
    except AnalysisFailure:
        pytest.skip("no bound to check")
    assert eval_demand(m, cm, WHNF()).total <= r.upper
    try:
        list_costs(r.type)
    except ShapeError:
        return
    for demand in (SpineN(20), SpineElems(20)):
        prof = demand_profile(m, cm, demand)
        for k, got in enumerate(prof):
            assert got <= aggregate_bound(r.type, r.upper, type(demand)(k))
