import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from lazecost.annotypes import (Con, Fun, Mu, PrimTy, Thunk, TyVar, Universe, held_potentials,
                                lower_thunks, pretty, share, share_context, subtype, unfold,
                                unify, walk)
from lazecost.linear import GE, LinearProgram, solve
from lazecost.shapes import SData, SFun, SPrim, TypingError
from lazecost.syntax import DataDecl, Prim, Rec, Ref

LIST = DataDecl("IntList", (("Nil", ()), ("Cons", (Prim(), Rec()))))
PAIR = DataDecl("Pair", (("P", (Ref("IntList"), Prim())),))
TREE = DataDecl("Tree", (("Leaf", ()), ("Node", (Rec(), Prim(), Rec()))))
VOID = DataDecl("Void", ())
DECLS = [LIST, PAIR, TREE, VOID]


def universe():
    return Universe(DECLS, LinearProgram())


def constraint_strings(lp):
    return sorted(str(c) for c in lp.constraints)


def test_instantiate_list():
    u = universe()
    t = u.instantiate("IntList")
    assert pretty(t) == "mu X.{ Nil : (v1, []) | Cons : (v4, [T^v2 mu Y.{}, T^v3 X]) }"
    assert len(u.sink.variables) == 4 and u.sink.constraints == []  # non-negativity is implicit


def test_instantiate_empty_decl():
    assert pretty(universe().instantiate("Void")) == "mu X.{}"


def test_instantiate_ref_field_nests():
    u = universe()
    t = u.instantiate("Pair")
    (p,) = t.constructors
    inner, prim = p.fields
    assert isinstance(inner, Thunk) and isinstance(prim, Thunk) and prim.inner == PrimTy()
    expected_shape = Mu("IntList", (Con("Nil", 0, ()),
                                    Con("Cons", 0, (Thunk(0, PrimTy()), Thunk(0, TyVar("IntList"))))))
    strip = lambda t: _zero(t)  # noqa: E731
    assert strip(inner.inner) == expected_shape


def _zero(t):
    if isinstance(t, Thunk):
        return Thunk(0, _zero(t.inner))
    if isinstance(t, Mu):
        return Mu(t.decl, tuple(Con(c.name, 0, tuple(_zero(f) for f in c.fields))
                                for c in t.constructors))
    return t


def test_unify_thunks():
    lp = LinearProgram()
    a, b = lp.fresh(), lp.fresh()
    unify(Thunk(a, PrimTy()), Thunk(b, PrimTy()), lp)
    assert constraint_strings(lp) == ["v1 - v2 = 0"]


def test_unify_two_lists_emits_four_equalities():
    u = universe()
    unify(u.instantiate("IntList"), u.instantiate("IntList"), u.sink)
    assert len(u.sink.constraints) == 4
    assert all(c.relation == "=" for c in u.sink.constraints)


def test_unify_mismatch():
    u = universe()
    f = u.annotate(SFun(SPrim(), SPrim()))
    with pytest.raises(TypingError):
        unify(f, u.instantiate("IntList"), u.sink)
    with pytest.raises(TypingError):
        unify(u.instantiate("Tree"), u.instantiate("IntList"), u.sink)


def test_share_list_hand_derived():
    u = universe()
    t = u.instantiate("IntList")  # v1..v4
    c1, c2 = u.copy(t), u.copy(t)  # copies number in preorder: v5..v8, v9..v12
    share(t, [c1, c2], u.sink)
    assert constraint_strings(u.sink) == sorted([
        "v1 - v5 - v9 >= 0",   # Nil potential splits
        "v4 - v6 - v10 >= 0",  # Cons potential splits
        "v7 - v2 >= 0", "v11 - v2 >= 0",   # head debt owed by both copies
        "v8 - v3 >= 0", "v12 - v3 >= 0",   # tail debt owed by both copies
    ])


def test_share_with_constant_potential():
    u = universe()
    t = Mu("IntList", (Con("Nil", Fraction(0), ()),
                       Con("Cons", Fraction(2), (Thunk(Fraction(0), PrimTy()),
                                                 Thunk(Fraction(0), TyVar("IntList"))))))
    c1, c2 = u.copy(t), u.copy(t)
    share(t, [c1, c2], u.sink)
    cons_pots = [c.constructors[1].potential for c in (c1, c2)]
    u.sink.set_objective({cons_pots[0]: -1, cons_pots[1]: -1})
    sol = solve(u.sink)
    assert sol.objective == -2  # 2 >= p1 + p2


def test_subtype_reflexive_identity_assignment():
    u = universe()
    t = u.instantiate("Tree")
    subtype(t, t, u.sink)
    assignment = {v: Fraction(7) for v in u.sink.variables}
    assert u.sink.check(assignment) == []


def test_subtype_potential_direction():
    u = universe()
    a, b = u.instantiate("IntList"), u.instantiate("IntList")
    subtype(a, b, u.sink)
    assert "v4 - v8 >= 0" in constraint_strings(u.sink)


def test_subtype_mismatch():
    u = universe()
    with pytest.raises(TypingError):
        subtype(u.annotate(SFun(SPrim(), SPrim())), u.instantiate("IntList"), u.sink)


def test_self_share_forces_zero_potential():
    u = universe()
    t = u.instantiate("Pair")
    share(t, [t, t], u.sink)
    for kind, a in walk(t):
        if kind == "potential":
            lp = LinearProgram()
            lp.variables, lp.constraints = u.sink.variables, list(u.sink.constraints)
            lp.ge(a, 1)
            lp.set_objective({})
            assert solve(lp).status == "infeasible"


def test_share_context():
    u = universe()
    assert share_context({}, 3, u) == [{}, {}, {}]
    ctx = {"x": Thunk(u.fresh(), u.instantiate("IntList"))}
    assert share_context(ctx, 1, u) == [ctx] and u.sink.constraints == []
    a, b = share_context(ctx, 2, u)
    assert set(a) == set(b) == {"x"}
    assert a["x"] is not ctx["x"] and b["x"] is not a["x"]
    # outer thunk debt duplicated, 2 potentials split, inner thunks duplicated
    assert len(u.sink.constraints) == 2 + 2 + 4


def test_lower_thunks_only_relaxes_recursive_references():
    u = universe()
    a, b = u.instantiate("IntList"), u.instantiate("IntList")
    lower_thunks(a, b, u.sink)
    rels = sorted((str(c), c.relation) for c in u.sink.constraints)
    assert [r for _, r in rels].count("<=") == 1
    assert "v3 - v7 <= 0" in [s for s, _ in rels]


def test_unfold_and_constructor_type():
    u = universe()
    mu = u.instantiate("IntList")
    ct = u.constructor_type(mu, "Cons")
    assert isinstance(ct, Fun) and ct.cost == 0 and ct.res.cost == 0 and ct.res.res is mu
    assert ct.res.arg.inner is mu  # recursive field unfolded
    assert unfold(mu, TyVar("Other")) == TyVar("Other")


def test_held_potentials_skip_arrows():
    u = universe()
    f = u.annotate(SFun(SData("IntList"), SData("IntList")))
    assert list(held_potentials(Thunk(u.fresh(), f))) == []
    assert len(list(held_potentials(u.instantiate("Pair")))) == 3


# -- properties on random small types ------------------------------------------

def random_shape(rng, depth=2):
    k = rng.randrange(4 if depth > 0 else 3)
    if k == 0:
        return SPrim()
    if k in (1, 2):
        return SData(rng.choice(["IntList", "Pair", "Tree"]))
    return SFun(random_shape(rng, depth - 1), random_shape(rng, depth - 1))


def _solve_with(lp, objective):
    lp.set_objective(objective)
    return solve(lp)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_share_transitive(seed):
    rng = random.Random(seed)
    u = universe()
    shape = random_shape(rng)
    t, t1, t2 = (u.annotate(shape) for _ in range(3))
    share(t, [t1], u.sink)
    share(t1, [t2], u.sink)
    sol = _solve_with(u.sink, {v: Fraction(rng.randint(-2, 3)) for v in u.sink.variables})
    if sol.status == "unbounded":
        sol = _solve_with(u.sink, {v: 1 for v in u.sink.variables})
    assert sol.status == "optimal"
    probe = LinearProgram()
    share(t, [t2], probe)
    assert probe.check(sol.assignment) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_unify_symmetric(seed):
    rng = random.Random(seed)
    shape = random_shape(rng)
    results = []
    for flip in (False, True):
        u = universe()
        a, b = u.annotate(shape), u.annotate(shape)
        extra = [(v, GE, rng.randint(0, 3)) for v in u.sink.variables if rng.random() < 0.3]
        (unify(b, a, u.sink) if flip else unify(a, b, u.sink))
        for v, rel, k in extra:
            u.sink.relate(v, rel, k)
        weights = {v: 1 + (v.id % 3) for v in u.sink.variables}
        results.append(_solve_with(u.sink, weights))
        rng = random.Random(seed)
        random_shape(rng)
    assert results[0].status == results[1].status == "optimal"
    assert results[0].objective == results[1].objective


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["IntList", "Pair", "Tree"]))
def test_self_share_property(name):
    u = universe()
    t = u.instantiate(name)
    share(t, [t, t], u.sink)
    sol = _solve_with(u.sink, {a: -1 for k, a in walk(t) if k == "potential"})
    assert sol.status == "optimal"
    assert all(sol.value(a) == 0 for k, a in walk(t) if k == "potential")
