from fractions import Fraction

import pytest

from lazecost.annotypes import Fun, PrimTy, Thunk, Universe, pretty
from lazecost.infer import (AnalysisFailure, CostModel, Engine, InferOptions, PrimTable,
                            analyze, generate)
from lazecost.interp import list_costs
from lazecost.linear import LinearProgram
from lazecost.parser import parse_module
from lazecost.shapes import TypingError
from lazecost.syntax import Lit, Literal, Var

from common import CORPUS_FILES, load

ALLOC, STEPS, ZERO = (CostModel.preset(n) for n in ("alloc", "steps", "zero"))
LIST = "data L = Nil | Cons(Prim, L);\n"


def solve_or_none(m, cm, **opts):
    try:
        return analyze(m, cm, InferOptions(**opts))
    except AnalysisFailure:
        return None


def bound(src, cm=ALLOC, **opts):
    r = solve_or_none(parse_module(src), cm, **opts)
    return None if r is None else r.upper


# -- cost models ---------------------------------------------------------------

def test_presets():
    order = ("var", "app", "cons", "let", "letrec", "match", "prim")
    assert tuple(ALLOC.as_dict()[k] for k in order) == (0, 0, 1, 1, 1, 0, 0)
    assert set(STEPS.as_dict().values()) == {1}
    assert set(ZERO.as_dict().values()) == {0}
    with pytest.raises(ValueError):
        CostModel.preset("fast")


def test_cost_model_parse():
    assert CostModel.parse("alloc") == ALLOC
    assert CostModel.parse("steps,var=0").k_var == 0
    assert CostModel.parse("cons=1/2,k_let=2") == CostModel(k_cons=Fraction(1, 2), k_let=2)
    for bad in ("steps,bogus=1", "cons", "cons=-1"):
        with pytest.raises(ValueError):
            CostModel.parse(bad)


# -- single rules --------------------------------------------------------------

def _engine(cm=STEPS):
    return Engine([], None, cm, InferOptions())


def test_var_rule_charges_debt_plus_k_var():
    eng = _engine()
    q = eng.u.fresh()
    node = eng.infer(Var("x"), {"x": Thunk(q, PrimTy())})
    j = node.conclusion
    assert node.rule == "Var" and j.type == PrimTy() and j.lower == 0
    (c,) = [eng.lp.constraints[i] for i in node.emitted]
    assert c.terms == {j.upper: 1, q: -1} and c.relation == ">=" and c.rhs == 1


def test_lit_rule():
    node = _engine().infer(Lit(Literal("int", "1")), {})
    j = node.conclusion
    assert node.rule == "Lit" and (j.upper, j.lower) == (0, 0)
    assert pretty(j.type) == "mu X.{}"


def test_prim_lookup():
    u = Universe([], LinearProgram())
    t = PrimTable(STEPS).lookup("+#", u)
    assert isinstance(t, Fun) and t.cost == 0 and isinstance(t.res, Fun)
    assert isinstance(t.arg, Thunk) and t.res.res == PrimTy()
    (c,) = u.sink.constraints
    assert c.terms == {t.res.cost: 1, t.arg.cost: -1, t.res.arg.cost: -1} and c.rhs == 1
    with pytest.raises(TypingError, match="unbound primitive"):
        PrimTable(STEPS).lookup("^#", u)


def test_prim_free_under_alloc():
    # only the two lets are charged (the module binding itself is a let)
    assert bound("main r = let a = 1 in +# a a;") == 2


def test_typing_error_carries_trace():
    with pytest.raises(TypingError) as ei:
        analyze(parse_module(LIST + "main r = case 1 of { Nil -> 1 | Cons(h, t) -> 2 };"), ALLOC)
    assert ei.value.trace and "case" in ei.value.trace[0]


# -- examples from the reference programs ---------------------------------------

def test_repeat_constant_space():
    r = analyze(load("repeat"), ALLOC)
    assert list_costs(r.type)[1] == 0
    assert r.typing().startswith(f"⊢{r.upper}/0 ")


def test_repeat_unfold_linear():
    r = analyze(load("repeat_unfold"), ALLOC)
    assert list_costs(r.type)[1] >= 1


def test_map_repeat_shape():
    r = analyze(load("map_repeat"), ALLOC)
    head, tail = list_costs(r.type)
    assert tail > 0 and head >= 0 and r.upper < 20


@pytest.mark.parametrize("cm", [ALLOC, STEPS], ids=["alloc", "steps"])
@pytest.mark.parametrize("objective", ["asymptotic", "bound-first"])
def test_fibs_infeasible(cm, objective):
    with pytest.raises(AnalysisFailure, match="linear program infeasible") as ei:
        analyze(load("fibs"), cm, InferOptions(objective=objective))
    assert ei.value.lp.constraints and ei.value.derivation.rule == "LetRec"


def test_fibs_legacy_constant():
    r = analyze(load("fibs"), ALLOC, InferOptions(legacy_lower_thunks=True))
    assert list_costs(r.type)[1] == 0


# -- structural heuristics -------------------------------------------------------

RELAX = "main r = case 1 of { 0 -> 5 | default -> let z = 2 in z };"


def test_relax_needed():
    assert bound(RELAX) == 2
    assert bound(RELAX, relax=False) is None


def test_relax_slack_zero_when_unneeded():
    src = "main r = let z = 2 in case z of { 0 -> 5 | default -> z };"
    assert bound(src) == bound(src, relax=False) == 2


def _uses(k):
    return "x" if k == 1 else f"case x of {{ Nil -> x | Cons(h, t) -> {_uses(k - 1)} }}"


def _prepay_program(k):
    return LIST + ("main r = let x = let a = 1 in let b = 2 in Cons a (Cons b Nil) in "
                   f"{_uses(k)};")


def test_prepay_pays_once():
    with_prepay = [bound(_prepay_program(k)) for k in (1, 2, 3)]
    without = [bound(_prepay_program(k), prepay=False) for k in (1, 2, 3)]
    assert len(set(with_prepay)) == 1
    assert without[0] == with_prepay[0]  # single use: prepay changes nothing
    assert without[0] < without[1] < without[2]


def test_prepay_skips_case_lit_binder():
    m = parse_module("main r = let a = 1 in case y = a of { 0 -> y | default -> 1 };")
    eng, _ = generate(m, STEPS)
    prepaid = {v.origin for v in eng.lp.variables if v.origin.startswith("prepay")}
    assert prepaid and not any(o.split()[1].startswith("y") for o in prepaid)


# -- properties over the corpus ---------------------------------------------------

@pytest.mark.parametrize("path", CORPUS_FILES, ids=lambda p: p.stem)
def test_corpus_properties(path):
    m = parse_module(path.read_text())
    results = {}
    for name, cm in (("alloc", ALLOC), ("steps", STEPS), ("zero", ZERO)):
        results[name] = solve_or_none(m, cm)
    for r in results.values():
        if r is not None:
            # lambda-capture neutrality
            assert all(v == 0 for _, v in r.captured_potentials())
    if results["zero"] is not None:
        assert results["zero"].upper == 0
    if results["alloc"] is not None and results["steps"] is not None:
        a = solve_or_none(m, ALLOC, objective="bound-first")
        s = solve_or_none(m, STEPS, objective="bound-first")
        assert s.upper >= a.upper


@pytest.mark.parametrize("path", CORPUS_FILES, ids=lambda p: p.stem)
@pytest.mark.parametrize("cm", [ALLOC, STEPS], ids=["alloc", "steps"])
def test_appvar_preference(path, cm):
    m = parse_module(path.read_text())
    normal = solve_or_none(m, cm, objective="bound-first")
    forced = solve_or_none(m, cm, objective="bound-first", force_general_app=True)
    if forced is not None:
        assert normal is not None and normal.upper <= forced.upper


@pytest.mark.parametrize("name", ["repeat", "map_repeat", "fibs", "tree"])
def test_generation_deterministic(name):
    runs = []
    for _ in range(2):
        eng, root = generate(load(name), STEPS)
        runs.append((root.dump(lp=eng.lp), [str(c) for c in eng.lp.constraints],
                     sorted((v.id, w) for v, w in eng.lp.objective.items())))
    assert runs[0] == runs[1]


def test_derivation_mirrors_rules():
    eng, root = generate(load("repeat"), ALLOC)
    rules = set()

    def go(n):
        rules.add(n.rule)
        for p in n.premises:
            go(p)

    go(root)
    assert {"LetRec", "Let", "Abs", "Cons", "AppVar", "Var"} <= rules
    assert root.size() > 5
