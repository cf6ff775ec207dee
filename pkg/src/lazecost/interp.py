"""Call-by-need interpreter with cost counting.

Every charge site mirrors a typing rule: a variable dereference costs
``k_var``, an application node ``k_app``, evaluating a constructor reference
``k_cons``, a ``let`` ``k_let``, each ``letrec`` binding ``k_letrec``, a case
``k_match`` and a saturated primitive ``k_prim``. Arguments that are not
variables are allocated as thunks without charge; thunks are updated with
their value after the first force. Type abstraction and application are
erased.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, TypeVar, Union

from .infer import COST_KINDS, CostModel
from .annotypes import Mu, Thunk, TyVar
from .syntax import (PRIMITIVES, AlgAlt, App, CaseAlg, CaseLit, ConRef, DataDecl, Expr, Lam,
                     Let, LetRec, Lit, Literal, Module, Rec, TyLam, TypeLet, TypeTok, Var,
                     module_to_expr)

DEFAULT_FUEL = 10 ** 6


class EvalError(Exception):
    pass


class FuelExhausted(EvalError):
    pass


class BlackHole(EvalError):
    pass


class PatternMatchFailure(EvalError):
    pass


class ShapeError(EvalError):
    pass


# -- values and heap ---------------------------------------------------------

@dataclass(frozen=True)
class ConV:
    con: str
    fields: tuple[int, ...]


@dataclass(frozen=True)
class PartialCon:
    con: str
    arity: int
    args: tuple[int, ...]


@dataclass(frozen=True)
class Closure:
    env: dict
    binder: str
    body: Expr


@dataclass(frozen=True)
class PrimV:
    name: str
    args: tuple[int, ...] = ()


@dataclass(frozen=True)
class LitV:
    lit: Literal


Value = Union[ConV, PartialCon, Closure, PrimV, LitV]


@dataclass
class ThunkCell:
    env: dict
    expr: Expr


class _Hole:
    pass


HOLE = _Hole()


@dataclass
class CostCounter:
    cm: CostModel
    per_kind: dict[str, int] = field(default_factory=lambda: {k: 0 for k in COST_KINDS})

    def charge(self, kind: str):
        self.per_kind[kind] += 1

    @property
    def total(self) -> Fraction:
        return sum((n * self.cm.cost(k) for k, n in self.per_kind.items()), Fraction(0))

    def snapshot(self) -> "CostCounter":
        return CostCounter(self.cm, dict(self.per_kind))


def _prim_apply(name: str, a: LitV, b: LitV) -> LitV:
    x, y = a.lit.value, b.lit.value
    if not isinstance(x, int) or not isinstance(y, int):
        raise EvalError(f"{name} expects int literals")
    if name == "+#":
        r = x + y
    elif name == "-#":
        r = x - y
    elif name == "*#":
        r = x * y
    elif name == "<#":
        r = int(x < y)
    else:
        r = int(x == y)
    return LitV(Literal("int", str(r)))


class Machine:
    """One heap plus a cost counter; values persist across demands."""

    def __init__(self, decls: list[DataDecl], cm: CostModel, fuel: int = DEFAULT_FUEL):
        self.decls = decls
        self.arity = {c: len(fs) for d in decls for c, fs in d.constructors}
        self.heap: list = []
        self.counter = CostCounter(cm)
        self.fuel = fuel

    def alloc(self, cell) -> int:
        self.heap.append(cell)
        return len(self.heap) - 1

    def tick(self):
        self.fuel -= 1
        if self.fuel < 0:
            raise FuelExhausted("evaluation ran out of fuel")

    def force(self, addr: int) -> Value:
        cell = self.heap[addr]
        if isinstance(cell, ThunkCell):
            self.heap[addr] = HOLE
            v = self.eval(cell.expr, cell.env)
            self.heap[addr] = v
            return v
        if cell is HOLE:
            raise BlackHole("thunk demanded during its own evaluation")
        return cell

    def eval(self, e: Expr, env: dict) -> Value:
        self.tick()
        c = self.counter
        if isinstance(e, Var):
            c.charge("var")
            if e.name in env:
                return self.force(env[e.name])
            if e.name in PRIMITIVES:
                return PrimV(e.name)
            raise EvalError(f"unbound variable {e.name!r}")
        if isinstance(e, Lit):
            return LitV(e.lit)
        if isinstance(e, ConRef):
            c.charge("cons")
            if self.arity[e.name] == 0:
                return ConV(e.name, ())
            return PartialCon(e.name, self.arity[e.name], ())
        if isinstance(e, Lam):
            return Closure(env, e.binder, e.body)
        if isinstance(e, (TyLam, TypeLet)):
            return self.eval(e.body, env)
        if isinstance(e, App):
            if isinstance(e.arg, TypeTok):
                return self.eval(e.fun, env)
            c.charge("app")
            f = self.eval(e.fun, env)
            if isinstance(e.arg, Var) and e.arg.name in env:
                a = env[e.arg.name]
            else:
                a = self.alloc(ThunkCell(env, e.arg))
            return self.apply(f, a)
        if isinstance(e, Let):
            c.charge("let")
            a = self.alloc(ThunkCell(env, e.rhs))
            return self.eval(e.body, {**env, e.binder: a})
        if isinstance(e, LetRec):
            inner = dict(env)
            for x, _ in e.bindings:
                c.charge("letrec")
                inner[x] = self.alloc(None)
            for x, rhs in e.bindings:
                self.heap[inner[x]] = ThunkCell(inner, rhs)
            return self.eval(e.body, inner)
        if isinstance(e, CaseAlg):
            c.charge("match")
            v = self.eval(e.scrut, env)
            if not isinstance(v, ConV):
                raise PatternMatchFailure(f"case on non-constructor value {v!r}")
            inner = {**env, e.binder: self.alloc(v)}
            for alt in e.alts:
                if alt.con == v.con:
                    return self.eval(alt.body, {**inner, **dict(zip(alt.binders, v.fields))})
            if e.default is None:
                raise PatternMatchFailure(f"no alternative for {v.con}")
            return self.eval(e.default, inner)
        if isinstance(e, CaseLit):
            c.charge("match")
            v = self.eval(e.scrut, env)
            if not isinstance(v, LitV):
                raise PatternMatchFailure(f"literal case on {v!r}")
            inner = {**env, e.binder: self.alloc(v)}
            for alt in e.alts:
                if alt.lit.value == v.lit.value:
                    return self.eval(alt.body, inner)
            if e.default is None:
                raise PatternMatchFailure(f"no alternative for {v.lit}")
            return self.eval(e.default, inner)
        raise EvalError(f"cannot evaluate {e!r}")

    def apply(self, f: Value, a: int) -> Value:
        if isinstance(f, Closure):
            return self.eval(f.body, {**f.env, f.binder: a})
        if isinstance(f, PartialCon):
            args = f.args + (a,)
            return ConV(f.con, args) if len(args) == f.arity else PartialCon(f.con, f.arity, args)
        if isinstance(f, PrimV):
            if not f.args:
                return PrimV(f.name, (a,))
            self.counter.charge("prim")
            x, y = self.force(f.args[0]), self.force(a)
            if not isinstance(x, LitV) or not isinstance(y, LitV):
                raise EvalError(f"{f.name} applied to non-literal")
            return _prim_apply(f.name, x, y)
        raise EvalError(f"application of non-function {f!r}")


# -- demands -----------------------------------------------------------------

@dataclass(frozen=True)
class WHNF:
    def __str__(self):
        return "whnf"


@dataclass(frozen=True)
class SpineN:
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("demand size must be >= 0")

    def __str__(self):
        return f"spine:{self.n}"


@dataclass(frozen=True)
class SpineElems:
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("demand size must be >= 0")

    def __str__(self):
        return f"elems:{self.n}"


Demand = Union[WHNF, SpineN, SpineElems]


def parse_demand(text: str) -> Demand:
    text = text.strip()
    if text == "whnf":
        return WHNF()
    kind, _, n = text.partition(":")
    if kind in ("spine", "elems") and n.isdigit():
        return SpineN(int(n)) if kind == "spine" else SpineElems(int(n))
    raise ValueError(f"bad demand {text!r}; expected whnf, spine:N or elems:N")


def list_shape(decl: DataDecl) -> Optional[tuple[str, str, int, int]]:
    """``(nil, cons, head_index, tail_index)`` if ``decl`` is list-like."""
    nullary = [c for c, fs in decl.constructors if not fs]
    binary = [(c, fs) for c, fs in decl.constructors if len(fs) == 2]
    if len(decl.constructors) != 2 or len(nullary) != 1 or len(binary) != 1:
        return None
    cons, fs = binary[0]
    if not isinstance(fs[1], Rec):
        return None
    return nullary[0], cons, 0, 1


def _walk_demand(m: Machine, root: Value, demand: Demand,
                 on_step: Optional[Callable[[int], None]] = None):
    if isinstance(demand, WHNF) or demand.n == 0:
        return
    if not isinstance(root, ConV):
        raise ShapeError("spine demand on a non-constructor value")
    decl = next(d for d in m.decls if root.con in dict(d.constructors))
    shape = list_shape(decl)
    if shape is None:
        raise ShapeError(f"spine demand on non-list type {decl.name}")
    nil, cons, hi, ti = shape
    v = root
    for i in range(demand.n):
        if v.con == nil:
            break
        if isinstance(demand, SpineElems):
            m.force(v.fields[hi])
        v = m.force(v.fields[ti])
        if on_step is not None:
            on_step(i + 1)


def _program(m: Union[Module, Expr]) -> tuple[Expr, list[DataDecl]]:
    if isinstance(m, Module):
        return module_to_expr(m), m.decls
    return m, []


def eval_whnf(prog: Union[Module, Expr], cm: CostModel, fuel: int = DEFAULT_FUEL,
              decls: Optional[list[DataDecl]] = None) -> tuple[Value, CostCounter]:
    e, ds = _program(prog)
    mach = Machine(decls if decls is not None else ds, cm, fuel)
    v = run_deep(lambda: mach.eval(e, {}))
    return v, mach.counter


def eval_demand(prog: Union[Module, Expr], cm: CostModel, demand: Demand,
                fuel: int = DEFAULT_FUEL, decls: Optional[list[DataDecl]] = None) -> CostCounter:
    e, ds = _program(prog)
    mach = Machine(decls if decls is not None else ds, cm, fuel)

    def go():
        _walk_demand(mach, mach.eval(e, {}), demand)

    run_deep(go)
    return mach.counter


def demand_profile(prog: Union[Module, Expr], cm: CostModel, demand: Demand,
                   fuel: int = DEFAULT_FUEL) -> list[Fraction]:
    """Measured cost of the demand truncated to ``0..n`` steps, from one run.

    Entry ``k`` equals ``eval_demand`` with size ``k``: the walk is
    deterministic, so a shorter demand is a prefix of a longer one. Once the
    list ends, the remaining entries repeat the final cost.
    """
    e, ds = _program(prog)
    mach = Machine(ds, cm, fuel)
    n = 0 if isinstance(demand, WHNF) else demand.n
    costs: list[Fraction] = []

    def go():
        root = mach.eval(e, {})
        costs.append(mach.counter.total)
        _walk_demand(mach, root, demand, lambda i: costs.append(mach.counter.total))

    run_deep(go)
    while len(costs) < n + 1:
        costs.append(costs[-1])
    return costs


def aggregate_bound(t, p: Fraction, demand: Demand) -> Fraction:
    """Bound implied by a solved list type and root bound ``p``."""
    if isinstance(demand, WHNF):
        return Fraction(p)
    head, tail = list_costs(t)
    n = demand.n
    if isinstance(demand, SpineN):
        return p + n * tail
    return p + n * tail + n * head


def list_costs(t) -> tuple[Fraction, Fraction]:
    """``(head thunk cost, tail thunk cost)`` of a solved list-like type."""
    if not isinstance(t, Mu) or len(t.constructors) != 2:
        raise ShapeError("not a list-like type")
    nil = [c for c in t.constructors if not c.fields]
    cons = [c for c in t.constructors if len(c.fields) == 2]
    if len(nil) != 1 or len(cons) != 1:
        raise ShapeError("not a list-like type")
    head, tail = cons[0].fields
    if not (isinstance(tail, Thunk) and isinstance(tail.inner, TyVar) and isinstance(head, Thunk)):
        raise ShapeError("not a list-like type")
    if any(not isinstance(a, Fraction) for a in (head.cost, tail.cost)):
        raise ShapeError("type is not solved")
    return head.cost, tail.cost


# -- deep recursion ----------------------------------------------------------

T = TypeVar("T")
_STACK_BYTES = 512 * 1024 * 1024


def run_deep(fn: Callable[[], T]) -> T:
    """Run ``fn`` on a thread with a large stack and recursion limit."""
    box: dict = {}

    def target():
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(10 ** 6)
        try:
            box["value"] = fn()
        except BaseException as exc:  # re-raised in the caller
            box["error"] = exc
        finally:
            sys.setrecursionlimit(old)

    prev = threading.stack_size()
    threading.stack_size(_STACK_BYTES)
    try:
        t = threading.Thread(target=target)
        t.start()
    finally:
        threading.stack_size(prev)
    t.join()
    if "error" in box:
        raise box["error"]
    return box["value"]
