"""Monomorphic inference of underlying (unannotated) types.

Annotated types need a known structure before annotation variables can be
attached, but source programs carry no type signatures. This pass recovers
one simple type per binder by first-order unification; type abstractions are
kept as an explicit marker so the annotated pass can emit the artificial
``mu X.{} -0->`` arrow.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

from .syntax import (PRIMITIVES, AlgAlt, App, CaseAlg, CaseLit, ConRef, DataDecl, Expr,
                     Lam, Let, LetRec, Lit, Prim, Rec, Ref, TyLam, TypeLet, TypeTok, Var,
                     children, free_vars)


class TypingError(Exception):
    """Structural type error; ``trace`` lists the enclosing judgments."""

    def __init__(self, msg: str, trace=None):
        super().__init__(msg)
        self.msg = msg
        self.trace = list(trace or [])

    def __str__(self):
        if not self.trace:
            return self.msg
        return self.msg + "\n" + "\n".join("  in " + t for t in self.trace)


@dataclass(frozen=True)
class SPrim:
    def __str__(self):
        return "Prim"


@dataclass(frozen=True)
class SData:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class SFun:
    arg: "SType"
    res: "SType"

    def __str__(self):
        return f"({self.arg} -> {self.res})"


@dataclass(frozen=True)
class STyAbs:
    body: "SType"

    def __str__(self):
        return f"(forall. {self.body})"


@dataclass(eq=False)
class Meta:
    id: int
    ref: Optional["SType"] = None

    def __str__(self):
        return f"?{self.id}" if self.ref is None else str(self.ref)


SType = Union[SPrim, SData, SFun, STyAbs, Meta]


def prune(t: SType) -> SType:
    while isinstance(t, Meta) and t.ref is not None:
        t = t.ref
    return t


def resolve(t: SType) -> SType:
    """Fully substitute metas; unconstrained ones default to ``Prim``."""
    t = prune(t)
    if isinstance(t, Meta):
        t.ref = SPrim()
        return t.ref
    if isinstance(t, SFun):
        return SFun(resolve(t.arg), resolve(t.res))
    if isinstance(t, STyAbs):
        return STyAbs(resolve(t.body))
    return t


def rename_apart(e: Expr, taken=()) -> Expr:
    """Rename binders so every binder name in ``e`` is unique."""
    used = set(taken) | set(free_vars(e))
    counter = itertools.count(1)

    def fresh(name):
        if name not in used:
            used.add(name)
            return name
        while True:
            cand = f"{name.split(chr(39))[0]}'{next(counter)}"
            if cand not in used:
                used.add(cand)
                return cand

    def go(e, env):
        if isinstance(e, Var):
            return Var(env.get(e.name, e.name))
        if isinstance(e, (ConRef, Lit, TypeTok)):
            return e
        if isinstance(e, Lam):
            x = fresh(e.binder)
            return Lam(x, go(e.body, {**env, e.binder: x}))
        if isinstance(e, TyLam):
            return TyLam(e.binder, go(e.body, env))
        if isinstance(e, TypeLet):
            return TypeLet(e.binder, e.type_name, go(e.body, env))
        if isinstance(e, App):
            return App(go(e.fun, env), go(e.arg, env))
        if isinstance(e, Let):
            x = fresh(e.binder)
            return Let(x, go(e.rhs, env), go(e.body, {**env, e.binder: x}))
        if isinstance(e, LetRec):
            inner = dict(env)
            names = []
            for b, _ in e.bindings:
                names.append(fresh(b))
                inner[b] = names[-1]
            binds = tuple((n, go(r, inner)) for n, (_, r) in zip(names, e.bindings))
            return LetRec(binds, go(e.body, inner))
        if isinstance(e, (CaseAlg, CaseLit)):
            scrut = go(e.scrut, env)
            y = fresh(e.binder)
            inner = {**env, e.binder: y}
            alts = []
            for alt in e.alts:
                if isinstance(alt, AlgAlt):
                    xs = tuple(fresh(x) for x in alt.binders)
                    alts.append(AlgAlt(alt.con, xs,
                                       go(alt.body, {**inner, **dict(zip(alt.binders, xs))})))
                else:
                    alts.append(type(alt)(alt.lit, go(alt.body, inner)))
            default = None if e.default is None else go(e.default, inner)
            return type(e)(y, scrut, tuple(alts), default)
        raise TypeError(e)

    return go(e, {})


def binders_unique(e: Expr) -> bool:
    seen = set()

    def add(n):
        if n in seen:
            return False
        seen.add(n)
        return True

    def go(e):
        ok = True
        if isinstance(e, Lam) or isinstance(e, Let):
            ok = add(e.binder)
        elif isinstance(e, LetRec):
            ok = all([add(b) for b, _ in e.bindings])
        elif isinstance(e, (CaseAlg, CaseLit)):
            ok = add(e.binder)
            for alt in e.alts:
                if isinstance(alt, AlgAlt):
                    ok = all([add(x) for x in alt.binders]) and ok
        return all([go(c) for c in children(e)]) and ok

    return go(e)


PRIM_SHAPE = SFun(SPrim(), SFun(SPrim(), SPrim()))


@dataclass
class Shapes:
    """Result of shape inference: one simple type per binder."""
    binders: dict[str, SType] = field(default_factory=dict)
    root: Optional[SType] = None

    def of(self, name: str) -> SType:
        return self.binders[name]


class _Inferer:
    def __init__(self, decls: list[DataDecl]):
        self.cons = {c: d for d in decls for c, _ in d.constructors}
        self.decls = {d.name: d for d in decls}
        self.ids = itertools.count()
        self.binders: dict[str, SType] = {}

    def meta(self) -> Meta:
        return Meta(next(self.ids))

    def unify(self, a: SType, b: SType, where: Expr):
        a, b = prune(a), prune(b)
        if a is b:
            return
        if isinstance(a, Meta):
            if self.occurs(a, b):
                raise TypingError(f"infinite type {a} ~ {b} at {_short(where)}")
            a.ref = b
            return
        if isinstance(b, Meta):
            self.unify(b, a, where)
            return
        if type(a) is not type(b):
            raise TypingError(f"cannot match {resolve_show(a)} with {resolve_show(b)} "
                              f"at {_short(where)}")
        if isinstance(a, SData) and a.name != b.name:
            raise TypingError(f"cannot match {a} with {b} at {_short(where)}")
        if isinstance(a, SFun):
            self.unify(a.arg, b.arg, where)
            self.unify(a.res, b.res, where)
        elif isinstance(a, STyAbs):
            self.unify(a.body, b.body, where)

    def occurs(self, m: Meta, t: SType) -> bool:
        t = prune(t)
        if t is m:
            return True
        if isinstance(t, SFun):
            return self.occurs(m, t.arg) or self.occurs(m, t.res)
        if isinstance(t, STyAbs):
            return self.occurs(m, t.body)
        return False

    def field_shape(self, decl: DataDecl, spec) -> SType:
        if isinstance(spec, Prim):
            return SPrim()
        if isinstance(spec, Rec):
            return SData(decl.name)
        return SData(spec.name)

    def bind(self, name, t):
        self.binders[name] = t

    def infer(self, e: Expr, env: dict[str, SType]) -> SType:
        try:
            return self._infer(e, env)
        except TypingError as err:
            if len(err.trace) < 8:
                err.trace.append(_short(e))
            raise

    def _infer(self, e: Expr, env: dict[str, SType]) -> SType:
        if isinstance(e, Var):
            if e.name in env:
                return env[e.name]
            if e.name in PRIMITIVES:
                return PRIM_SHAPE
            raise TypingError(f"unbound variable {e.name!r}")
        if isinstance(e, ConRef):
            if e.name not in self.cons:
                raise TypingError(f"unknown constructor {e.name!r}")
            d = self.cons[e.name]
            t: SType = SData(d.name)
            for spec in reversed(d.fields(e.name)):
                t = SFun(self.field_shape(d, spec), t)
            return t
        if isinstance(e, Lit):
            return SPrim()
        if isinstance(e, TypeTok):
            raise TypingError(f"type argument @{e.name} outside an application")
        if isinstance(e, Lam):
            a = self.meta()
            self.bind(e.binder, a)
            return SFun(a, self.infer(e.body, {**env, e.binder: a}))
        if isinstance(e, TyLam):
            return STyAbs(self.infer(e.body, env))
        if isinstance(e, TypeLet):
            return self.infer(e.body, env)
        if isinstance(e, App):
            f = self.infer(e.fun, env)
            r = self.meta()
            if isinstance(e.arg, TypeTok):
                self.unify(f, STyAbs(r), e)
                return r
            a = self.infer(e.arg, env)
            self.unify(f, SFun(a, r), e)
            return r
        if isinstance(e, Let):
            a = self.infer(e.rhs, env)
            self.bind(e.binder, a)
            return self.infer(e.body, {**env, e.binder: a})
        if isinstance(e, LetRec):
            inner = dict(env)
            for b, _ in e.bindings:
                inner[b] = self.meta()
                self.bind(b, inner[b])
            for b, rhs in e.bindings:
                self.unify(inner[b], self.infer(rhs, inner), rhs)
            return self.infer(e.body, inner)
        if isinstance(e, CaseAlg):
            d = self.cons[e.alts[0].con] if e.alts else None
            if d is None:
                raise TypingError("case without constructor alternatives")
            st = self.infer(e.scrut, env)
            self.unify(st, SData(d.name), e.scrut)
            self.bind(e.binder, SData(d.name))
            inner = {**env, e.binder: SData(d.name)}
            res = self.meta()
            for alt in e.alts:
                if self.cons.get(alt.con) is not d:
                    raise TypingError(f"constructor {alt.con} not in datatype {d.name}")
                specs = d.fields(alt.con)
                if len(specs) != len(alt.binders):
                    raise TypingError(f"arity mismatch in pattern {alt.con}")
                benv = dict(inner)
                for x, spec in zip(alt.binders, specs):
                    benv[x] = self.field_shape(d, spec)
                    self.bind(x, benv[x])
                self.unify(res, self.infer(alt.body, benv), alt.body)
            if e.default is not None:
                self.unify(res, self.infer(e.default, inner), e.default)
            return res
        if isinstance(e, CaseLit):
            self.unify(self.infer(e.scrut, env), SPrim(), e.scrut)
            self.bind(e.binder, SPrim())
            inner = {**env, e.binder: SPrim()}
            res = self.meta()
            for alt in e.alts:
                self.unify(res, self.infer(alt.body, inner), alt.body)
            if e.default is not None:
                self.unify(res, self.infer(e.default, inner), e.default)
            return res
        raise TypingError(f"unsupported expression {e!r}")


def resolve_show(t: SType) -> str:
    return str(prune(t))


def _short(e: Expr) -> str:
    from .parser import print_expr
    s = print_expr(e)
    return s if len(s) < 60 else s[:57] + "..."


def infer_shapes(e: Expr, decls: list[DataDecl]) -> Shapes:
    """Infer a simple type for every binder of ``e`` (binders must be unique)."""
    if not binders_unique(e):
        raise ValueError("binders must be unique; apply rename_apart first")
    inf = _Inferer(decls)
    root = inf.infer(e, {})
    out = Shapes({b: resolve(t) for b, t in inf.binders.items()}, resolve(root))
    return out
