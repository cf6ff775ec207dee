"""Annotated types and the relations between them.

Annotations are either :class:`~lazecost.linear.AnnVar` (an LP unknown) or a
:class:`~fractions.Fraction` constant. Every relation here works by emitting
linear constraints into a :class:`~lazecost.linear.LinearProgram`.

Recursive types come only from datatype declarations, so two ``Mu`` nodes
align iff they stem from the same declaration; a ``TyVar`` names the
declaration it recurses into.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Union

from .linear import AnnVar, Annotation, LinearProgram, Solution
from .shapes import SData, SFun, SPrim, STyAbs, SType, TypingError
from .syntax import DataDecl, Prim, Rec

ZERO = Fraction(0)


@dataclass(frozen=True)
class TyVar:
    decl: str


@dataclass(frozen=True)
class PrimTy:
    """The empty algebraic type ``mu X.{}`` used for all primitive values."""


@dataclass(frozen=True)
class Thunk:
    cost: Annotation
    inner: "AnnType"


@dataclass(frozen=True)
class Fun:
    arg: "AnnType"
    cost: Annotation
    res: "AnnType"

    @property
    def is_type_abstraction(self) -> bool:
        return isinstance(self.arg, PrimTy)


@dataclass(frozen=True)
class Con:
    name: str
    potential: Annotation
    fields: tuple["AnnType", ...]


@dataclass(frozen=True)
class Mu:
    decl: str
    constructors: tuple[Con, ...]

    def con(self, name: str) -> Con:
        for c in self.constructors:
            if c.name == name:
                return c
        raise KeyError(name)


AnnType = Union[TyVar, PrimTy, Thunk, Fun, Mu]


# -- construction ----------------------------------------------------------

class Universe:
    """Datatype declarations plus the constraint sink of one analysis run."""

    def __init__(self, decls: list[DataDecl], sink: LinearProgram):
        self.decls = {d.name: d for d in decls}
        self.sink = sink

    def fresh(self, origin: str = "") -> AnnVar:
        return self.sink.fresh(origin)

    def instantiate(self, decl: Union[str, DataDecl], origin: str = "") -> Mu:
        """Instance of a declaration with fresh potentials and field costs."""
        d = self.decls[decl] if isinstance(decl, str) else decl
        cons = []
        for cname, specs in d.constructors:
            fields = []
            for spec in specs:
                if isinstance(spec, Prim):
                    inner: AnnType = PrimTy()
                elif isinstance(spec, Rec):
                    inner = TyVar(d.name)
                else:
                    inner = self.instantiate(spec.name, origin)
                fields.append(Thunk(self.fresh(origin), inner))
            cons.append(Con(cname, self.fresh(origin), tuple(fields)))
        return Mu(d.name, tuple(cons))

    def annotate(self, s: SType, origin: str = "") -> AnnType:
        """Fresh annotated type with the structure of simple type ``s``."""
        if isinstance(s, SPrim):
            return PrimTy()
        if isinstance(s, SData):
            return self.instantiate(s.name, origin)
        if isinstance(s, SFun):
            return Fun(Thunk(self.fresh(origin), self.annotate(s.arg, origin)),
                       self.fresh(origin), self.annotate(s.res, origin))
        if isinstance(s, STyAbs):
            return Fun(PrimTy(), ZERO, self.annotate(s.body, origin))
        raise TypingError(f"cannot annotate {s}")

    def copy(self, t: AnnType, origin: str = "") -> AnnType:
        """Same structure as ``t`` with every annotation fresh."""
        if isinstance(t, (TyVar, PrimTy)):
            return t
        if isinstance(t, Thunk):
            return Thunk(self.fresh(origin), self.copy(t.inner, origin))
        if isinstance(t, Fun):
            if t.is_type_abstraction:
                return Fun(t.arg, t.cost, self.copy(t.res, origin))
            return Fun(self.copy(t.arg, origin), self.fresh(origin), self.copy(t.res, origin))
        if isinstance(t, Mu):
            return Mu(t.decl, tuple(Con(c.name, self.fresh(origin),
                                        tuple(self.copy(f, origin) for f in c.fields))
                                    for c in t.constructors))
        raise TypeError(t)

    def constructor_type(self, mu: Mu, con: str) -> AnnType:
        """Curried constructor function: fields (unfolded) ``-0->`` ... ``mu``."""
        t: AnnType = mu
        for f in reversed(mu.con(con).fields):
            t = Fun(unfold(mu, f), ZERO, t)
        return t


def unfold(mu: Mu, t: AnnType) -> AnnType:
    """Substitute ``mu`` for its own recursive references inside ``t``."""
    if isinstance(t, TyVar):
        return mu if t.decl == mu.decl else t
    if isinstance(t, Thunk):
        return Thunk(t.cost, unfold(mu, t.inner))
    if isinstance(t, Fun):
        return Fun(unfold(mu, t.arg), t.cost, unfold(mu, t.res))
    if isinstance(t, Mu) and t.decl != mu.decl:
        return Mu(t.decl, tuple(Con(c.name, c.potential, tuple(unfold(mu, f) for f in c.fields))
                                for c in t.constructors))
    return t


# -- relations ---------------------------------------------------------------

def _mismatch(a: AnnType, b: AnnType):
    raise TypingError(f"type mismatch: {pretty(a)} vs {pretty(b)}")


def unify(a: AnnType, b: AnnType, sink: LinearProgram, origin: str = "unify") -> None:
    """Type equality: same structure, every aligned annotation pair equal."""
    if a is b:
        return
    if isinstance(a, TyVar) and isinstance(b, TyVar) and a.decl == b.decl:
        return
    if isinstance(a, PrimTy) and isinstance(b, PrimTy):
        return
    if isinstance(a, Thunk) and isinstance(b, Thunk):
        sink.eq(a.cost, b.cost, origin)
        unify(a.inner, b.inner, sink, origin)
        return
    if isinstance(a, Fun) and isinstance(b, Fun) and a.is_type_abstraction == b.is_type_abstraction:
        sink.eq(a.cost, b.cost, origin)
        unify(a.arg, b.arg, sink, origin)
        unify(a.res, b.res, sink, origin)
        return
    if isinstance(a, Mu) and isinstance(b, Mu) and a.decl == b.decl:
        for ca, cb in zip(a.constructors, b.constructors):
            sink.eq(ca.potential, cb.potential, origin)
            for fa, fb in zip(ca.fields, cb.fields):
                unify(fa, fb, sink, origin)
        return
    _mismatch(a, b)


def share(t: AnnType, parts: list[AnnType], sink: LinearProgram,
          origin: str = "share") -> None:
    """Sharing: potential of ``t`` splits among ``parts``; thunk debts are
    owed in full by every part; functions relate per part, contravariantly
    in the argument."""
    if not parts:
        raise ValueError("share needs at least one part")
    for p in parts:
        _same_shape(t, p)
    _share(t, parts, sink, origin)


def _same_shape(a: AnnType, b: AnnType):
    if isinstance(a, TyVar) and isinstance(b, TyVar) and a.decl == b.decl:
        return
    if isinstance(a, PrimTy) and isinstance(b, PrimTy):
        return
    if isinstance(a, Thunk) and isinstance(b, Thunk):
        return _same_shape(a.inner, b.inner)
    if isinstance(a, Fun) and isinstance(b, Fun) and a.is_type_abstraction == b.is_type_abstraction:
        _same_shape(a.arg, b.arg)
        return _same_shape(a.res, b.res)
    if isinstance(a, Mu) and isinstance(b, Mu) and a.decl == b.decl:
        for ca, cb in zip(a.constructors, b.constructors):
            for fa, fb in zip(ca.fields, cb.fields):
                _same_shape(fa, fb)
        return
    _mismatch(a, b)


def _share(t: AnnType, parts: list[AnnType], sink: LinearProgram, origin: str):
    if isinstance(t, (TyVar, PrimTy)):
        return
    if isinstance(t, Thunk):
        for p in parts:
            sink.ge(p.cost, t.cost, origin)
        _share(t.inner, [p.inner for p in parts], sink, origin)
    elif isinstance(t, Fun):
        for p in parts:
            sink.ge(p.cost, t.cost, origin)
            _share(p.arg, [t.arg], sink, origin)
            _share(t.res, [p.res], sink, origin)
    elif isinstance(t, Mu):
        for k, c in enumerate(t.constructors):
            sink.ge(c.potential, [p.constructors[k].potential for p in parts], origin)
            for j, f in enumerate(c.fields):
                _share(f, [p.constructors[k].fields[j] for p in parts], sink, origin)


def subtype(a: AnnType, b: AnnType, sink: LinearProgram, origin: str = "subtype") -> None:
    """``a <: b`` is sharing with a single part."""
    share(a, [b], sink, origin)


def lower_thunks(a: AnnType, b: AnnType, sink: LinearProgram,
                 origin: str = "lower-thunks") -> None:
    """Legacy relation: like :func:`unify`, except recursive references in
    ``a`` may carry smaller thunk costs than in ``b``."""
    if isinstance(a, Thunk) and isinstance(b, Thunk) and isinstance(a.inner, TyVar):
        _same_shape(a, b)
        sink.le(a.cost, b.cost, origin)
        return
    if isinstance(a, Thunk) and isinstance(b, Thunk):
        sink.eq(a.cost, b.cost, origin)
        return lower_thunks(a.inner, b.inner, sink, origin)
    if isinstance(a, Fun) and isinstance(b, Fun) and a.is_type_abstraction == b.is_type_abstraction:
        sink.eq(a.cost, b.cost, origin)
        lower_thunks(a.arg, b.arg, sink, origin)
        return lower_thunks(a.res, b.res, sink, origin)
    if isinstance(a, Mu) and isinstance(b, Mu) and a.decl == b.decl:
        for ca, cb in zip(a.constructors, b.constructors):
            sink.eq(ca.potential, cb.potential, origin)
            for fa, fb in zip(ca.fields, cb.fields):
                lower_thunks(fa, fb, sink, origin)
        return
    unify(a, b, sink, origin)


def share_context(ctx: dict[str, Thunk], n: int, universe: Universe,
                  origin: str = "share-context") -> list[dict[str, Thunk]]:
    """Split a context into ``n`` contexts over the same variables."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return [dict(ctx)]
    outs: list[dict[str, Thunk]] = [{} for _ in range(n)]
    for x, t in ctx.items():
        copies = [universe.copy(t, origin) for _ in range(n)]
        share(t, copies, universe.sink, f"{origin}:{x}")
        for out, c in zip(outs, copies):
            out[x] = c
    return outs


# -- inspection --------------------------------------------------------------

def walk(t: AnnType) -> Iterator[tuple[str, Annotation]]:
    """Yield ``(kind, annotation)`` for every annotation in ``t``; kind is
    ``"thunk"``, ``"arrow"`` or ``"potential"``."""
    if isinstance(t, Thunk):
        yield "thunk", t.cost
        yield from walk(t.inner)
    elif isinstance(t, Fun):
        yield from walk(t.arg)
        yield "arrow", t.cost
        yield from walk(t.res)
    elif isinstance(t, Mu):
        for c in t.constructors:
            yield "potential", c.potential
            for f in c.fields:
                yield from walk(f)


def held_potentials(t: AnnType) -> Iterator[Annotation]:
    """Constructor potentials stored in a value of type ``t``: those reachable
    through thunks and fields without crossing a function arrow."""
    if isinstance(t, Thunk):
        yield from held_potentials(t.inner)
    elif isinstance(t, Mu):
        for c in t.constructors:
            yield c.potential
            for f in c.fields:
                yield from held_potentials(f)


def substitute(t: AnnType, sol: Solution) -> AnnType:
    """Replace every annotation variable by its solved value."""
    if isinstance(t, Thunk):
        return Thunk(sol.value(t.cost), substitute(t.inner, sol))
    if isinstance(t, Fun):
        return Fun(substitute(t.arg, sol), sol.value(t.cost), substitute(t.res, sol))
    if isinstance(t, Mu):
        return Mu(t.decl, tuple(Con(c.name, sol.value(c.potential),
                                    tuple(substitute(f, sol) for f in c.fields))
                                for c in t.constructors))
    return t


def fmt_annotation(a: Annotation, sol: Optional[Solution] = None) -> str:
    if isinstance(a, AnnVar):
        if sol is None:
            return str(a)
        a = sol.value(a)
    return str(a)


_BINDERS = "XYZWUV"


def pretty(t: AnnType, sol: Optional[Solution] = None, _names=None) -> str:
    """Render ``t`` as ``T^q A``, ``A -q-> B`` and ``mu X.{ C : (q, [..]) | .. }``."""
    names = _names or {}
    if isinstance(t, TyVar):
        return names.get(t.decl, t.decl)
    if isinstance(t, PrimTy):
        return "mu X.{}" if not names else f"mu {_fresh_binder(names)}.{{}}"
    if isinstance(t, Thunk):
        inner = pretty(t.inner, sol, names)
        if isinstance(t.inner, Fun):
            inner = f"({inner})"
        return f"T^{fmt_annotation(t.cost, sol)} {inner}"
    if isinstance(t, Fun):
        arg = pretty(t.arg, sol, names)
        if isinstance(t.arg, Fun):
            arg = f"({arg})"
        return f"{arg} -{fmt_annotation(t.cost, sol)}-> {pretty(t.res, sol, names)}"
    if isinstance(t, Mu):
        x = _fresh_binder(names)
        inner_names = {**names, t.decl: x}
        cons = []
        for c in t.constructors:
            fields = ", ".join(pretty(f, sol, inner_names) for f in c.fields)
            cons.append(f"{c.name} : ({fmt_annotation(c.potential, sol)}, [{fields}])")
        if not cons:
            return f"mu {x}.{{}}"
        return f"mu {x}.{{ " + " | ".join(cons) + " }"
    raise TypeError(t)


def _fresh_binder(names) -> str:
    k = len(names)
    return _BINDERS[k] if k < len(_BINDERS) else f"X{k}"
