"""Abstract syntax of the lazy core language.

Expressions are immutable dataclasses. A :class:`Module` is a list of datatype
declarations plus top-level binding groups; :func:`module_to_expr` folds it
into one nested expression for analysis.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

# Hard-coded primitive operators over int literals.
PRIMITIVES = ("+#", "-#", "*#", "<#", "==#")


@dataclass(frozen=True)
class Literal:
    kind: str  # "int" | "float" | "char"
    payload: str

    _RULES = {
        "int": re.compile(r"-?[0-9]+\Z"),
        "float": re.compile(r"-?[0-9]+\.[0-9]+\Z"),
        "char": re.compile(r"'(\\.|[^'\\])'\Z"),
    }

    def __post_init__(self):
        rule = self._RULES.get(self.kind)
        if rule is None or not rule.match(self.payload):
            raise ValueError(f"bad {self.kind} literal {self.payload!r}")

    @property
    def value(self):
        if self.kind == "int":
            return int(self.payload)
        if self.kind == "float":
            return float(self.payload)
        body = self.payload[1:-1]
        return body.encode().decode("unicode_escape") if body.startswith("\\") else body

    def __str__(self):
        return self.payload


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class ConRef:
    name: str


@dataclass(frozen=True)
class Lit:
    lit: Literal


@dataclass(frozen=True)
class TypeTok:
    name: str


@dataclass(frozen=True)
class Lam:
    binder: str
    body: Expr


@dataclass(frozen=True)
class TyLam:
    binder: str
    body: Expr


@dataclass(frozen=True)
class App:
    fun: Expr
    arg: Expr


@dataclass(frozen=True)
class Let:
    binder: str
    rhs: Expr
    body: Expr


@dataclass(frozen=True)
class LetRec:
    bindings: tuple[tuple[str, Expr], ...]
    body: Expr

    def __post_init__(self):
        names = [b for b, _ in self.bindings]
        if not names:
            raise ValueError("letrec needs at least one binding")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate letrec binders {names}")


@dataclass(frozen=True)
class AlgAlt:
    con: str
    binders: tuple[str, ...]
    body: Expr


@dataclass(frozen=True)
class LitAlt:
    lit: Literal
    body: Expr


@dataclass(frozen=True)
class CaseAlg:
    binder: str
    scrut: Expr
    alts: tuple[AlgAlt, ...]
    default: Optional[Expr] = None


@dataclass(frozen=True)
class CaseLit:
    binder: str
    scrut: Expr
    alts: tuple[LitAlt, ...]
    default: Optional[Expr] = None


@dataclass(frozen=True)
class TypeLet:
    binder: str
    type_name: str
    body: Expr


Expr = Union[Var, ConRef, Lit, TypeTok, Lam, TyLam, App, Let, LetRec,
             CaseAlg, CaseLit, TypeLet]


# -- datatype declarations -------------------------------------------------

@dataclass(frozen=True)
class Prim:
    """Field holding a primitive (unboxed) value."""


@dataclass(frozen=True)
class Rec:
    """Field referring back to the enclosing datatype."""


@dataclass(frozen=True)
class Ref:
    name: str


FieldSpec = Union[Prim, Rec, Ref]


@dataclass(frozen=True)
class DataDecl:
    name: str
    constructors: tuple[tuple[str, tuple[FieldSpec, ...]], ...]

    def con_index(self, con: str) -> int:
        for i, (c, _) in enumerate(self.constructors):
            if c == con:
                return i
        raise KeyError(con)

    def fields(self, con: str) -> tuple[FieldSpec, ...]:
        return self.constructors[self.con_index(con)][1]


@dataclass(frozen=True)
class NonRec:
    binder: str
    expr: Expr


@dataclass(frozen=True)
class RecGroup:
    bindings: tuple[tuple[str, Expr], ...]


BindGroup = Union[NonRec, RecGroup]


@dataclass
class Module:
    decls: list[DataDecl]
    binds: list[BindGroup]
    main: str
    _con_table: dict = field(default_factory=dict, repr=False, compare=False)

    def decl(self, name: str) -> DataDecl:
        for d in self.decls:
            if d.name == name:
                return d
        raise KeyError(name)

    def decl_of_con(self, con: str) -> DataDecl:
        if not self._con_table:
            self._con_table.update({c: d for d in self.decls for c, _ in d.constructors})
        return self._con_table[con]

    def binders(self) -> list[str]:
        out = []
        for g in self.binds:
            out.extend([g.binder] if isinstance(g, NonRec) else [b for b, _ in g.bindings])
        return out


# -- traversals ------------------------------------------------------------

def children(e: Expr) -> Iterator[Expr]:
    if isinstance(e, (Lam, TyLam, TypeLet)):
        yield e.body
    elif isinstance(e, App):
        yield e.fun
        yield e.arg
    elif isinstance(e, Let):
        yield e.rhs
        yield e.body
    elif isinstance(e, LetRec):
        for _, rhs in e.bindings:
            yield rhs
        yield e.body
    elif isinstance(e, (CaseAlg, CaseLit)):
        yield e.scrut
        for alt in e.alts:
            yield alt.body
        if e.default is not None:
            yield e.default


def free_vars(e: Expr) -> frozenset[str]:
    """Free term variables of ``e`` (primitive names included when free)."""
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, (ConRef, Lit, TypeTok)):
        return frozenset()
    if isinstance(e, Lam):
        return free_vars(e.body) - {e.binder}
    if isinstance(e, (TyLam, TypeLet)):
        return free_vars(e.body)
    if isinstance(e, App):
        return free_vars(e.fun) | free_vars(e.arg)
    if isinstance(e, Let):
        return free_vars(e.rhs) | (free_vars(e.body) - {e.binder})
    if isinstance(e, LetRec):
        names = {b for b, _ in e.bindings}
        out = free_vars(e.body)
        for _, rhs in e.bindings:
            out |= free_vars(rhs)
        return out - names
    if isinstance(e, CaseAlg):
        out = frozenset()
        for alt in e.alts:
            out |= free_vars(alt.body) - set(alt.binders)
        if e.default is not None:
            out |= free_vars(e.default)
        return free_vars(e.scrut) | (out - {e.binder})
    if isinstance(e, CaseLit):
        out = frozenset()
        for alt in e.alts:
            out |= free_vars(alt.body)
        if e.default is not None:
            out |= free_vars(e.default)
        return free_vars(e.scrut) | (out - {e.binder})
    raise TypeError(f"not an expression: {e!r}")


def module_to_expr(m: Module) -> Expr:
    """Nest the binding groups of ``m`` around ``Var(main)``, outermost first."""
    body: Expr = Var(m.main)
    for g in reversed(m.binds):
        if isinstance(g, NonRec):
            body = Let(g.binder, g.expr, body)
        else:
            body = LetRec(tuple(g.bindings), body)
    return body


def expr_size(e: Expr) -> int:
    return 1 + sum(expr_size(c) for c in children(e))
