"""Concrete syntax for ``.lzc`` files: lexer, recursive-descent parser, printer.

Grammar (layout-insensitive)::

    module  ::= (decl | bind | 'rec' '{' bind* '}')*
    decl    ::= 'data' Con '=' condef ('|' condef)* ';'
    condef  ::= Con [ '(' Con (',' Con)* ')' ]
    bind    ::= ['main'] ident ident* '=' expr ';'
    expr    ::= '\\' ident+ '->' expr | '/\\' ident+ '->' expr
              | 'let' ident '=' expr 'in' expr
              | 'letrec' ident '=' expr (';' ident '=' expr)* [';'] 'in' expr
              | 'tylet' ident '=' name 'in' expr
              | 'case' [ident '='] expr 'of' '{' alt ('|' alt)* '}'
              | atom (atom | '@' name)*
    alt     ::= Con ['(' ident (',' ident)* ')'] '->' expr | lit '->' expr
              | 'default' '->' expr

Top-level bindings may appear in any order; they are grouped into
strongly-connected components and emitted in dependency order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .syntax import (PRIMITIVES, AlgAlt, App, CaseAlg, CaseLit, ConRef, DataDecl,
                     Expr, Lam, Let, LetRec, Lit, LitAlt, Literal, Module, NonRec,
                     Prim, Rec, RecGroup, Ref, TyLam, TypeLet, TypeTok, Var, children,
                     free_vars)

KEYWORDS = {"data", "let", "letrec", "in", "case", "of", "default", "tylet", "main", "rec"}
PRIM_TYPE_NAMES = {"Prim", "Int", "Int#", "Float", "Float#", "Char", "Char#"}


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.msg = msg
        self.line = line
        self.col = col


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|--[^\n]*)
  | (?P<prim>[+\-*<=>]+\#)
  | (?P<float>-?[0-9]+\.[0-9]+)
  | (?P<int>-?[0-9]+)
  | (?P<char>'(?:\\.|[^'\\])')
  | (?P<tylam>/\\)
  | (?P<arrow>->)
  | (?P<con>[A-Z][A-Za-z0-9_']*\#?)
  | (?P<ident>[a-z_][A-Za-z0-9_']*)
  | (?P<sym>[\\=|;{}(),@])
""", re.VERBOSE)


def tokenize(source: str) -> list[Token]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind != "ws":
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            toks.append(Token(kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0
        self.constructors: dict[str, DataDecl] = {}
        self.positions: dict[int, Token] = {}

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("kw", "sym", "arrow", "tylam")

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    # module level
    def module(self) -> tuple[list[DataDecl], list, Optional[str]]:
        decls, items, main = [], [], None
        # declarations first so constructors resolve regardless of order
        start = self.i
        while self.tok.kind != "eof":
            if self.at("data"):
                decls.append(self.decl())
            else:
                self.i += 1
        self._check_decls(decls)
        self.i = start
        while self.tok.kind != "eof":
            if self.at("data"):
                self._skip_decl()
            elif self.at("rec"):
                self.expect("rec")
                self.expect("{")
                group = []
                while not self.at("}"):
                    name, expr, is_main = self.bind()
                    group.append((name, expr))
                    if is_main:
                        main = self._set_main(main, name)
                self.expect("}")
                if not group:
                    self.error("empty rec block")
                items.append(("rec", group))
            else:
                name, expr, is_main = self.bind()
                items.append(("bind", [(name, expr)]))
                if is_main:
                    main = self._set_main(main, name)
        return decls, items, main

    def _set_main(self, main, name):
        if main is not None:
            self.error(f"more than one main binding ({main}, {name})")
        return name

    def _skip_decl(self):
        while not self.at(";"):
            self.i += 1
        self.i += 1

    def decl(self) -> DataDecl:
        self.expect("data")
        t = self.tok
        if t.kind != "con":
            self.error("expected datatype name")
        name = t.text
        self.i += 1
        self.expect("=")
        cons = []
        while True:
            ct = self.tok
            if ct.kind != "con":
                self.error("expected constructor name")
            self.i += 1
            fields = []
            if self.at("("):
                self.expect("(")
                while True:
                    ft = self.tok
                    if ft.kind != "con":
                        self.error("expected field type")
                    self.i += 1
                    fields.append((ft.text, ft))
                    if self.at(","):
                        self.i += 1
                        continue
                    break
                self.expect(")")
            cons.append((ct.text, ct, fields))
            if self.at("|"):
                self.i += 1
                continue
            break
        self.expect(";")
        self._pending = getattr(self, "_pending", [])
        self._pending.append((name, t, cons))
        return DataDecl(name, tuple((c, ()) for c, _, _ in cons))

    def _check_decls(self, decls: list[DataDecl]):
        pending = getattr(self, "_pending", [])
        names = {}
        for name, t, _ in pending:
            if name in names or name in PRIM_TYPE_NAMES:
                raise ParseError(f"duplicate datatype {name!r}", t.line, t.col)
            names[name] = t
        resolved = []
        for name, t, cons in pending:
            out = []
            for cname, ct, fields in cons:
                if cname in self.constructors or any(cname == c for c, _ in out):
                    raise ParseError(f"duplicate constructor {cname!r}", ct.line, ct.col)
                specs = []
                for fname, ft in fields:
                    if fname in PRIM_TYPE_NAMES:
                        specs.append(Prim())
                    elif fname == name:
                        specs.append(Rec())
                    elif fname in names:
                        specs.append(Ref(fname))
                    else:
                        raise ParseError(f"unknown datatype {fname!r}", ft.line, ft.col)
                out.append((cname, tuple(specs)))
            d = DataDecl(name, tuple(out))
            for cname, _ in out:
                self.constructors[cname] = d
            resolved.append(d)
        _check_ref_cycles(resolved, names)
        decls[:] = resolved

    def bind(self) -> tuple[str, Expr, bool]:
        is_main = False
        if self.at("main"):
            self.i += 1
            if self.at("="):
                name = "main"
            else:
                is_main = True
                name = self.ident()
        else:
            name = self.ident()
        params = []
        while self.tok.kind == "ident":
            params.append(self.ident())
        self.expect("=")
        body = self.expr()
        self.expect(";")
        for p in reversed(params):
            body = Lam(p, body)
        return name, body, is_main

    # expressions
    def expr(self) -> Expr:
        if self.at("\\") or self.at("/\\"):
            is_ty = self.at("/\\")
            self.i += 1
            names = [self.ident()]
            while self.tok.kind == "ident":
                names.append(self.ident())
            self.expect("->")
            body = self.expr()
            for n in reversed(names):
                body = TyLam(n, body) if is_ty else Lam(n, body)
            return body
        if self.at("let"):
            self.i += 1
            x = self.ident()
            self.expect("=")
            rhs = self.expr()
            self.expect("in")
            return Let(x, rhs, self.expr())
        if self.at("letrec"):
            self.i += 1
            binds = []
            while True:
                tk = self.tok
                name = self.ident()
                if any(name == n for n, _ in binds):
                    self.error(f"duplicate letrec binder {name!r}", tk)
                self.expect("=")
                binds.append((name, self.expr()))
                if self.at(";"):
                    self.i += 1
                    if self.at("in"):
                        break
                    continue
                break
            self.expect("in")
            return LetRec(tuple(binds), self.expr())
        if self.at("tylet"):
            self.i += 1
            x = self.ident()
            self.expect("=")
            tn = self.tok
            if tn.kind not in ("con", "ident"):
                self.error("expected type name")
            self.i += 1
            self.expect("in")
            return TypeLet(x, tn.text, self.expr())
        if self.at("case"):
            return self.case()
        return self.application()

    def case(self) -> Expr:
        case_tok = self.expect("case")
        binder = "_"
        if self.tok.kind == "ident" and self.peek().text == "=" and self.peek().kind == "sym":
            binder = self.ident()
            self.expect("=")
        scrut = self.expr()
        self.expect("of")
        self.expect("{")
        alg, lits, default = [], [], None
        while True:
            t = self.tok
            if self.at("default"):
                if default is not None:
                    self.error("duplicate default alternative")
                self.i += 1
                self.expect("->")
                default = self.expr()
            elif t.kind == "con":
                if t.text not in self.constructors:
                    self.error(f"unknown constructor {t.text!r}")
                self.i += 1
                binders = []
                if self.at("("):
                    self.i += 1
                    if not self.at(")"):
                        binders.append(self.ident())
                        while self.at(","):
                            self.i += 1
                            binders.append(self.ident())
                    self.expect(")")
                arity = len(self.constructors[t.text].fields(t.text))
                if len(binders) != arity:
                    self.error(f"constructor {t.text} expects {arity} binders", t)
                if len(set(binders)) != len(binders):
                    self.error("duplicate pattern binder", t)
                self.expect("->")
                alg.append((AlgAlt(t.text, tuple(binders), self.expr()), t))
            elif t.kind in ("int", "float", "char"):
                self.i += 1
                lit = Literal(t.kind, t.text)
                self.expect("->")
                lits.append((LitAlt(lit, self.expr()), t))
            else:
                self.error("expected case alternative")
            if self.at("|"):
                self.i += 1
                continue
            break
        self.expect("}")
        if alg and lits:
            self.error("case mixes constructor and literal patterns", case_tok)
        if lits:
            seen = set()
            for alt, t in lits:
                if alt.lit in seen:
                    self.error(f"duplicate literal pattern {alt.lit}", t)
                seen.add(alt.lit)
            if default is None:
                self.error("non-exhaustive literal case", case_tok)
            return CaseLit(binder, scrut, tuple(a for a, _ in lits), default)
        if not alg:
            self.error("case needs at least one constructor or literal alternative", case_tok)
        decl = self.constructors[alg[0][0].con]
        seen = set()
        for alt, t in alg:
            if self.constructors[alt.con] is not decl:
                self.error(f"constructor {alt.con} is not from datatype {decl.name}", t)
            if alt.con in seen:
                self.error(f"duplicate alternative for {alt.con}", t)
            seen.add(alt.con)
        return CaseAlg(binder, scrut, tuple(a for a, _ in alg), default)

    def application(self) -> Expr:
        e = self.atom()
        while True:
            if self.at("@"):
                self.i += 1
                tn = self.tok
                if tn.kind not in ("con", "ident"):
                    self.error("expected type after '@'")
                self.i += 1
                e = App(e, TypeTok(tn.text))
            elif self._atom_start():
                e = App(e, self.atom())
            else:
                return e

    def _atom_start(self) -> bool:
        t = self.tok
        return t.kind in ("ident", "con", "prim", "int", "float", "char") or self.at("(")

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "ident" or t.kind == "prim":
            self.i += 1
            v = Var(t.text)
            self.positions[id(v)] = t
            return v
        if t.kind == "con":
            self.i += 1
            if t.text not in self.constructors:
                self.error(f"unknown constructor {t.text!r}", t)
            return ConRef(t.text)
        if t.kind in ("int", "float", "char"):
            self.i += 1
            return Lit(Literal(t.kind, t.text))
        if self.at("("):
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        self.error(f"unexpected {t.text or 'end of input'!r}")

    def scope_check(self, e: Expr, scope: frozenset) -> None:
        if isinstance(e, Var):
            if e.name == "_" or not (e.name in scope or e.name in PRIMITIVES):
                t = self.positions.get(id(e))
                raise ParseError(f"unbound identifier {e.name!r}",
                                 t.line if t else 0, t.col if t else 0)
        elif isinstance(e, Lam):
            self.scope_check(e.body, scope | {e.binder})
        elif isinstance(e, Let):
            self.scope_check(e.rhs, scope)
            self.scope_check(e.body, scope | {e.binder})
        elif isinstance(e, LetRec):
            inner = scope | {b for b, _ in e.bindings}
            for _, rhs in e.bindings:
                self.scope_check(rhs, inner)
            self.scope_check(e.body, inner)
        elif isinstance(e, (CaseAlg, CaseLit)):
            self.scope_check(e.scrut, scope)
            inner = scope | {e.binder}
            for alt in e.alts:
                extra = set(alt.binders) if isinstance(alt, AlgAlt) else set()
                self.scope_check(alt.body, inner | extra)
            if e.default is not None:
                self.scope_check(e.default, inner)
        else:
            for c in children(e):
                self.scope_check(c, scope)


def _check_ref_cycles(decls: list[DataDecl], names) -> None:
    graph = {d.name: {f.name for _, fs in d.constructors for f in fs if isinstance(f, Ref)}
             for d in decls}
    state: dict[str, int] = {}

    def visit(n, path):
        state[n] = 1
        for m in sorted(graph[n]):
            if state.get(m) == 1:
                t = names[n]
                raise ParseError(f"mutually recursive datatypes {path + [m]}", t.line, t.col)
            if m not in state:
                visit(m, path + [m])
        state[n] = 2

    for d in decls:
        if d.name not in state:
            visit(d.name, [d.name])


def _group_bindings(items) -> list:
    """Strongly-connected components of top-level items, dependencies first."""
    owner = {}
    for k, (_, binds) in enumerate(items):
        for name, _ in binds:
            owner[name] = k
    deps = []
    for _, binds in items:
        d = set()
        for _, e in binds:
            d |= {owner[v] for v in free_vars(e) if v in owner}
        deps.append(sorted(d))

    index, low, on_stack, stack, comps = {}, {}, set(), [], []
    counter = [0]

    def strong(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in deps[v]:
            if w not in index:
                strong(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            comps.append(sorted(comp))

    for v in range(len(items)):
        if v not in index:
            strong(v)

    groups = []
    for comp in comps:
        kinds = [items[k][0] for k in comp]
        binds = [b for k in comp for b in items[k][1]]
        if len(comp) == 1 and kinds[0] == "bind" and not (
                {binds[0][0]} & free_vars(binds[0][1])):
            groups.append(NonRec(binds[0][0], binds[0][1]))
        else:
            groups.append(RecGroup(tuple(binds)))
    return groups


def parse_module(source: str, main: Optional[str] = None) -> Module:
    """Parse and scope-check a module; ``main`` overrides the analyzed binding."""
    p = _Parser(source)
    decls, items, marked = p.module()
    if not items:
        raise ParseError("module has no bindings")
    names = [n for _, binds in items for n, _ in binds]
    seen = set()
    for n in names:
        if n in seen:
            raise ParseError(f"duplicate top-level binding {n!r}")
        seen.add(n)
    top = frozenset(names)
    for _, binds in items:
        for _, e in binds:
            p.scope_check(e, top)
    groups = _group_bindings(items)
    if main is None:
        main = marked or ("main" if "main" in names else names[-1])
    elif main not in names:
        raise ParseError(f"no binding named {main!r}")
    return Module(decls, groups, main)


def parse_expr(source: str, decls: list[DataDecl] = (), scope=frozenset()) -> Expr:
    """Parse a standalone expression against the given declarations."""
    p = _Parser(source)
    for d in decls:
        for c, _ in d.constructors:
            p.constructors[c] = d
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(f"trailing input {p.tok.text!r}")
    p.scope_check(e, frozenset(scope))
    return e


# -- printing ----------------------------------------------------------------

_OPEN = (Lam, TyLam, Let, LetRec, CaseAlg, CaseLit, TypeLet)


def print_expr(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, ConRef):
        return e.name
    if isinstance(e, Lit):
        return e.lit.payload
    if isinstance(e, TypeTok):
        return "@" + e.name
    if isinstance(e, Lam):
        return f"\\{e.binder} -> {print_expr(e.body)}"
    if isinstance(e, TyLam):
        return f"/\\{e.binder} -> {print_expr(e.body)}"
    if isinstance(e, App):
        f = print_expr(e.fun)
        if isinstance(e.fun, _OPEN):
            f = f"({f})"
        if isinstance(e.arg, TypeTok):
            return f"{f} @{e.arg.name}"
        a = print_expr(e.arg)
        if isinstance(e.arg, _OPEN + (App,)):
            a = f"({a})"
        return f"{f} {a}"
    if isinstance(e, Let):
        return f"let {e.binder} = {print_expr(e.rhs)} in {print_expr(e.body)}"
    if isinstance(e, LetRec):
        bs = "; ".join(f"{b} = {print_expr(r)}" for b, r in e.bindings)
        return f"letrec {bs} in {print_expr(e.body)}"
    if isinstance(e, TypeLet):
        return f"tylet {e.binder} = {e.type_name} in {print_expr(e.body)}"
    if isinstance(e, (CaseAlg, CaseLit)):
        alts = []
        for alt in e.alts:
            if isinstance(alt, AlgAlt):
                pat = alt.con + (f"({', '.join(alt.binders)})" if alt.binders else "")
            else:
                pat = alt.lit.payload
            alts.append(f"{pat} -> {print_expr(alt.body)}")
        if e.default is not None:
            alts.append(f"default -> {print_expr(e.default)}")
        return f"case {e.binder} = {print_expr(e.scrut)} of {{ {' | '.join(alts)} }}"
    raise TypeError(e)


def _print_decl(d: DataDecl) -> str:
    cons = []
    for c, fields in d.constructors:
        names = ["Prim" if isinstance(f, Prim) else d.name if isinstance(f, Rec) else f.name
                 for f in fields]
        cons.append(c + (f"({', '.join(names)})" if names else ""))
    return f"data {d.name} = {' | '.join(cons)};"


def print_module(m: Module) -> str:
    lines = [_print_decl(d) for d in m.decls]

    def bind(name, e):
        prefix = "main " if name == m.main and name != "main" else ""
        return f"{prefix}{name} = {print_expr(e)};"

    for g in m.binds:
        if isinstance(g, NonRec):
            lines.append(bind(g.binder, g.expr))
        else:
            lines.append("rec {")
            lines.extend("  " + bind(b, e) for b, e in g.bindings)
            lines.append("}")
    return "\n".join(lines) + "\n"
