"""Constraint-generating type inference for annotated types.

Each expression form has exactly one syntax-directed rule. Structural rules
are woven in at fixed places: context splitting at multi-premise rules,
prepaying thunk debt whenever a variable enters a context, and one slack
variable relaxing each case scrutinee.

A judgment ``ctx |-^p_p' e : T`` promises that evaluating ``e`` to weak head
normal form costs at most ``p - p'`` given the potential in ``ctx``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Optional

from .annotypes import (ZERO, AnnType, Fun, Mu, PrimTy, Thunk, Universe, lower_thunks,
                        held_potentials, pretty, share, subtype, substitute, unfold,
                        unify, walk)
from .linear import (OPTIMAL, AnnVar, Annotation, LinConstraint, LinearProgram, Solution,
                     default_weights, solve)
from .shapes import TypingError, infer_shapes, rename_apart
from .syntax import (PRIMITIVES, AlgAlt, App, CaseAlg, CaseLit, ConRef, Expr, Lam, Let,
                     LetRec, Lit, Module, TyLam, TypeLet, TypeTok, Var, free_vars,
                     module_to_expr)

# -- cost model --------------------------------------------------------------

COST_KINDS = ("var", "app", "cons", "let", "letrec", "match", "prim")


@dataclass(frozen=True)
class CostModel:
    k_var: Fraction = Fraction(0)
    k_app: Fraction = Fraction(0)
    k_cons: Fraction = Fraction(0)
    k_let: Fraction = Fraction(0)
    k_letrec: Fraction = Fraction(0)
    k_match: Fraction = Fraction(0)
    k_prim: Fraction = Fraction(0)

    def __post_init__(self):
        for f in fields(self):
            v = Fraction(getattr(self, f.name))
            if v < 0:
                raise ValueError(f"{f.name} must be non-negative")
            object.__setattr__(self, f.name, v)

    def cost(self, kind: str) -> Fraction:
        return getattr(self, "k_" + kind)

    def as_dict(self) -> dict[str, Fraction]:
        return {k: self.cost(k) for k in COST_KINDS}

    @classmethod
    def preset(cls, name: str) -> "CostModel":
        if name == "alloc":
            return cls(k_cons=1, k_let=1, k_letrec=1)
        if name == "steps":
            return cls(*([1] * len(COST_KINDS)))
        if name == "zero":
            return cls()
        raise ValueError(f"unknown cost preset {name!r}")

    @classmethod
    def parse(cls, text: str) -> "CostModel":
        """A preset name, or ``k=v`` pairs (``cons=1,let=1/2`` or
        ``k_cons=1``) optionally starting from a preset: ``steps,var=0``."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        base = cls()
        if parts and "=" not in parts[0]:
            base = cls.preset(parts.pop(0))
        values = {}
        for p in parts:
            if "=" not in p:
                raise ValueError(f"bad cost setting {p!r}")
            k, v = (s.strip() for s in p.split("=", 1))
            k = k[2:] if k.startswith("k_") else k
            if k not in COST_KINDS:
                raise ValueError(f"unknown cost constant {k!r}")
            values["k_" + k] = Fraction(v)
        return replace(base, **values)


# -- judgments and derivations -------------------------------------------------

@dataclass
class Judgment:
    context: dict[str, AnnType]
    expr: Expr
    type: AnnType
    upper: Annotation
    lower: Annotation

    def render(self, sol: Optional[Solution] = None) -> str:
        from .annotypes import fmt_annotation
        from .parser import print_expr
        ctx = ", ".join(f"{x} : {pretty(t, sol)}" for x, t in self.context.items())
        e = print_expr(self.expr)
        if len(e) > 60:
            e = e[:57] + "..."
        return (f"{ctx} |-^{fmt_annotation(self.upper, sol)}_{fmt_annotation(self.lower, sol)} "
                f"{e} : {pretty(self.type, sol)}")


@dataclass
class DerivationNode:
    rule: str
    conclusion: Judgment
    premises: list["DerivationNode"] = field(default_factory=list)
    emitted: list[int] = field(default_factory=list)

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)

    def dump(self, sol: Optional[Solution] = None, lp: Optional[LinearProgram] = None) -> str:
        lines: list[str] = []

        def go(n: DerivationNode, depth: int):
            pad = "  " * depth
            lines.append(f"{pad}[{n.rule}] {n.conclusion.render(sol)}")
            if lp is not None and sol is None:
                for i in n.emitted:
                    lines.append(f"{pad}    # {lp.constraints[i]}")
            for p in n.premises:
                go(p, depth + 1)

        go(self, 0)
        return "\n".join(lines) + "\n"


class _RecordingProgram(LinearProgram):
    """LP that files every added constraint under the active derivation node."""

    def __init__(self):
        super().__init__()
        self.active: list[list[int]] = []

    def add(self, c: LinConstraint) -> Optional[int]:
        idx = super().add(c)
        if idx is not None and self.active:
            self.active[-1].append(idx)
        return idx


# -- primitives ----------------------------------------------------------------

class PrimTable:
    """Schemas for the built-in binary operators over primitive values.

    Each use gets ``T^a Prim -0-> T^b Prim -c-> Prim`` with fresh ``a, b, c``
    and ``c >= k_prim + a + b``: the operator forces both arguments.
    """

    def __init__(self, cm: CostModel):
        self.cm = cm

    def lookup(self, name: str, u: Universe) -> Fun:
        if name not in PRIMITIVES:
            raise TypingError(f"unbound primitive {name!r}")
        a, b, c = u.fresh(f"prim {name}"), u.fresh(f"prim {name}"), u.fresh(f"prim {name}")
        u.sink.ge(c, [a, b, self.cm.k_prim], f"prim {name}")
        return Fun(Thunk(a, PrimTy()), ZERO, Fun(Thunk(b, PrimTy()), c, PrimTy()))


# -- engine --------------------------------------------------------------------

@dataclass(frozen=True)
class InferOptions:
    legacy_lower_thunks: bool = False
    prepay: bool = True
    relax: bool = True
    force_general_app: bool = False
    objective: str = "asymptotic"


class Engine:
    def __init__(self, decls, shapes, cm: CostModel, options: InferOptions,
                 lp: Optional[_RecordingProgram] = None):
        self.lp = lp or _RecordingProgram()
        self.u = Universe(decls, self.lp)
        self.shapes = shapes
        self.cm = cm
        self.opts = options
        self.prims = PrimTable(cm)
        self.cons = {c: d for d in decls for c, _ in d.constructors}
        self.captured: list[tuple[str, AnnType]] = []
        self._trace: list[Expr] = []

    # helpers
    def bound(self, terms: list, origin: str) -> Annotation:
        """Annotation standing for (at least) the sum of ``terms``."""
        terms = [t for t in terms if not (isinstance(t, Fraction) and t == 0)]
        if not terms:
            return ZERO
        if all(isinstance(t, Fraction) for t in terms):
            return sum(terms, ZERO)
        if len(terms) == 1:
            return terms[0]
        v = self.u.fresh(origin)
        self.lp.ge(v, terms, origin)
        return v

    def zero_lower(self, node: DerivationNode, origin: str):
        low = node.conclusion.lower
        if isinstance(low, AnnVar):
            self.lp.eq(low, 0, origin)
        elif low != 0:
            raise TypingError(f"{origin}: lower bound must be 0")

    def split(self, ctx: dict[str, AnnType], groups: list[frozenset]) -> list[dict]:
        outs: list[dict] = [{} for _ in groups]
        for x, t in ctx.items():
            idx = [i for i, g in enumerate(groups) if x in g]
            if len(idx) == 1:
                outs[idx[0]][x] = t
            elif idx:
                copies = [self.u.copy(t, f"split {x}") for _ in idx]
                share(t, copies, self.lp, f"split {x}")
                for i, c in zip(idx, copies):
                    outs[i][x] = c
        return outs

    def insert(self, ctx: dict, x: str, t: Thunk, extra: list, origin: str):
        """Add ``x : t`` to ``ctx``, prepaying part of the debt into ``extra``."""
        if not self.opts.prepay or (isinstance(t.cost, Fraction) and t.cost == 0):
            ctx[x] = t
            return
        pre, post = self.u.fresh(f"prepay {x}"), self.u.fresh(f"prepay {x}")
        self.lp.le(t.cost, [pre, post], f"prepay {x}")
        ctx[x] = Thunk(post, t.inner)
        extra.append(pre)

    def var_type(self, x: str) -> Thunk:
        t = self.u.annotate(self.shapes.of(x), f"binder {x}")
        if isinstance(t, Thunk):
            return t
        return Thunk(self.u.fresh(f"binder {x}"), t)

    # dispatch
    def infer(self, e: Expr, ctx: dict[str, AnnType]) -> DerivationNode:
        ctx = {x: t for x, t in ctx.items() if x in free_vars(e)}
        self._trace.append(e)
        self.lp.active.append([])
        try:
            node = self._dispatch(e, ctx)
        except TypingError as err:
            if len(err.trace) < 8:
                from .parser import print_expr
                s = print_expr(e)
                err.trace.append(s if len(s) < 70 else s[:67] + "...")
            raise
        finally:
            self._trace.pop()
            emitted = self.lp.active.pop()
        node.emitted = emitted
        return node

    def _dispatch(self, e, ctx) -> DerivationNode:
        if isinstance(e, Var):
            return self.rule_var(e, ctx)
        if isinstance(e, Lit):
            return DerivationNode("Lit", Judgment(ctx, e, PrimTy(), ZERO, ZERO))
        if isinstance(e, ConRef):
            return self.rule_cons(e, ctx)
        if isinstance(e, Lam):
            return self.rule_abs(e, ctx)
        if isinstance(e, App):
            if isinstance(e.arg, TypeTok):
                return self.rule_tyapp(e, ctx)
            if (isinstance(e.arg, Var) and e.arg.name in ctx
                    and not self.opts.force_general_app):
                return self.rule_appvar(e, ctx)
            return self.rule_app(e, ctx)
        if isinstance(e, Let):
            return self.rule_let(e, ctx)
        if isinstance(e, LetRec):
            return self.rule_letrec(e, ctx)
        if isinstance(e, CaseAlg):
            return self.rule_case_alg(e, ctx)
        if isinstance(e, CaseLit):
            return self.rule_case_lit(e, ctx)
        if isinstance(e, TyLam):
            body = self.infer(e.body, ctx)
            j = body.conclusion
            return DerivationNode("TyAbs", Judgment(ctx, e, Fun(PrimTy(), ZERO, j.type),
                                                    j.upper, ZERO), [body])
        if isinstance(e, TypeLet):
            body = self.infer(e.body, ctx)
            j = body.conclusion
            return DerivationNode("TyLet", Judgment(ctx, e, j.type, j.upper, j.lower), [body])
        raise TypingError(f"unsupported expression {e!r}")

    # rules
    def rule_var(self, e: Var, ctx) -> DerivationNode:
        if e.name in ctx:
            t = ctx[e.name]
            up = self.bound([t.cost, self.cm.k_var], "Var")
            return DerivationNode("Var", Judgment(ctx, e, t.inner, up, ZERO))
        t = self.prims.lookup(e.name, self.u)
        return DerivationNode("Prim", Judgment(ctx, e, t, self.cm.k_var, ZERO))

    def rule_cons(self, e: ConRef, ctx) -> DerivationNode:
        if e.name not in self.cons:
            raise TypingError(f"unknown constructor {e.name!r}")
        mu = self.u.instantiate(self.cons[e.name], f"Cons {e.name}")
        up = self.bound([mu.con(e.name).potential, self.cm.k_cons], "Cons")
        return DerivationNode("Cons", Judgment(ctx, e, self.u.constructor_type(mu, e.name),
                                               up, ZERO))

    def rule_abs(self, e: Lam, ctx) -> DerivationNode:
        for x, t in ctx.items():
            share(t, [t, t], self.lp, f"Abs capture {x}")
            self.captured.append((x, t))
        xt = self.var_type(e.binder)
        inner, extra = dict(ctx), []
        if e.binder in free_vars(e.body):
            self.insert(inner, e.binder, xt, extra, "Abs")
        body = self.infer(e.body, inner)
        self.zero_lower(body, "Abs")
        cost = self.bound([body.conclusion.upper] + extra, "Abs")
        ty = Fun(xt, cost, body.conclusion.type)
        return DerivationNode("Abs", Judgment(ctx, e, ty, ZERO, ZERO), [body])

    def _fun_of(self, node: DerivationNode) -> Fun:
        t = node.conclusion.type
        if not isinstance(t, Fun) or t.is_type_abstraction:
            raise TypingError(f"expected a function, got {pretty(t)}")
        return t

    def rule_appvar(self, e: App, ctx) -> DerivationNode:
        x = e.arg.name
        c_fun, c_arg = self.split(ctx, [free_vars(e.fun), frozenset([x])])
        fun = self.infer(e.fun, c_fun)
        ft = self._fun_of(fun)
        unify(c_arg[x], ft.arg, self.lp, "AppVar")
        j = fun.conclusion
        up = self.bound([j.upper, ft.cost, self.cm.k_app], "AppVar")
        return DerivationNode("AppVar", Judgment(ctx, e, ft.res, up, j.lower), [fun])

    def rule_app(self, e: App, ctx) -> DerivationNode:
        c_fun, c_arg = self.split(ctx, [free_vars(e.fun), free_vars(e.arg)])
        fun = self.infer(e.fun, c_fun)
        ft = self._fun_of(fun)
        arg = self.infer(e.arg, c_arg)
        self.zero_lower(arg, "App")
        self.lp.le(arg.conclusion.upper, ft.arg.cost, "App argument")
        subtype(arg.conclusion.type, ft.arg.inner, self.lp, "App argument")
        j = fun.conclusion
        up = self.bound([j.upper, ft.cost, self.cm.k_app], "App")
        return DerivationNode("App", Judgment(ctx, e, ft.res, up, j.lower), [fun, arg])

    def rule_tyapp(self, e: App, ctx) -> DerivationNode:
        fun = self.infer(e.fun, ctx)
        t = fun.conclusion.type
        if not isinstance(t, Fun) or not t.is_type_abstraction:
            raise TypingError(f"type application of non-abstraction {pretty(t)}")
        j = fun.conclusion
        return DerivationNode("TyApp", Judgment(ctx, e, t.res, j.upper, j.lower), [fun])

    def rule_let(self, e: Let, ctx) -> DerivationNode:
        body_fv = free_vars(e.body) - {e.binder}
        c_rhs, c_body = self.split(ctx, [free_vars(e.rhs), body_fv])
        rhs = self.infer(e.rhs, c_rhs)
        self.zero_lower(rhs, "Let")
        extra: list = []
        if e.binder in free_vars(e.body):
            q = self.bound([rhs.conclusion.upper], "Let thunk")
            self.insert(c_body, e.binder, Thunk(q, rhs.conclusion.type), extra, "Let")
        body = self.infer(e.body, c_body)
        j = body.conclusion
        up = self.bound([j.upper, self.cm.k_let] + extra, "Let")
        return DerivationNode("Let", Judgment(ctx, e, j.type, up, j.lower), [rhs, body])

    def rule_letrec(self, e: LetRec, ctx) -> DerivationNode:
        names = [b for b, _ in e.bindings]
        n = len(names)
        groups = [free_vars(r) - set(names) for _, r in e.bindings]
        groups.append(free_vars(e.body) - set(names))
        *c_rhs, c_body = self.split(ctx, groups)
        views = {x: self.u.annotate(self.shapes.of(x), f"LetRec view {x}") for x in names}
        qv = {x: self.u.fresh(f"LetRec q' {x}") for x in names}
        premises, extra_total = [], []
        types = {}
        for i, (x, rhs_e) in enumerate(e.bindings):
            local = dict(c_rhs[i])
            for y in names:
                local[y] = Thunk(ZERO if y == x else qv[y], views[y])
            rhs = self.infer(rhs_e, local)
            self.zero_lower(rhs, "LetRec")
            a = rhs.conclusion.type
            a2 = self.u.copy(a, f"LetRec A' {x}")
            share(a, [a, a2], self.lp, f"LetRec self-share {x}")
            if self.opts.legacy_lower_thunks:
                lower_thunks(views[x], a2, self.lp, f"LetRec lower {x}")
            else:
                unify(views[x], a2, self.lp, f"LetRec view {x}")
            q2 = self.u.fresh(f"LetRec q'' {x}")
            self.lp.le(rhs.conclusion.upper, [qv[x], q2], f"LetRec cost {x}")
            extra_total.append(q2)
            types[x] = a
            premises.append(rhs)
        body_ctx = dict(c_body)
        body_fv = free_vars(e.body)
        for x in names:
            if x in body_fv:
                self.insert(body_ctx, x, Thunk(qv[x], types[x]), extra_total, "LetRec")
        body = self.infer(e.body, body_ctx)
        premises.append(body)
        j = body.conclusion
        up = self.bound([j.upper, n * self.cm.k_letrec] + extra_total, "LetRec")
        return DerivationNode("LetRec", Judgment(ctx, e, j.type, up, j.lower), premises)

    def _scrutinee(self, e, ctx):
        alt_fv = frozenset()
        for alt in e.alts:
            fv = free_vars(alt.body)
            if isinstance(alt, AlgAlt):
                fv -= set(alt.binders)
            alt_fv |= fv
        if e.default is not None:
            alt_fv |= free_vars(e.default)
        y_used = e.binder in alt_fv
        c_scrut, c_alts = self.split(ctx, [free_vars(e.scrut), alt_fv - {e.binder}])
        scrut = self.infer(e.scrut, c_scrut)
        j = scrut.conclusion
        if self.opts.relax:
            r = self.u.fresh("Relax")
            upper, lower = self.bound([j.upper, r], "Relax"), self.bound([j.lower, r], "Relax")
        else:
            upper, lower = j.upper, j.lower
        return scrut, upper, lower, c_alts, y_used

    def _join(self, branches, origin):
        """Common result type and lower bound for case alternatives."""
        first = branches[0].conclusion.type
        res = first if len(branches) == 1 else self.u.copy(first, origin)
        low = self.u.fresh(origin + " lower")
        for b in branches:
            if res is not first:
                subtype(b.conclusion.type, res, self.lp, origin)
            self.lp.le(low, b.conclusion.lower, origin)
        return res, low

    def rule_case_alg(self, e: CaseAlg, ctx) -> DerivationNode:
        scrut, upper, mid, delta, y_used = self._scrutinee(e, ctx)
        b0 = scrut.conclusion.type
        decl = self.cons[e.alts[0].con]
        if not isinstance(b0, Mu) or b0.decl != decl.name:
            raise TypingError(f"scrutinee of type {pretty(b0)} matched against {decl.name}")
        b = b0
        if y_used:
            b, by = self.u.copy(b0, "CaseAlg"), self.u.copy(b0, "CaseAlg binder")
            share(b0, [b, by], self.lp, "CaseAlg binder")
            delta = {**delta, e.binder: Thunk(ZERO, by)}
        branches = []
        for alt in e.alts:
            con = b.con(alt.con)
            local, extra = dict(delta), []
            fv = free_vars(alt.body)
            for x, f in zip(alt.binders, con.fields):
                if x in fv:
                    self.insert(local, x, unfold(b, f), extra, "CaseAlg field")
            node = self.infer(alt.body, local)
            self.lp.le([node.conclusion.upper] + extra, [mid, con.potential], f"CaseAlg {alt.con}")
            branches.append(node)
        if e.default is not None:
            node = self.infer(e.default, delta)
            present = {a.con for a in e.alts}
            for con in b.constructors:
                if con.name not in present:
                    self.lp.le(node.conclusion.upper, [mid, con.potential],
                               f"CaseAlg default {con.name}")
            branches.append(node)
        res, low = self._join(branches, "CaseAlg")
        up = self.bound([upper, self.cm.k_match], "CaseAlg")
        return DerivationNode("CaseAlg", Judgment(ctx, e, res, up, low), [scrut] + branches)

    def rule_case_lit(self, e: CaseLit, ctx) -> DerivationNode:
        scrut, upper, mid, delta, y_used = self._scrutinee(e, ctx)
        if not isinstance(scrut.conclusion.type, PrimTy):
            raise TypingError(f"literal case on {pretty(scrut.conclusion.type)}")
        if y_used:
            delta = {**delta, e.binder: Thunk(ZERO, PrimTy())}
        branches = []
        bodies = [a.body for a in e.alts] + ([e.default] if e.default is not None else [])
        for body in bodies:
            node = self.infer(body, delta)
            self.lp.le(node.conclusion.upper, mid, "CaseLit")
            branches.append(node)
        res, low = self._join(branches, "CaseLit")
        up = self.bound([upper, self.cm.k_match], "CaseLit")
        return DerivationNode("CaseLit", Judgment(ctx, e, res, up, low), [scrut] + branches)


# -- whole-module analysis -----------------------------------------------------

class AnalysisFailure(Exception):
    """The linear program has no optimal solution."""

    def __init__(self, status: str, lp: LinearProgram, derivation: DerivationNode):
        super().__init__(f"linear program {status}")
        self.status = status
        self.lp = lp
        self.derivation = derivation


@dataclass
class AnalysisResult:
    name: str
    type: AnnType
    upper: Fraction
    lower: Fraction
    symbolic_type: AnnType
    derivation: DerivationNode
    lp: LinearProgram
    solution: Solution
    captured: list[tuple[str, AnnType]]

    def typing(self) -> str:
        return f"⊢{self.upper}/{self.lower} {self.name} : {pretty(self.type)}"

    def captured_potentials(self) -> list[tuple[str, Fraction]]:
        """Solved potentials held by lambda-captured variables."""
        return [(x, self.solution.value(a))
                for x, t in self.captured for a in held_potentials(t)]


def prepare(m: Module) -> tuple[Expr, object]:
    e = rename_apart(module_to_expr(m))
    return e, infer_shapes(e, m.decls)


def generate(m: Module, cm: CostModel, options: InferOptions = InferOptions()):
    """Run inference and set the default objective; returns ``(engine, root)``."""
    e, shapes = prepare(m)
    eng = Engine(m.decls, shapes, cm, options)
    root = eng.infer(e, {})
    j = root.conclusion
    result_vars = [a for kind, a in walk(j.type)
                   if kind in ("thunk", "arrow") and isinstance(a, AnnVar)]
    eng.lp.set_objective(default_weights(j.upper, result_vars, eng.lp.variables,
                                         options.objective))
    return eng, root


def analyze(m: Module, cm: CostModel, options: InferOptions = InferOptions()) -> AnalysisResult:
    eng, root = generate(m, cm, options)
    sol = solve(eng.lp)
    if sol.status != OPTIMAL:
        raise AnalysisFailure(sol.status, eng.lp, root)
    j = root.conclusion
    return AnalysisResult(m.main, substitute(j.type, sol), sol.value(j.upper),
                          sol.value(j.lower), j.type, root, eng.lp, sol, eng.captured)
