"""Linear constraints over annotation variables and an exact simplex solver.

All arithmetic is rational. Internally the tableau uses ``gmpy2.mpq`` for
speed; everything crossing the module boundary is a :class:`fractions.Fraction`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Union

import gmpy2

LE, EQ, GE = "<=", "=", ">="
OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass(frozen=True)
class AnnVar:
    id: int
    origin: str = field(default="", compare=False)

    def __str__(self):
        return f"v{self.id}"

    def __repr__(self):
        return f"v{self.id}"


Annotation = Union[AnnVar, Fraction]
Number = Union[int, Fraction]


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if type(x).__name__ == "mpq":
        return Fraction(int(x.numerator), int(x.denominator))
    return Fraction(x)


@dataclass
class LinConstraint:
    terms: dict[AnnVar, Fraction]
    relation: str
    rhs: Fraction
    origin: str = ""

    def holds(self, assignment: dict[AnnVar, Fraction]) -> bool:
        lhs = sum((c * assignment.get(v, Fraction(0)) for v, c in self.terms.items()),
                  Fraction(0))
        if self.relation == LE:
            return lhs <= self.rhs
        if self.relation == GE:
            return lhs >= self.rhs
        return lhs == self.rhs

    def __str__(self):
        return f"{_fmt_terms(self.terms)} {self.relation} {self.rhs}"


def _fmt_terms(terms) -> str:
    if not terms:
        return "0"
    parts = []
    for v, c in terms.items():
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = str(v) if mag == 1 else f"{mag} {v}"
        parts.append((sign, body))
    s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        s += f" {sign} {body}"
    return s


def _collect(side) -> tuple[dict[AnnVar, Fraction], Fraction]:
    """Normalize a side given as an annotation, number, or iterable of
    annotations / ``(coef, annotation)`` pairs."""
    terms: dict[AnnVar, Fraction] = {}
    const = Fraction(0)
    if isinstance(side, (AnnVar, Fraction, int)):
        side = [side]
    for item in side:
        coef = Fraction(1)
        if isinstance(item, tuple):
            coef, item = as_fraction(item[0]), item[1]
        if isinstance(item, AnnVar):
            terms[item] = terms.get(item, Fraction(0)) + coef
        else:
            const += coef * as_fraction(item)
    return terms, const


class LinearProgram:
    """Constraint accumulator; every variable is implicitly non-negative."""

    def __init__(self):
        self.constraints: list[LinConstraint] = []
        self.variables: list[AnnVar] = []
        self.objective: dict[AnnVar, Fraction] = {}
        self.infeasible_at: Optional[str] = None
        self._ids = itertools.count(1)

    def fresh(self, origin: str = "") -> AnnVar:
        v = AnnVar(next(self._ids), origin)
        self.variables.append(v)
        return v

    def add(self, c: LinConstraint) -> Optional[int]:
        """Append ``c``; returns its index, or ``None`` when it was resolved
        at insertion (trivially true, or recorded as an infeasibility)."""
        terms = {v: k for v, k in c.terms.items() if k != 0}
        if not terms:
            if not LinConstraint({}, c.relation, c.rhs).holds({}):
                if self.infeasible_at is None:
                    self.infeasible_at = c.origin or str(c)
            return None
        self.constraints.append(LinConstraint(terms, c.relation, c.rhs, c.origin))
        return len(self.constraints) - 1

    def relate(self, lhs, relation: str, rhs, origin: str = "") -> Optional[int]:
        lt, lc = _collect(lhs)
        rt, rc = _collect(rhs)
        terms = dict(lt)
        for v, k in rt.items():
            terms[v] = terms.get(v, Fraction(0)) - k
        return self.add(LinConstraint(terms, relation, rc - lc, origin))

    def ge(self, lhs, rhs, origin: str = ""):
        return self.relate(lhs, GE, rhs, origin)

    def le(self, lhs, rhs, origin: str = ""):
        return self.relate(lhs, LE, rhs, origin)

    def eq(self, lhs, rhs, origin: str = ""):
        return self.relate(lhs, EQ, rhs, origin)

    def set_objective(self, weights: dict[AnnVar, Number]):
        self.objective = {v: as_fraction(w) for v, w in weights.items() if w != 0}

    def check(self, assignment: dict[AnnVar, Fraction]) -> list[LinConstraint]:
        """Constraints violated by ``assignment`` (exact)."""
        bad = [c for c in self.constraints if not c.holds(assignment)]
        bad += [LinConstraint({v: Fraction(1)}, GE, Fraction(0), "nonneg")
                for v, x in assignment.items() if x < 0]
        return bad

    def to_cplex(self) -> str:
        """Render in CPLEX-LP text format (integer-scaled rows, exact)."""
        lines = ["\\ lazecost linear program", "Minimize"]
        lines.append(" obj: " + (_cplex_row(self.objective) if self.objective else "0 v0"))
        lines.append("Subject To")
        for i, c in enumerate(self.constraints):
            scale = math.lcm(*[t.denominator for t in c.terms.values()], c.rhs.denominator)
            row = {v: k * scale for v, k in c.terms.items()}
            lines.append(f" c{i + 1}: {_cplex_row(row)} {c.relation} {c.rhs * scale}")
        lines.append("Bounds")
        for v in self.variables:
            lines.append(f" {v} >= 0")
        lines.append("End")
        return "\n".join(lines) + "\n"


def _cplex_row(terms) -> str:
    out = []
    for v, k in terms.items():
        k = Fraction(k)
        num = k.numerator if k.denominator == 1 else float(k)
        sign = "-" if k < 0 else "+"
        out.append(f"{sign} {abs(num)} {v}")
    s = " ".join(out)
    return s[2:] if s.startswith("+ ") else s


@dataclass
class Solution:
    status: str
    assignment: dict[AnnVar, Fraction] = field(default_factory=dict)
    objective: Optional[Fraction] = None

    def value(self, a: Annotation) -> Fraction:
        if isinstance(a, AnnVar):
            return self.assignment.get(a, Fraction(0))
        return as_fraction(a)


# -- presolve ----------------------------------------------------------------

class _UnionFind:
    def __init__(self):
        self.parent: dict[AnnVar, AnnVar] = {}

    def find(self, v):
        root = v
        while self.parent.get(root, root) is not root:
            root = self.parent[root]
        while v is not root:
            nxt = self.parent.get(v, v)
            self.parent[v] = root
            v = nxt
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra is rb:
            return
        # keep the smaller id as representative for determinism
        if rb.id < ra.id:
            ra, rb = rb, ra
        self.parent[rb] = ra


def _presolve(lp: LinearProgram):
    """Merge variables related by ``a = b`` and fix variables forced to zero.

    Returns ``(rows, objective, uf, zero)``, rows as (terms, rel, rhs) over
    representatives with substituted zeros removed.
    """
    uf = _UnionFind()
    rows = []
    for c in lp.constraints:
        if (c.relation == EQ and c.rhs == 0 and len(c.terms) == 2):
            (a, ka), (b, kb) = c.terms.items()
            if ka == -kb:
                uf.union(a, b)
                continue
        rows.append(c)

    def canon(terms):
        out: dict[AnnVar, Fraction] = {}
        for v, k in terms.items():
            r = uf.find(v)
            out[r] = out.get(r, Fraction(0)) + k
        return {v: k for v, k in out.items() if k != 0}

    work = [(canon(c.terms), c.relation, c.rhs) for c in rows]
    zero: set[AnnVar] = set()
    changed = True
    while changed:
        changed = False
        nxt = []
        for terms, rel, rhs in work:
            terms = {v: k for v, k in terms.items() if v not in zero}
            if not terms:
                nxt.append((terms, rel, rhs))
                continue
            if rhs == 0 and len(terms) == 1:
                (v, k), = terms.items()
                # k*v <= 0 (or = 0) with v >= 0 forces v = 0
                if rel == EQ or (rel == LE and k > 0) or (rel == GE and k < 0):
                    zero.add(v)
                    changed = True
                    continue
                continue  # k*v >= 0 style rows are implied by v >= 0
            nxt.append((terms, rel, rhs))
        work = nxt
    objective: dict[AnnVar, Fraction] = {}
    for v, w in lp.objective.items():
        r = uf.find(v)
        if r not in zero:
            objective[r] = objective.get(r, Fraction(0)) + w
    return work, objective, uf, zero


# -- simplex -----------------------------------------------------------------

_Q = gmpy2.mpq
_ZERO = _Q(0)


class _Tableau:
    def __init__(self, rows, nvars, costs):
        self.rows: list[dict[int, object]] = []
        self.rhs: list = []
        self.basis: list[int] = []
        self.ncols = nvars
        self.artificial: set[int] = set()
        self.costs = costs
        for terms, rel, rhs in rows:
            row = {j: _Q(k.numerator, k.denominator) for j, k in terms.items()}
            b = _Q(rhs.numerator, rhs.denominator)
            if b < 0:
                row = {j: -k for j, k in row.items()}
                b = -b
                rel = {LE: GE, GE: LE, EQ: EQ}[rel]
            if b == 0 and rel == GE:
                row = {j: -k for j, k in row.items()}
                rel = LE
            if rel == LE:
                s = self._col()
                row[s] = _Q(1)
                self._push(row, b, s)
            elif rel == GE:
                s = self._col()
                row[s] = _Q(-1)
                a = self._col(artificial=True)
                row[a] = _Q(1)
                self._push(row, b, a)
            else:
                a = self._col(artificial=True)
                row[a] = _Q(1)
                self._push(row, b, a)

    def _col(self, artificial=False) -> int:
        j = self.ncols
        self.ncols += 1
        if artificial:
            self.artificial.add(j)
        return j

    def _push(self, row, b, basic):
        self.rows.append(row)
        self.rhs.append(b)
        self.basis.append(basic)

    def pivot(self, r: int, c: int):
        prow = self.rows[r]
        piv = prow[c]
        if piv != 1:
            inv = 1 / piv
            for j in prow:
                prow[j] *= inv
            self.rhs[r] *= inv
        prhs = self.rhs[r]
        items = list(prow.items())
        for i, row in enumerate(self.rows):
            if i == r:
                continue
            f = row.get(c)
            if f is None:
                continue
            for j, k in items:
                v = row.get(j, _ZERO) - f * k
                if v == 0:
                    row.pop(j, None)
                else:
                    row[j] = v
            self.rhs[i] -= f * prhs
        f = self.obj.get(c)
        if f is not None:
            for j, k in items:
                v = self.obj.get(j, _ZERO) - f * k
                if v == 0:
                    self.obj.pop(j, None)
                else:
                    self.obj[j] = v
        self.basis[r] = c

    def reduced_costs(self, costs: dict[int, object]):
        obj = {j: c for j, c in costs.items() if c != 0}
        for i, b in enumerate(self.basis):
            cb = costs.get(b)
            if cb:
                for j, k in self.rows[i].items():
                    v = obj.get(j, _ZERO) - cb * k
                    if v == 0:
                        obj.pop(j, None)
                    else:
                        obj[j] = v
        self.obj = obj

    def run(self, allowed) -> str:
        """Bland's rule until optimal; returns OPTIMAL or UNBOUNDED."""
        while True:
            enter = None
            for j, d in self.obj.items():
                if d < 0 and allowed(j) and (enter is None or j < enter):
                    enter = j
            if enter is None:
                return OPTIMAL
            best, best_ratio = None, None
            for i, row in enumerate(self.rows):
                a = row.get(enter)
                if a is not None and a > 0:
                    ratio = self.rhs[i] / a
                    if (best is None or ratio < best_ratio
                            or (ratio == best_ratio and self.basis[i] < self.basis[best])):
                        best, best_ratio = i, ratio
            if best is None:
                return UNBOUNDED
            self.pivot(best, enter)


def _simplex(rows, objective: dict[AnnVar, Fraction]):
    variables = sorted({v for terms, _, _ in rows for v in terms} | set(objective),
                       key=lambda v: v.id)
    index = {v: j for j, v in enumerate(variables)}
    irows = [({index[v]: k for v, k in terms.items()}, rel, rhs) for terms, rel, rhs in rows]
    t = _Tableau(irows, len(variables), None)
    if t.artificial:
        t.reduced_costs({a: _Q(1) for a in t.artificial})
        t.run(lambda j: True)
        if any(t.rhs[i] != 0 for i, b in enumerate(t.basis) if b in t.artificial):
            return INFEASIBLE, {}
        # drive remaining (zero-valued) artificials out of the basis
        for i in range(len(t.rows)):
            if t.basis[i] in t.artificial:
                for j in sorted(t.rows[i]):
                    if j not in t.artificial:
                        t.pivot(i, j)
                        break
        keep = [i for i, b in enumerate(t.basis) if b not in t.artificial]
        t.rows = [{j: k for j, k in t.rows[i].items() if j not in t.artificial} for i in keep]
        t.rhs = [t.rhs[i] for i in keep]
        t.basis = [t.basis[i] for i in keep]
    costs = {index[v]: _Q(w.numerator, w.denominator) for v, w in objective.items()}
    t.reduced_costs(costs)
    status = t.run(lambda j: j not in t.artificial)
    if status == UNBOUNDED:
        return UNBOUNDED, {}
    values = {variables[b]: as_fraction(t.rhs[i]) for i, b in enumerate(t.basis)
              if b < len(variables)}
    return OPTIMAL, values


def solve(lp: LinearProgram) -> Solution:
    """Minimize ``lp.objective`` subject to the constraints and ``v >= 0``."""
    if lp.infeasible_at is not None:
        return Solution(INFEASIBLE)
    rows, objective, uf, zero = _presolve(lp)
    for terms, rel, rhs in rows:
        if not terms and not LinConstraint({}, rel, rhs).holds({}):
            return Solution(INFEASIBLE)
    rows = [r for r in rows if r[0]]
    status, values = _simplex(rows, objective)
    if status != OPTIMAL:
        return Solution(status)
    assignment = {}
    for v in lp.variables:
        r = uf.find(v)
        assignment[v] = Fraction(0) if r in zero else values.get(r, Fraction(0))
    for v in list(lp.objective) + [w for c in lp.constraints for w in c.terms]:
        if v not in assignment:
            r = uf.find(v)
            assignment[v] = Fraction(0) if r in zero else values.get(r, Fraction(0))
    obj = sum((w * assignment[v] for v, w in lp.objective.items()), Fraction(0))
    return Solution(OPTIMAL, assignment, obj)


def default_weights(root_upper: Annotation, result_annotations: Iterable[AnnVar],
                    variables: Iterable[AnnVar], order: str = "asymptotic") -> dict[AnnVar, int]:
    """Single-objective emulation of lexicographic minimization.

    ``"asymptotic"`` ranks the cost annotations of the result type first and
    the root bound second; ``"bound-first"`` swaps the two. Everything else
    gets weight 1.
    """
    if order not in ("asymptotic", "bound-first"):
        raise ValueError(f"unknown objective order {order!r}")
    variables = list(variables)
    big = 1 + len(variables)
    hi, lo = (big * big, big) if order == "asymptotic" else (big, big * big)
    weights = {v: 1 for v in variables}
    for v in result_annotations:
        weights[v] = hi
    if isinstance(root_upper, AnnVar):
        weights[root_upper] = lo
    return weights
