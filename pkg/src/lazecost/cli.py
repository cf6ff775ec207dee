"""Command-line driver.

Exit codes: 0 success, 1 parse or type error, 2 linear program without an
optimal solution, 3 bound violated in check mode, 4 evaluation error,
64 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .annotypes import Con, Fun, Mu, PrimTy, Thunk, TyVar, pretty
from .infer import AnalysisFailure, AnalysisResult, CostModel, InferOptions, analyze
from .interp import (WHNF, Demand, EvalError, ShapeError, aggregate_bound, eval_demand,
                     parse_demand)
from .parser import ParseError, parse_module
from .shapes import TypingError
from .syntax import Module

EXIT_OK, EXIT_TYPE, EXIT_INFEASIBLE, EXIT_UNSOUND, EXIT_EVAL, EXIT_USAGE = 0, 1, 2, 3, 4, 64
SCHEMA = 1


@dataclass
class RunConfig:
    input_path: Path
    mode: str = "analyze"
    main_name: Optional[str] = None
    cost_model: CostModel = field(default_factory=lambda: CostModel.preset("alloc"))
    options: InferOptions = field(default_factory=InferOptions)
    demands: list[Demand] = field(default_factory=list)
    dump_lp: Optional[Path] = None
    dump_derivation: Optional[Path] = None
    fmt: str = "text"

    def __post_init__(self):
        if self.mode == "check" and not self.demands:
            raise ValueError("check mode needs at least one --demand")


def rat(x: Fraction) -> list[int]:
    x = Fraction(x)
    return [x.numerator, x.denominator]


def type_to_json(t) -> dict:
    if isinstance(t, TyVar):
        return {"var": t.decl}
    if isinstance(t, PrimTy):
        return {"prim": True}
    if isinstance(t, Thunk):
        return {"thunk": rat(t.cost), "inner": type_to_json(t.inner)}
    if isinstance(t, Fun):
        return {"arg": type_to_json(t.arg), "cost": rat(t.cost), "res": type_to_json(t.res)}
    if isinstance(t, Mu):
        return {"mu": t.decl, "constructors": [
            {"name": c.name, "potential": rat(c.potential),
             "fields": [type_to_json(f) for f in c.fields]} for c in t.constructors]}
    raise TypeError(t)


def type_from_json(d: dict):
    """Inverse of :func:`type_to_json`."""
    if "var" in d:
        return TyVar(d["var"])
    if "prim" in d:
        return PrimTy()
    if "thunk" in d:
        return Thunk(Fraction(*d["thunk"]), type_from_json(d["inner"]))
    if "arg" in d:
        return Fun(type_from_json(d["arg"]), Fraction(*d["cost"]), type_from_json(d["res"]))
    return Mu(d["mu"], tuple(Con(c["name"], Fraction(*c["potential"]),
                                 tuple(type_from_json(f) for f in c["fields"]))
                             for c in d["constructors"]))


@dataclass
class Report:
    file: str
    mode: str
    cost_model: CostModel
    status: str = "ok"
    exit_code: int = EXIT_OK
    main: Optional[str] = None
    result: Optional[AnalysisResult] = None
    measured: list[tuple[Demand, object]] = field(default_factory=list)
    rows: list[tuple[Demand, Fraction, Fraction, bool]] = field(default_factory=list)
    failure: Optional[tuple[str, str]] = None

    def to_json(self) -> dict:
        out: dict = {"schema": SCHEMA, "file": self.file, "mode": self.mode,
                     "status": self.status, "exit_code": self.exit_code,
                     "main": self.main,
                     "cost_model": {k: rat(v) for k, v in self.cost_model.as_dict().items()}}
        r = self.result
        if r is not None:
            out["typing"] = r.typing()
            out["upper"] = rat(r.upper)
            out["lower"] = rat(r.lower)
            out["type"] = type_to_json(r.type)
            out["lp"] = {"variables": len(r.lp.variables),
                         "constraints": len(r.lp.constraints),
                         "objective": rat(r.solution.objective)}
        if self.measured:
            out["measured"] = [{"demand": str(d), "total": rat(c.total),
                                "per_kind": dict(c.per_kind)} for d, c in self.measured]
        if self.rows:
            out["rows"] = [{"demand": str(d), "bound": rat(b), "measured": rat(m), "ok": ok}
                           for d, b, m, ok in self.rows]
        if self.failure:
            out["failure"] = {"kind": self.failure[0], "message": self.failure[1]}
        return out

    def to_text(self) -> str:
        lines = []
        if self.failure:
            kind, msg = self.failure
            lines.append(f"{self.file}: {msg}" if kind != "parse" else msg)
        if self.result is not None:
            lines.append(self.result.typing())
        for d, c in self.measured:
            counts = " ".join(f"{k}={n}" for k, n in c.per_kind.items())
            lines.append(f"{d}: total {c.total}  ({counts})")
        if self.rows:
            lines.append(f"{'demand':<12} {'bound':>10} {'measured':>10}  ok")
            for d, b, m, ok in self.rows:
                lines.append(f"{str(d):<12} {str(b):>10} {str(m):>10}  {'yes' if ok else 'NO'}")
        return "\n".join(lines)


def run(cfg: RunConfig) -> Report:
    rep = Report(str(cfg.input_path), cfg.mode, cfg.cost_model)
    try:
        m = parse_module(cfg.input_path.read_text(encoding="utf-8"), cfg.main_name)
    except ParseError as e:
        rep.status, rep.exit_code = "parse-error", EXIT_TYPE
        rep.failure = ("parse", f"{cfg.input_path}:{e}")
        return rep
    except OSError as e:
        rep.status, rep.exit_code = "io-error", EXIT_USAGE
        rep.failure = ("io", str(e))
        return rep
    rep.main = m.main
    if cfg.mode in ("analyze", "check"):
        if not _analyze(cfg, m, rep):
            return rep
    if cfg.mode in ("measure", "check"):
        _measure(cfg, m, rep)
    return rep


def _analyze(cfg: RunConfig, m: Module, rep: Report) -> bool:
    try:
        res = analyze(m, cfg.cost_model, cfg.options)
    except TypingError as e:
        rep.status, rep.exit_code = "type-error", EXIT_TYPE
        rep.failure = ("type", f"type error: {e}")
        return False
    except AnalysisFailure as e:
        rep.status, rep.exit_code = e.status, EXIT_INFEASIBLE
        rep.failure = ("lp", str(e))
        if cfg.dump_lp:
            cfg.dump_lp.write_text(e.lp.to_cplex())
        if cfg.dump_derivation:
            cfg.dump_derivation.write_text(e.derivation.dump(lp=e.lp))
        return False
    rep.result = res
    if cfg.dump_lp:
        cfg.dump_lp.write_text(res.lp.to_cplex())
    if cfg.dump_derivation:
        cfg.dump_derivation.write_text(res.derivation.dump(res.solution))
    return True


def _measure(cfg: RunConfig, m: Module, rep: Report):
    demands = cfg.demands or [WHNF()]
    try:
        for d in demands:
            rep.measured.append((d, eval_demand(m, cfg.cost_model, d)))
            if rep.result is not None:
                bound = aggregate_bound(rep.result.type, rep.result.upper, d)
                got = rep.measured[-1][1].total
                rep.rows.append((d, bound, got, got <= bound))
    except (EvalError, ShapeError) as e:
        rep.status, rep.exit_code = "eval-error", EXIT_EVAL
        rep.failure = ("eval", f"{type(e).__name__}: {e}")
        return
    if any(not ok for *_, ok in rep.rows):
        rep.status, rep.exit_code = "unsound", EXIT_UNSOUND
        rep.failure = ("unsound", "measured cost exceeds the inferred bound")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lazecost", description="Amortized cost analysis for lazy core programs.")
    p.add_argument("mode", choices=["analyze", "measure", "check"])
    p.add_argument("file", nargs="?", type=Path, help="a .lzc module")
    p.add_argument("--all", type=Path, metavar="DIR", help="process every .lzc file in DIR")
    p.add_argument("--cost", default="alloc",
                   help="alloc | steps | zero | k=v,... (e.g. cons=1,let=1)")
    p.add_argument("--main", dest="main_name", help="binding to analyze")
    p.add_argument("--demand", action="append", default=[],
                   help="whnf | spine:N | elems:N (repeatable)")
    p.add_argument("--dump-lp", type=Path, metavar="PATH")
    p.add_argument("--dump-derivation", type=Path, metavar="PATH")
    p.add_argument("--legacy-lower-thunks", action="store_true",
                   help="let recursive references carry reduced thunk costs (unsound)")
    p.add_argument("--objective", choices=["asymptotic", "bound-first"], default="asymptotic")
    p.add_argument("--format", dest="fmt", choices=["text", "json"], default="text")
    return p


def main(argv=None) -> int:
    p = build_parser()
    args = p.parse_args(argv)
    if (args.file is None) == (args.all is None):
        p.error("give exactly one of FILE or --all DIR")
    try:
        cm = CostModel.parse(args.cost)
        demands = [parse_demand(d) for d in args.demand]
    except ValueError as e:
        p.error(str(e))
    if args.mode == "check" and not demands:
        p.error("check mode needs at least one --demand")
    files = [args.file] if args.file else sorted(args.all.glob("*.lzc"))
    opts = InferOptions(legacy_lower_thunks=args.legacy_lower_thunks, objective=args.objective)
    reports = []
    for f in files:
        cfg = RunConfig(f, args.mode, args.main_name, cm, opts, demands,
                        args.dump_lp if args.file else None,
                        args.dump_derivation if args.file else None, args.fmt)
        reports.append(run(cfg))
    if args.fmt == "json":
        payload = reports[0].to_json() if args.file else \
            {"schema": SCHEMA, "reports": [r.to_json() for r in reports]}
        print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        for r in reports:
            text = r.to_text()
            if args.all:
                text = f"== {r.file}\n{text}"
            stream = sys.stderr if r.failure and r.result is None and not r.measured else sys.stdout
            print(text, file=stream)
    return max(r.exit_code for r in reports) if reports else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
