"""Print bound versus measured cost for every corpus program.

Usage: python scripts/soundness_table.py [--corpus DIR] [--max-n N] [--cost alloc,steps]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from lazecost.infer import AnalysisFailure, CostModel, analyze
from lazecost.interp import (WHNF, ShapeError, SpineElems, SpineN, aggregate_bound,
                             demand_profile, eval_demand, list_costs)
from lazecost.parser import parse_module

ROOT = Path(__file__).resolve().parent.parent


def rows(path: Path, preset: str, max_n: int):
    cm = CostModel.preset(preset)
    m = parse_module(path.read_text())
    try:
        r = analyze(m, cm)
    except AnalysisFailure as e:
        return [(path.stem, preset, "-", e.status, "", "", "")]
    whnf = eval_demand(m, cm, WHNF()).total
    out = [(path.stem, preset, r.typing().split(" : ")[0][1:], "whnf", r.upper, whnf,
            "ok" if whnf <= r.upper else "VIOLATION")]
    try:
        list_costs(r.type)
    except ShapeError:
        return out
    for kind in (SpineN, SpineElems):
        prof = demand_profile(m, cm, kind(max_n))
        worst = max(range(max_n + 1),
                    key=lambda n: prof[n] - aggregate_bound(r.type, r.upper, kind(n)))
        bound = aggregate_bound(r.type, r.upper, kind(worst))
        out.append((path.stem, preset, "", str(kind(worst)), bound, prof[worst],
                    "ok" if prof[worst] <= bound else "VIOLATION"))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", type=Path, default=ROOT / "corpus")
    ap.add_argument("--max-n", type=int, default=100)
    ap.add_argument("--cost", default="alloc,steps")
    args = ap.parse_args()
    print(f"{'program':<20} {'cost':<6} {'typing':<16} {'tightest':<10} {'bound':>8} "
          f"{'measured':>9}  verdict")
    bad = 0
    for path in sorted(args.corpus.glob("*.lzc")):
        for preset in args.cost.split(","):
            for prog, cm, typ, demand, bound, got, verdict in rows(path, preset, args.max_n):
                bad += verdict == "VIOLATION"
                print(f"{prog:<20} {cm:<6} {typ:<16} {demand:<10} {str(bound):>8} "
                      f"{str(got):>9}  {verdict}")
    print(f"\n{bad} violations")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
