"""Reproduce the worked examples: repeat, map over repeat and fibs.

Usage: python scripts/reproduce_examples.py
"""

from __future__ import annotations

from pathlib import Path

from lazecost.infer import AnalysisFailure, CostModel, InferOptions, analyze
from lazecost.interp import SpineElems, SpineN, aggregate_bound, demand_profile, list_costs
from lazecost.parser import parse_module

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
ALLOC = CostModel.preset("alloc")


def load(name):
    return parse_module((CORPUS / f"{name}.lzc").read_text())


def show(title, m, options=InferOptions(), demand=None, ns=(0, 1, 2, 5, 10, 50)):
    print(f"== {title}")
    try:
        r = analyze(m, ALLOC, options)
    except AnalysisFailure as e:
        print(f"   {e}\n")
        return
    print("  ", r.typing())
    head, tail = list_costs(r.type)
    print(f"   head {head}, tail {tail}")
    if demand is not None:
        prof = demand_profile(m, ALLOC, demand(max(ns)))
        for n in ns:
            b = aggregate_bound(r.type, r.upper, demand(n))
            mark = "" if prof[n] <= b else "   <-- exceeds bound"
            print(f"   {str(demand(n)):<9} bound {str(b):>5}  measured {str(prof[n]):>5}{mark}")
    print()


def main():
    show("repeat (cyclic let)", load("repeat"), demand=SpineN)
    show("repeat' (unfolding)", load("repeat_unfold"), demand=SpineN)
    show("map (+1) over repeat", load("map_repeat"), demand=SpineElems)
    show("fibs", load("fibs"))
    show("fibs with legacy lower-thunks", load("fibs"),
         InferOptions(legacy_lower_thunks=True), demand=SpineN)


if __name__ == "__main__":
    main()
