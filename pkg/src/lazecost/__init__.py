"""Amortized resource analysis for a lazy functional core language.

Parse a module with :func:`parse_module`, infer bounds with :func:`analyze`
and measure actual costs with :func:`eval_demand`.
"""

from .infer import AnalysisFailure, AnalysisResult, CostModel, InferOptions, analyze
from .interp import SpineElems, SpineN, WHNF, aggregate_bound, eval_demand, eval_whnf
from .parser import ParseError, parse_module
from .shapes import TypingError

__all__ = ["AnalysisFailure", "AnalysisResult", "CostModel", "InferOptions", "analyze",
           "SpineElems", "SpineN", "WHNF", "aggregate_bound", "eval_demand", "eval_whnf",
           "ParseError", "parse_module", "TypingError"]
__version__ = "0.1.0"
