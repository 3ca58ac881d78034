"""Fluid LP machinery: restricted-master simplex, pricing oracles, column generation."""
from .colgen import (
    HEURISTIC,
    ITERATION_CAPPED,
    OPTIMAL,
    AssortmentDistribution,
    LPResult,
    SolverOptions,
    UcbLpSpec,
    lp_text,
    solve_lp,
    solve_ucb_lp,
)
from .pricing import price_column, price_enumerate
from .simplex import DegeneratePivotError, SimplexResult, simplex_solve

__all__ = [
    "AssortmentDistribution",
    "DegeneratePivotError",
    "HEURISTIC",
    "ITERATION_CAPPED",
    "LPResult",
    "OPTIMAL",
    "SimplexResult",
    "SolverOptions",
    "UcbLpSpec",
    "lp_text",
    "price_column",
    "price_enumerate",
    "simplex_solve",
    "solve_lp",
    "solve_ucb_lp",
]
