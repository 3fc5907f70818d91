"""Desk-scale simulation laboratory for hypergeometric SLE and critical
Ising / FK-Ising interfaces."""

from .errors import (BudgetExhausted, DomainError, HsleError,
                     InconsistentConfig, NoInterface, NonConvergent,
                     NumericalError, SolverFailure, StepSizeUnderflow,
                     SwallowedError, TooFewSamples, TooLarge)
from .loewner import (DrivingPath, HalfPlaneCurve, HullMapState, TimeGrid,
                      conformal_transport, evolve_points, extract_driving,
                      forward_trace, mobius_reverse)
from .sde import (HsleParams, HsleRun, RngSeed, SleParams, StopReason,
                  drift_hsle, simulate_hsle, simulate_sle, simulate_sle_rho)
from .specialfn import (FOverFTable, FValueTable, HsleFunction,
                        HypergeomParams, gauss_2f1, gauss_2f1_at_one, hsle_F,
                        rect_to_halfplane)

__version__ = "0.1.0"

__all__ = [
    "BudgetExhausted", "DomainError", "HsleError", "InconsistentConfig",
    "NoInterface", "NonConvergent", "NumericalError", "SolverFailure",
    "StepSizeUnderflow", "SwallowedError", "TooFewSamples", "TooLarge",
    "DrivingPath", "HalfPlaneCurve", "HullMapState", "TimeGrid",
    "conformal_transport", "evolve_points", "extract_driving",
    "forward_trace", "mobius_reverse",
    "HsleParams", "HsleRun", "RngSeed", "SleParams", "StopReason",
    "drift_hsle", "simulate_hsle", "simulate_sle", "simulate_sle_rho",
    "FOverFTable", "FValueTable", "HsleFunction", "HypergeomParams",
    "gauss_2f1", "gauss_2f1_at_one", "hsle_F", "rect_to_halfplane",
    "__version__",
]
