"""Exception types shared across the package."""


class HsleError(Exception):
    """Base class for all package-specific errors."""


class DomainError(HsleError):
    """Input outside the mathematical domain of an operation."""


class NonConvergent(HsleError):
    """A series or iteration failed to reach its truncation bound."""


class NumericalError(HsleError):
    """A numerical scheme received an argument it cannot handle (e.g. a
    point inside a slit), usually signalling a too-coarse grid."""


class StepSizeUnderflow(HsleError):
    """Adaptive step size fell below the floor; a collision was not resolved."""


class SwallowedError(HsleError):
    """A tracked boundary point was absorbed where the caller required it live."""


class NoInterface(HsleError):
    """No sign change at the requested interface start point."""


class InconsistentConfig(HsleError):
    """A lattice configuration violates a structural assumption (corrupted)."""


class TooLarge(HsleError):
    """Exact enumeration requested beyond the configured state-space cap."""


class TooFewSamples(HsleError):
    """A statistical routine was called with fewer samples than it supports."""


class SolverFailure(HsleError):
    """An iterative linear solver stopped above its residual tolerance."""


class BudgetExhausted(HsleError):
    """A rejection or retry budget ran out before acceptance."""
