class AlineError(Exception):
    """Base class for all toolkit errors."""


class BundleFormatError(AlineError):
    """Manifest or binary file does not conform to the interchange format."""


class BundleInvariantError(AlineError):
    """A prediction bundle violates a structural invariant."""


class DegenerateFitError(AlineError):
    """Line fit or least-squares system is degenerate."""


class SolverError(AlineError):
    """Root-finding failed to converge or was given an unsolvable target."""
